#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace clearn {

// All randomness flows through RngStream so that an experiment is fully
// determined by its root seed. Child streams are derived by mixing the parent
// seed with a list of stream ids (splitmix64), so parallel sweep cells get
// independent, reproducible streams regardless of scheduling order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t id);

  // Fixed-order derivation: child(root, {a, b}) != child(root, {b, a}).
  static RngStream child(std::uint64_t root, std::initializer_list<std::uint64_t> ids);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::size_t uniform_below(std::size_t n);

  // Geometric on {1, 2, ...} with P(d) = (1 - gamma) * gamma^(d - 1).
  long geometric_delta(double gamma);

  double gamma_sample(double alpha) {
    std::gamma_distribution<double> dist(alpha, 1.0);
    return dist(engine_);
  }

  std::vector<double> dirichlet(double alpha, std::size_t k);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace clearn

#include "clearn/rng.hpp"

#include <cmath>

#include "clearn/errors.hpp"

namespace clearn {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RngStream::mix(std::uint64_t seed, std::uint64_t id) {
  return splitmix64(seed ^ splitmix64(id));
}

RngStream RngStream::child(std::uint64_t root, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = root;
  for (std::uint64_t id : ids) s = mix(s, id);
  return RngStream(s);
}

std::size_t RngStream::uniform_below(std::size_t n) {
  if (n == 0) throw SamplingError("uniform_below: empty range");
  // Unbiased rejection sampling on the top multiple of n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % n);
}

long RngStream::geometric_delta(double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw ConfigError("geometric_delta: gamma must be in [0, 1)");
  if (gamma == 0.0) return 1;
  // Inverse CDF: d = 1 + floor(log(1 - u) / log(gamma)).
  const double u = uniform01();
  const double d = std::floor(std::log1p(-u) / std::log(gamma));
  return 1 + static_cast<long>(d);
}

std::vector<double> RngStream::dirichlet(double alpha, std::size_t k) {
  if (alpha <= 0.0) throw ConfigError("dirichlet: alpha must be positive");
  std::vector<double> row(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    row[i] = gamma_sample(alpha);
    total += row[i];
  }
  // A zero total has probability zero; guard against underflow anyway.
  if (total <= 0.0) {
    for (auto& v : row) v = 1.0 / static_cast<double>(k);
    return row;
  }
  for (auto& v : row) v /= total;
  return row;
}

}  // namespace clearn

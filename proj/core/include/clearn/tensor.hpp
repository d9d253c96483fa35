#pragma once

#include <cstddef>
#include <vector>

namespace clearn {

// Dense rank-3 tensor used for transition tables and (state, action, goal)
// quantities. Row-major: index (i, j, k) -> (i * d1 + j) * d2 + k.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill = 0.0)
      : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * d1_ + j) * d2_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * d1_ + j) * d2_ + k];
  }

  std::size_t dim0() const { return d0_; }
  std::size_t dim1() const { return d1_; }
  std::size_t dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor3& other) const {
    return d0_ == other.d0_ && d1_ == other.d1_ && d2_ == other.d2_;
  }

 private:
  std::size_t d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    m = d > m ? d : (-d > m ? -d : m);
  }
  return m;
}

}  // namespace clearn

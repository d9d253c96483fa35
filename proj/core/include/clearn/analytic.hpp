#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "clearn/mdp.hpp"
#include "clearn/tensor.hpp"

namespace clearn {

// p_plus(g | s, a): every (s, a) slice is a distribution over goal states.
struct DiscountedDensity {
  Tensor3 table;  // [state][action][goal]

  void validate(double tol = 1e-9) const;
  // CSV with header `state,action,goal,prob`.
  void serialize(std::ostream& out) const;
  static DiscountedDensity deserialize(std::istream& in);
};

struct OccupancyMatrices {
  std::vector<double> policy_averaged;  // T, row-major [state][next_state]
  Tensor3 one_step;                     // T0 = p(s' | s, a)
};

struct FixedPointReport {
  std::map<std::string, double> values;
  long iterations = 0;
  double residual = 0.0;
};

OccupancyMatrices occupancy_matrices(const TabularMDP& mdp, const StochasticPolicy& policy);

// P = (1 - gamma) T0 (I - gamma T)^{-1}, solved by LU factorization.
DiscountedDensity analytic_density(const TabularMDP& mdp, const StochasticPolicy& policy,
                                   double gamma);

// Policy-level density p_plus(g | s) = sum_a pi(a|s) P[s][a][g].
std::vector<std::vector<double>> state_density(const DiscountedDensity& density,
                                               const StochasticPolicy& policy);

// Mean over (s, a) of sum_g P log(P / Q); estimate slices are renormalized
// first and floored at 1e-12. Truth zeros contribute zero.
double forward_kl(const DiscountedDensity& truth, const DiscountedDensity& estimate);

// Fixed point of the relabeled Q-learning update on the n-state self-loop
// process. Reports the weight-normalized and unnormalized-weight fixed
// points plus the paper's printed closed form for reference.
FixedPointReport example1_fixed_point(std::size_t n, double gamma, double lambda);

// Joint fixed point of the four case-equations on the two-state chain, with
// the normalized prediction and the reference density values.
FixedPointReport example2_fixed_points(double gamma, double lambda);

// sum_g p(g) * embedding(g) for a single (s, a) slice.
std::vector<double> density_to_expected_goal(
    const std::vector<double>& density_slice,
    const std::vector<std::vector<double>>& goal_embedding);

}  // namespace clearn

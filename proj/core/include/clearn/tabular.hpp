#pragma once

#include <cstddef>
#include <vector>

#include "clearn/analytic.hpp"
#include "clearn/mdp.hpp"
#include "clearn/tensor.hpp"

namespace clearn {

// Exact tabular representation of the classifier odds C/(1-C).
struct RatioTable {
  Tensor3 ratio;  // [state][action][goal], entries >= 0

  void validate() const;
};

// Tabular Q values in [0, 1].
struct QTable {
  Tensor3 q;  // [state][action][goal]
};

struct ValueIterationResult {
  RatioTable table;
  long sweeps = 0;
  double final_change = 0.0;
  // sup-norm change per sweep, for contraction checks
  std::vector<double> sweep_changes;
};

// One application of the assignment operator:
//   ratio(s,a,g) <- (1-gamma) p(g|s,a)/m(g) + gamma E_{s',a'}[ratio(s',a',g)]
RatioTable assignment_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                            const std::vector<double>& marginal, const RatioTable& ratio,
                            double gamma);

// The same operator reached through the probabilistic TD route: per cell,
// compute the weighted expected label E[y | s, a, g] of the TD batch
// composition, assign C <- E[y], and convert back to odds.
RatioTable expected_td_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                             const std::vector<double>& marginal, const RatioTable& ratio,
                             double gamma);

// Squared-error route: per cell, minimize the expected weighted MSE of the
// same batch composition in closed form (weighted mean of targets).
RatioTable expected_td_sweep_mse(const TabularMDP& mdp, const StochasticPolicy& policy,
                                 const std::vector<double>& marginal,
                                 const RatioTable& ratio, double gamma);

// Monte Carlo expected assignment: ratio = p_plus(g|s,a) / m(g).
RatioTable expected_mc_assignment(const DiscountedDensity& p_plus,
                                  const std::vector<double>& marginal);

// Appendix-style blend: lambda_mix of the TD operator and (1 - lambda_mix) of
// the MC assignment, realized through the combined weighted-CE batch.
RatioTable expected_mixed_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                                const std::vector<double>& marginal,
                                const DiscountedDensity& p_plus, const RatioTable& ratio,
                                double gamma, double lambda_mix);

// Goal-conditioned evaluation sweep: a' ~ pi(a' | s', g).
RatioTable assignment_sweep_gc(const TabularMDP& mdp, const GoalConditionedPolicy& policy,
                               const std::vector<double>& marginal,
                               const RatioTable& ratio, double gamma);

ValueIterationResult tabular_c_value_iteration(const TabularMDP& mdp,
                                               const StochasticPolicy& policy,
                                               const std::vector<double>& marginal,
                                               double gamma, double tol,
                                               long max_sweeps = 100000);

ValueIterationResult tabular_c_value_iteration_gc(const TabularMDP& mdp,
                                                  const GoalConditionedPolicy& policy,
                                                  const std::vector<double>& marginal,
                                                  double gamma, double tol,
                                                  long max_sweeps = 100000);

struct OptimalityResult {
  RatioTable table;
  GoalConditionedPolicy greedy;
  long sweeps = 0;
  double final_change = 0.0;
};

// Bellman optimality: max over a' replaces the policy expectation; returns
// the greedy goal-conditioned policy (lowest index among near-ties).
OptimalityResult tabular_c_optimality_iteration(const TabularMDP& mdp,
                                                const std::vector<double>& marginal,
                                                double gamma, double tol,
                                                long max_sweeps = 100000);

// Relabeled Q-learning expected update with weight-normalized targets:
//   Q(s,a,g) <- [(1-l) p(g|s,a) + l m(g) gamma E Q'] / [(1-l) p(g|s,a) + l m(g)]
// Cells with zero total weight keep their current value. Targets clamp to [0,1].
QTable expected_q_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                        const std::vector<double>& marginal, const QTable& q,
                        double gamma, double lambda);

QTable tabular_q_fixed_point(const TabularMDP& mdp, const StochasticPolicy& policy,
                             const std::vector<double>& marginal, double gamma,
                             double lambda, double tol, long max_sweeps = 100000);

// argmax over actions of the ratio per (state, goal); ties within a relative
// tolerance resolve to the lowest action index.
GoalConditionedPolicy greedy_policy_from_ratio(const RatioTable& ratio);

DiscountedDensity density_from_ratio(const RatioTable& ratio,
                                     const std::vector<double>& marginal);

}  // namespace clearn

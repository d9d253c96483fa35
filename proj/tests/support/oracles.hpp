#pragma once

// Independent reference implementations used only by tests. These must stay
// decoupled from the library code paths they check.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "clearn/analytic.hpp"
#include "clearn/mdp.hpp"
#include "clearn/net.hpp"
#include "clearn/rng.hpp"

namespace clearn::testing {

// Upper-tail p-value of a chi-square statistic with `dof` degrees of freedom,
// via the regularized incomplete gamma function.
double chi_square_pvalue(double stat, double dof);

// Chi-square goodness-of-fit p-value for observed counts against expected
// probabilities (cells with tiny expectation are pooled into the last cell).
double chi_square_gof(const std::vector<std::size_t>& counts,
                      const std::vector<double>& probs);

// Monte Carlo estimate of the discounted future-state density by rolling the
// chain forward a geometric number of steps. rollouts_per_pair independent
// draws for every (state, action).
Tensor3 rollout_density_estimate(const TabularMDP& mdp, const StochasticPolicy& policy,
                                 double gamma, std::size_t rollouts_per_pair,
                                 RngStream& rng);

// Independently-coded stochastic Q-learning with hindsight relabeling on a
// single-action chain given as explicit (state, next_state) transitions.
// Returns the [state][goal] table after `steps` running-average updates.
std::vector<std::vector<double>> stochastic_relabeled_q(
    const std::vector<std::pair<std::size_t, std::size_t>>& transitions,
    std::size_t num_states, double gamma, double lambda, std::size_t steps,
    std::uint64_t seed);

// Max relative error between analytic gradients and central finite
// differences (step h) over every parameter of the net.
enum class LossKind { kCrossEntropy, kSquaredError };
double finite_difference_max_rel_err(const DenseNet& net, const LabeledBatch& batch,
                                     LossKind kind, double h = 1e-5);

// Straightforward reference for the forward KL (no shared code with the
// library implementation).
double reference_forward_kl(const DiscountedDensity& truth,
                            const DiscountedDensity& estimate);

// Uniformly random small MDP and Dirichlet(1) policy for property tests.
TabularMDP random_mdp(std::size_t states, std::size_t actions, RngStream& rng);

}  // namespace clearn::testing

#include "clearn/mdp.hpp"

#include <cmath>
#include <string>

#include "clearn/errors.hpp"

namespace clearn {
namespace {

constexpr double kRowTol = 1e-12;

void check_row(const double* p, std::size_t n, const std::string& what) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] < 0.0 || p[i] > 1.0)
      throw ConfigError(what + ": entry outside [0, 1]");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kRowTol)
    throw ConfigError(what + ": row sums to " + std::to_string(sum));
}

}  // namespace

void TabularMDP::validate() const {
  if (num_states == 0 || num_actions == 0)
    throw ConfigError("TabularMDP: num_states and num_actions must be positive");
  if (transition.dim0() != num_states || transition.dim1() != num_actions ||
      transition.dim2() != num_states)
    throw ConfigError("TabularMDP: transition shape mismatch");
  if (initial_dist.size() != num_states)
    throw ConfigError("TabularMDP: initial_dist size mismatch");
  for (std::size_t s = 0; s < num_states; ++s)
    for (std::size_t a = 0; a < num_actions; ++a)
      check_row(&transition.data()[(s * num_actions + a) * num_states], num_states,
                "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]");
  check_row(initial_dist.data(), num_states, "initial_dist");
}

void StochasticPolicy::validate() const {
  if (probs.empty()) throw ConfigError("StochasticPolicy: empty");
  const std::size_t actions = probs[0].size();
  for (std::size_t s = 0; s < probs.size(); ++s) {
    if (probs[s].size() != actions)
      throw ConfigError("StochasticPolicy: ragged rows");
    check_row(probs[s].data(), actions, "policy[" + std::to_string(s) + "]");
  }
}

void GoalConditionedPolicy::validate() const {
  if (probs.empty()) throw ConfigError("GoalConditionedPolicy: empty");
  for (const auto& per_goal : probs)
    for (const auto& row : per_goal)
      check_row(row.data(), row.size(), "gc policy row");
}

GoalConditionedPolicy GoalConditionedPolicy::uniform(std::size_t states,
                                                     std::size_t goals,
                                                     std::size_t actions) {
  GoalConditionedPolicy pi;
  pi.probs.assign(states, std::vector<std::vector<double>>(
                              goals, std::vector<double>(actions, 1.0 / actions)));
  return pi;
}

StochasticPolicy GoalConditionedPolicy::slice(std::size_t goal) const {
  StochasticPolicy pi;
  pi.probs.reserve(probs.size());
  for (const auto& per_goal : probs) pi.probs.push_back(per_goal[goal]);
  return pi;
}

StochasticPolicy uniform_policy(const TabularMDP& mdp) {
  StochasticPolicy pi;
  pi.probs.assign(mdp.num_states,
                  std::vector<double>(mdp.num_actions, 1.0 / mdp.num_actions));
  return pi;
}

StochasticPolicy dirichlet_policy(const TabularMDP& mdp, double alpha, RngStream& rng) {
  if (alpha <= 0.0) throw ConfigError("dirichlet_policy: alpha must be positive");
  StochasticPolicy pi;
  pi.probs.reserve(mdp.num_states);
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    pi.probs.push_back(rng.dirichlet(alpha, mdp.num_actions));
  return pi;
}

std::size_t sample_categorical(const std::vector<double>& probs, RngStream& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;  // guard against accumulated rounding
}

std::size_t sample_transition_row(const TabularMDP& mdp, std::size_t state,
                                  std::size_t action, RngStream& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  const std::size_t n = mdp.num_states;
  const double* row = &mdp.transition.data()[(state * mdp.num_actions + action) * n];
  for (std::size_t i = 0; i < n; ++i) {
    acc += row[i];
    if (u < acc) return i;
  }
  return n - 1;
}

}  // namespace clearn

#pragma once

#include <cstddef>
#include <vector>

#include "clearn/rng.hpp"
#include "clearn/tensor.hpp"

namespace clearn {

// Finite controlled Markov process: p(s' | s, a) plus the initial state
// distribution p1(s1). Rows are validated to sum to 1 within 1e-12.
struct TabularMDP {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  Tensor3 transition;               // [state][action][next_state]
  std::vector<double> initial_dist; // over states

  void validate() const;
};

// pi(a | s), one distribution over actions per state.
struct StochasticPolicy {
  std::vector<std::vector<double>> probs;  // [state][action]

  std::size_t num_states() const { return probs.size(); }
  std::size_t num_actions() const { return probs.empty() ? 0 : probs[0].size(); }
  void validate() const;
};

// pi(a | s, g): a stochastic policy per commanded goal.
struct GoalConditionedPolicy {
  // probs[state][goal][action]
  std::vector<std::vector<std::vector<double>>> probs;

  std::size_t num_states() const { return probs.size(); }
  std::size_t num_goals() const { return probs.empty() ? 0 : probs[0].size(); }
  std::size_t num_actions() const {
    return num_goals() == 0 ? 0 : probs[0][0].size();
  }
  void validate() const;

  static GoalConditionedPolicy uniform(std::size_t states, std::size_t goals,
                                       std::size_t actions);
  // The plain policy obtained by fixing the commanded goal.
  StochasticPolicy slice(std::size_t goal) const;
};

StochasticPolicy uniform_policy(const TabularMDP& mdp);

// Each row drawn independently from a symmetric Dirichlet(alpha).
StochasticPolicy dirichlet_policy(const TabularMDP& mdp, double alpha, RngStream& rng);

std::size_t sample_categorical(const std::vector<double>& probs, RngStream& rng);
std::size_t sample_transition_row(const TabularMDP& mdp, std::size_t state,
                                  std::size_t action, RngStream& rng);

}  // namespace clearn

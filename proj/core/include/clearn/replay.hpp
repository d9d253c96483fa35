#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "clearn/mdp.hpp"
#include "clearn/rng.hpp"

namespace clearn {

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  std::size_t next_state = 0;
  std::size_t trajectory_id = 0;
  std::size_t time_index = 0;
};

struct Trajectory {
  std::vector<std::size_t> states;   // length = actions.size() + 1
  std::vector<std::size_t> actions;

  std::size_t length() const { return actions.size(); }
};

// Flat storage for collected experience plus the empirical state marginal
// p(s_{t+}) over states at time indices >= 1 (the initial state is excluded).
// Single-writer: seal by ceasing to add; all sampling calls are read-only.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  explicit ReplayBuffer(std::size_t num_states) : marginal_counts_(num_states, 0) {}

  void add_trajectory(Trajectory traj);

  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const std::vector<std::size_t>& state_marginal_counts() const { return marginal_counts_; }

  std::size_t num_states() const { return marginal_counts_.size(); }
  std::size_t marginal_total() const { return marginal_total_; }

  // Normalized empirical marginal; floored at `floor` then renormalized when
  // floor > 0 (tabular ratio operators need strictly positive support).
  std::vector<double> marginal_distribution(double floor = 0.0) const;

  const Transition& sample_transition(RngStream& rng) const;

  // Uniform over all stored states at t >= 1, with multiplicity.
  std::size_t sample_marginal_state(RngStream& rng) const;
  // Same draw but identifying the buffer position (for observation lookup).
  std::pair<std::size_t, std::size_t> sample_marginal_position(RngStream& rng) const;

  // State Delta steps ahead of (trajectory_id, time_index), Delta from the
  // geometric truncated by rejection to the remaining trajectory length.
  std::size_t sample_hindsight_future(std::size_t trajectory_id, std::size_t time_index,
                                      double gamma, RngStream& rng) const;

  // Wire format: header then one `traj_id,t,state,action,next_state` per line.
  void serialize(std::ostream& out) const;
  static ReplayBuffer deserialize(std::istream& in, std::size_t num_states);

 private:
  std::vector<Transition> transitions_;
  std::vector<Trajectory> trajectories_;
  std::vector<std::size_t> marginal_counts_;
  std::vector<std::pair<std::size_t, std::size_t>> marginal_positions_;  // (traj, t>=1)
  std::size_t marginal_total_ = 0;
};

// P(Delta = d) = (1 - gamma) * gamma^(d-1) on d in {1, 2, ...}.
long sample_geometric_delta(double gamma, RngStream& rng);

Trajectory sample_trajectory(const TabularMDP& mdp, const StochasticPolicy& policy,
                             std::size_t horizon, RngStream& rng);

// Collects `num_trajectories` trajectories of `horizon` transitions each.
ReplayBuffer collect_buffer(const TabularMDP& mdp, const StochasticPolicy& policy,
                            std::size_t num_trajectories, std::size_t horizon,
                            RngStream& rng);

}  // namespace clearn

#include "clearn/replay.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "clearn/errors.hpp"

namespace clearn {

void ReplayBuffer::add_trajectory(Trajectory traj) {
  if (traj.states.size() != traj.actions.size() + 1)
    throw ConfigError("ReplayBuffer: trajectory states/actions length mismatch");
  const std::size_t id = trajectories_.size();
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    transitions_.push_back(
        {traj.states[t], traj.actions[t], traj.states[t + 1], id, t});
  }
  for (std::size_t t = 1; t < traj.states.size(); ++t) {
    const std::size_t s = traj.states[t];
    if (s >= marginal_counts_.size()) marginal_counts_.resize(s + 1, 0);
    ++marginal_counts_[s];
    marginal_positions_.emplace_back(id, t);
    ++marginal_total_;
  }
  trajectories_.push_back(std::move(traj));
}

std::vector<double> ReplayBuffer::marginal_distribution(double floor) const {
  if (marginal_total_ == 0) throw SamplingError("marginal_distribution: empty buffer");
  std::vector<double> p(marginal_counts_.size());
  for (std::size_t s = 0; s < p.size(); ++s)
    p[s] = static_cast<double>(marginal_counts_[s]) / marginal_total_;
  if (floor > 0.0) {
    double total = 0.0;
    for (auto& v : p) {
      if (v < floor) v = floor;
      total += v;
    }
    for (auto& v : p) v /= total;
  }
  return p;
}

const Transition& ReplayBuffer::sample_transition(RngStream& rng) const {
  if (transitions_.empty()) throw SamplingError("sample_transition: empty buffer");
  return transitions_[rng.uniform_below(transitions_.size())];
}

std::size_t ReplayBuffer::sample_marginal_state(RngStream& rng) const {
  const auto [traj, t] = sample_marginal_position(rng);
  return trajectories_[traj].states[t];
}

std::pair<std::size_t, std::size_t> ReplayBuffer::sample_marginal_position(
    RngStream& rng) const {
  if (marginal_positions_.empty())
    throw SamplingError("sample_marginal_state: empty buffer");
  return marginal_positions_[rng.uniform_below(marginal_positions_.size())];
}

std::size_t ReplayBuffer::sample_hindsight_future(std::size_t trajectory_id,
                                                  std::size_t time_index, double gamma,
                                                  RngStream& rng) const {
  if (trajectory_id >= trajectories_.size())
    throw SamplingError("sample_hindsight_future: bad trajectory id");
  const Trajectory& traj = trajectories_[trajectory_id];
  if (time_index >= traj.length())
    throw SamplingError("sample_hindsight_future: no future exists at time index");
  const std::size_t remaining = traj.length() - time_index;
  // Rejection keeps the draw unbiased w.r.t. the truncated geometric.
  for (;;) {
    const long delta = sample_geometric_delta(gamma, rng);
    if (static_cast<std::size_t>(delta) <= remaining)
      return traj.states[time_index + delta];
  }
}

void ReplayBuffer::serialize(std::ostream& out) const {
  out << "traj_id,t,state,action,next_state\n";
  for (const Transition& tr : transitions_) {
    out << tr.trajectory_id << ',' << tr.time_index << ',' << tr.state << ','
        << tr.action << ',' << tr.next_state << '\n';
  }
}

ReplayBuffer ReplayBuffer::deserialize(std::istream& in, std::size_t num_states) {
  std::string line;
  if (!std::getline(in, line) || line != "traj_id,t,state,action,next_state")
    throw ConfigError("ReplayBuffer::deserialize: missing header");
  ReplayBuffer buf(num_states);
  Trajectory current;
  std::size_t current_id = 0;
  bool open = false;
  auto flush = [&] {
    if (open) buf.add_trajectory(std::move(current));
    current = Trajectory{};
    open = false;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t id, t, s, a, ns;
    char c;
    if (!(row >> id >> c >> t >> c >> s >> c >> a >> c >> ns))
      throw ConfigError("ReplayBuffer::deserialize: malformed row: " + line);
    if (!open || id != current_id) {
      flush();
      current_id = id;
      current.states.push_back(s);
      open = true;
    }
    current.actions.push_back(a);
    current.states.push_back(ns);
  }
  flush();
  if (buf.marginal_counts_.size() < num_states)
    buf.marginal_counts_.resize(num_states, 0);
  return buf;
}

long sample_geometric_delta(double gamma, RngStream& rng) {
  return rng.geometric_delta(gamma);
}

Trajectory sample_trajectory(const TabularMDP& mdp, const StochasticPolicy& policy,
                             std::size_t horizon, RngStream& rng) {
  if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
    throw ConfigError("sample_trajectory: policy dimensions do not match mdp");
  if (horizon == 0) throw ConfigError("sample_trajectory: horizon must be positive");
  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.actions.reserve(horizon);
  std::size_t s = sample_categorical(mdp.initial_dist, rng);
  traj.states.push_back(s);
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = sample_categorical(policy.probs[s], rng);
    s = sample_transition_row(mdp, s, a, rng);
    traj.actions.push_back(a);
    traj.states.push_back(s);
  }
  return traj;
}

ReplayBuffer collect_buffer(const TabularMDP& mdp, const StochasticPolicy& policy,
                            std::size_t num_trajectories, std::size_t horizon,
                            RngStream& rng) {
  ReplayBuffer buf(mdp.num_states);
  for (std::size_t i = 0; i < num_trajectories; ++i)
    buf.add_trajectory(sample_trajectory(mdp, policy, horizon, rng));
  return buf;
}

}  // namespace clearn

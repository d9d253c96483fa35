#include <doctest.h>

#include <cmath>
#include <sstream>

#include "clearn/analytic.hpp"
#include "clearn/envs.hpp"
#include "clearn/errors.hpp"
#include "clearn/replay.hpp"
#include "support/oracles.hpp"

using namespace clearn;

namespace {

ReplayBuffer tiny_buffer(const std::vector<std::vector<std::size_t>>& state_seqs) {
  ReplayBuffer buf;
  for (const auto& states : state_seqs) {
    Trajectory t;
    t.states = states;
    t.actions.assign(states.size() - 1, 0);
    buf.add_trajectory(std::move(t));
  }
  return buf;
}

}  // namespace

TEST_CASE("self-loop dynamics produce constant trajectories") {
  const TabularMDP mdp = make_example1(3);
  const StochasticPolicy pi = uniform_policy(mdp);
  RngStream rng(3);
  const Trajectory t = sample_trajectory(mdp, pi, 3, rng);
  REQUIRE(t.states.size() == 4);
  for (std::size_t s : t.states) CHECK(s == t.states[0]);
}

TEST_CASE("example2 chain is absorbing at s2") {
  TabularMDP mdp = make_example2();
  mdp.initial_dist = {0.0, 1.0};  // start in the absorbing state
  const StochasticPolicy pi = uniform_policy(mdp);
  RngStream rng(5);
  const Trajectory t = sample_trajectory(mdp, pi, 10, rng);
  for (std::size_t s : t.states) CHECK(s == 1);
}

TEST_CASE("trajectory histogram matches its exact visit expectation") {
  const NoisyGridworld world(5, 5);
  RngStream pol_rng(75);
  const StochasticPolicy pi = dirichlet_policy(world.mdp(), 1.0, pol_rng);
  RngStream rng(76);
  const std::size_t n_traj = 100, horizon = 100;
  const ReplayBuffer buf = collect_buffer(world.mdp(), pi, n_traj, horizon, rng);

  // Exact expected visit frequency at t = 1..horizon from the uniform start:
  // mu = (1/horizon) sum_t p1' T^t, with T the policy-averaged chain.
  const auto occ = occupancy_matrices(world.mdp(), pi);
  std::vector<double> dist = world.mdp().initial_dist;
  std::vector<double> mu(25, 0.0);
  for (std::size_t t = 1; t <= horizon; ++t) {
    std::vector<double> next(25, 0.0);
    for (std::size_t s = 0; s < 25; ++s)
      for (std::size_t g = 0; g < 25; ++g)
        next[g] += dist[s] * occ.policy_averaged[s * 25 + g];
    dist = next;
    for (std::size_t g = 0; g < 25; ++g) mu[g] += dist[g] / horizon;
  }

  // Trajectories are independent, so use the across-trajectory standard error
  // of the per-trajectory visit frequencies.
  for (std::size_t g = 0; g < 25; ++g) {
    std::vector<double> freqs(n_traj, 0.0);
    for (std::size_t i = 0; i < n_traj; ++i) {
      const Trajectory& t = buf.trajectories()[i];
      for (std::size_t k = 1; k < t.states.size(); ++k)
        if (t.states[k] == g) freqs[i] += 1.0 / horizon;
    }
    double mean = 0.0;
    for (double f : freqs) mean += f / n_traj;
    double var = 0.0;
    for (double f : freqs) var += (f - mean) * (f - mean) / (n_traj - 1);
    const double se = std::sqrt(var / n_traj);
    CHECK(std::abs(mean - mu[g]) < 3 * se + 1e-9);
  }
}

TEST_CASE("hindsight future at gamma = 0 is the next state") {
  const auto buf = tiny_buffer({{4, 7, 2, 9}});
  RngStream rng(9);
  CHECK(buf.sample_hindsight_future(0, 0, 0.0, rng) == 7);
  CHECK(buf.sample_hindsight_future(0, 1, 0.0, rng) == 2);
  CHECK(buf.sample_hindsight_future(0, 2, 0.0, rng) == 9);
  CHECK_THROWS_AS(buf.sample_hindsight_future(0, 3, 0.0, rng), SamplingError);
}

TEST_CASE("hindsight future on a self-loop trajectory") {
  const auto buf = tiny_buffer({{6, 6, 6, 6, 6}});
  RngStream rng(11);
  for (int i = 0; i < 50; ++i) CHECK(buf.sample_hindsight_future(0, 0, 0.9, rng) == 6);
}

TEST_CASE("hindsight future matches the truncated geometric by enumeration") {
  // One trajectory visiting distinct states so every offset is identifiable.
  std::vector<std::size_t> states(13);
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = i;
  const auto buf = tiny_buffer({states});
  const double gamma = 0.9;
  const std::size_t t0 = 2;
  const std::size_t remaining = states.size() - 1 - t0;

  // Enumerate P(Delta = d) restricted to valid offsets, renormalized.
  std::vector<double> expected(remaining, 0.0);
  double z = 0.0;
  for (std::size_t d = 1; d <= remaining; ++d) {
    expected[d - 1] = (1.0 - gamma) * std::pow(gamma, double(d - 1));
    z += expected[d - 1];
  }
  for (auto& p : expected) p /= z;

  RngStream rng(13);
  const std::size_t n = 100000;
  std::vector<double> freq(remaining, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = buf.sample_hindsight_future(0, t0, gamma, rng);
    freq[g - t0 - 1] += 1.0 / n;
  }
  double tv = 0.0;
  for (std::size_t d = 0; d < remaining; ++d) tv += std::abs(freq[d] - expected[d]);
  CHECK(tv / 2.0 < 0.01);
}

TEST_CASE("marginal sampling excludes the initial state") {
  const auto buf = tiny_buffer({{0, 1}});
  RngStream rng(17);
  for (int i = 0; i < 20; ++i) CHECK(buf.sample_marginal_state(rng) == 1);
}

TEST_CASE("marginal sampling respects multiplicity") {
  // States at t >= 1: {A=5, A, A, B} -> P(A) = 0.75.
  const auto buf = tiny_buffer({{0, 5, 5, 5, 6}});
  RngStream rng(19);
  const std::size_t n = 100000;
  std::size_t a_count = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (buf.sample_marginal_state(rng) == 5) ++a_count;
  const double se = std::sqrt(0.75 * 0.25 / n);
  CHECK(std::abs(a_count / double(n) - 0.75) < 3 * se);
}

TEST_CASE("marginal distribution equals recounted histogram exactly") {
  const NoisyGridworld world(5, 5);
  RngStream pol_rng(23);
  const StochasticPolicy pi = dirichlet_policy(world.mdp(), 1.0, pol_rng);
  RngStream rng(29);
  const ReplayBuffer buf = collect_buffer(world.mdp(), pi, 100, 100, rng);
  std::vector<std::size_t> recount(25, 0);
  for (const Trajectory& t : buf.trajectories())
    for (std::size_t i = 1; i < t.states.size(); ++i) ++recount[t.states[i]];
  const auto marginal = buf.marginal_distribution();
  REQUIRE(buf.marginal_total() == 100 * 100);
  for (std::size_t s = 0; s < 25; ++s)
    CHECK(marginal[s] == double(recount[s]) / double(buf.marginal_total()));
}

TEST_CASE("buffer serialization round-trips counts and ordering exactly") {
  const NoisyGridworld world(5, 5);
  RngStream pol_rng(31);
  const StochasticPolicy pi = dirichlet_policy(world.mdp(), 1.0, pol_rng);
  RngStream rng(37);
  const ReplayBuffer buf = collect_buffer(world.mdp(), pi, 7, 13, rng);

  std::stringstream stream;
  buf.serialize(stream);
  const ReplayBuffer loaded = ReplayBuffer::deserialize(stream, 25);

  REQUIRE(loaded.transitions().size() == buf.transitions().size());
  for (std::size_t i = 0; i < buf.transitions().size(); ++i) {
    const Transition& a = buf.transitions()[i];
    const Transition& b = loaded.transitions()[i];
    CHECK(a.state == b.state);
    CHECK(a.action == b.action);
    CHECK(a.next_state == b.next_state);
    CHECK(a.trajectory_id == b.trajectory_id);
    CHECK(a.time_index == b.time_index);
  }
  CHECK(loaded.state_marginal_counts() == buf.state_marginal_counts());

  // Round-trip again: bytes must be identical.
  std::stringstream second;
  loaded.serialize(second);
  std::stringstream first;
  buf.serialize(first);
  CHECK(first.str() == second.str());
}

TEST_CASE("identical seeds produce bit-identical trajectories") {
  const NoisyGridworld world(5, 5);
  RngStream pol_rng(41);
  const StochasticPolicy pi = dirichlet_policy(world.mdp(), 1.0, pol_rng);
  RngStream r1(99), r2(99);
  const Trajectory a = sample_trajectory(world.mdp(), pi, 50, r1);
  const Trajectory b = sample_trajectory(world.mdp(), pi, 50, r2);
  CHECK(a.states == b.states);
  CHECK(a.actions == b.actions);
}

TEST_CASE("dimension mismatch is a configuration error") {
  const TabularMDP mdp = make_example1(3);
  StochasticPolicy wrong;
  wrong.probs.assign(2, {1.0});
  RngStream rng(1);
  CHECK_THROWS_AS(sample_trajectory(mdp, wrong, 5, rng), ConfigError);
}

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "clearn/analytic.hpp"
#include "clearn/mdp.hpp"
#include "clearn/net.hpp"
#include "clearn/replay.hpp"
#include "clearn/rng.hpp"
#include "clearn/tabular.hpp"

namespace clearn {

struct LearnerConfig {
  double gamma = 0.9;
  double relabel_ratio = 0.5;   // lambda, Q-learning only
  double mix_ratio = 0.5;       // lambda_mix, mixed C-learning only
  double w_clip = 0.0;          // <= 0 means the 1/(1-gamma) default heuristic
  std::size_t batch_size = 256; // rows per gradient step
  std::size_t steps = 1000;
  double learning_rate = 3e-3;
  // Target evaluation: 1.0 reads the current net (stop-gradient); smaller
  // values maintain a Polyak-averaged copy updated each step.
  double target_tau = 1.0;
  // Importance weights averaged exactly over pi(a'|s') instead of using a
  // single sampled next action (tabular policies make this cheap).
  bool td_exact_expectation = false;

  double effective_w_clip() const {
    if (w_clip > 0.0) return w_clip;
    return gamma < 1.0 ? 1.0 / (1.0 - gamma) : std::numeric_limits<double>::infinity();
  }
};

// Maps tabular ids to classifier inputs: per-state coordinate embedding plus
// a one-hot action block, [state coords | action one-hot | goal coords].
struct StateEmbedding {
  std::vector<std::vector<double>> coords;  // per state
  std::size_t num_actions = 0;

  std::size_t obs_dim() const { return coords.empty() ? 0 : coords[0].size(); }
  std::size_t input_width() const { return 2 * obs_dim() + num_actions; }
  void encode_row(std::size_t s, std::size_t a, std::size_t g,
                  Eigen::MatrixXd& dst, Eigen::Index row) const;
};

// A classifier/Q network together with its input encoding, optimizer state
// and (optionally Polyak-averaged) target copy.
struct NetModel {
  StateEmbedding embedding;
  DenseNet net;
  DenseNet target;
  AdamState adam;

  static NetModel create(StateEmbedding embedding, std::size_t hidden_dim,
                         double learning_rate, RngStream& rng);

  // Batched prediction over explicit (s, a, g) triples.
  Eigen::VectorXd predict(const std::vector<std::size_t>& s,
                          const std::vector<std::size_t>& a,
                          const std::vector<std::size_t>& g, bool use_target) const;

  // Dense evaluation over the whole (state, action, goal) lattice.
  Tensor3 evaluate_all() const;
};

// Exactly one backend: a net with its encoder, or an exact ratio table.
struct ClassifierModel {
  std::optional<NetModel> net;
  std::optional<RatioTable> table;

  static ClassifierModel from_net(NetModel m);
  static ClassifierModel from_table(RatioTable t);

  // Classifier odds C/(1-C) over the full lattice.
  Tensor3 odds() const;
  std::size_t num_states() const;
  std::size_t num_actions() const;
};

// Eq. 2: f(g | s, a) = odds(s, a, g) * marginal(g), unnormalized.
DiscountedDensity density_from_classifier(const ClassifierModel& model,
                                          const std::vector<double>& marginal);

// Per-(s, a) sums of the unnormalized Eq. 2 density.
std::vector<std::vector<double>> normalization_mass(const ClassifierModel& model,
                                                    const std::vector<double>& marginal);

// Raw network outputs read as a (scaled) probability table: the density
// estimate attributed to a hindsight-relabeled Q-network.
DiscountedDensity q_value_density(const NetModel& model);

// One gradient step each; all return the batch loss.
double mc_c_step(NetModel& model, const ReplayBuffer& buffer, const LearnerConfig& config,
                 RngStream& rng);
double td_c_step(NetModel& model, const ReplayBuffer& buffer,
                 const StochasticPolicy& policy, const LearnerConfig& config,
                 RngStream& rng);
double td_c_step_gc(NetModel& model, const ReplayBuffer& buffer,
                    const GoalConditionedPolicy& policy, const LearnerConfig& config,
                    RngStream& rng);
double mixed_c_step(NetModel& model, const ReplayBuffer& buffer,
                    const StochasticPolicy& policy, const LearnerConfig& config,
                    RngStream& rng);
double q_hindsight_step(NetModel& model, const ReplayBuffer& buffer,
                        const StochasticPolicy& policy, const LearnerConfig& config,
                        RngStream& rng);

// Greedy improvement: argmax_a C(F=1 | s, a, g) per (state, goal) in the
// given index sets, lowest index among near-ties.
GoalConditionedPolicy gc_policy_improvement_step(const GoalConditionedPolicy& policy,
                                                 const ClassifierModel& model,
                                                 const std::vector<std::size_t>& states,
                                                 const std::vector<std::size_t>& goals);

}  // namespace clearn

#include "clearn/learners.hpp"

#include <algorithm>
#include <cmath>

#include "clearn/errors.hpp"

namespace clearn {
namespace {

double to_odds(double c) {
  const double clamped = std::clamp(c, 1e-7, 1.0 - 1e-7);
  return clamped / (1.0 - clamped);
}

struct Batch {
  std::vector<const Transition*> rows;
};

std::vector<const Transition*> draw_transitions(const ReplayBuffer& buffer,
                                                std::size_t n, RngStream& rng) {
  if (buffer.transitions().empty())
    throw SamplingError("learner step: buffer has no transitions");
  std::vector<const Transition*> rows(n);
  for (auto& r : rows) r = &buffer.sample_transition(rng);
  return rows;
}

std::size_t sample_next_action(const StochasticPolicy& policy, std::size_t next_state,
                               RngStream& rng) {
  return sample_categorical(policy.probs[next_state], rng);
}

double apply(NetModel& model, const LabeledBatch& batch, const LearnerConfig& config) {
  Gradients grads = Gradients::zeros_like(model.net);
  const double loss = weighted_ce_gradient(model.net, batch, grads);
  adam_step(model.net, grads, model.adam);
  if (config.target_tau < 1.0)
    polyak_update(model.target, model.net, config.target_tau);
  return loss;
}

}  // namespace

void StateEmbedding::encode_row(std::size_t s, std::size_t a, std::size_t g,
                                Eigen::MatrixXd& dst, Eigen::Index row) const {
  const std::size_t d = obs_dim();
  for (std::size_t i = 0; i < d; ++i) dst(row, i) = coords[s][i];
  for (std::size_t i = 0; i < num_actions; ++i) dst(row, d + i) = (i == a) ? 1.0 : 0.0;
  for (std::size_t i = 0; i < d; ++i) dst(row, d + num_actions + i) = coords[g][i];
}

NetModel NetModel::create(StateEmbedding embedding, std::size_t hidden_dim,
                          double learning_rate, RngStream& rng) {
  NetModel model;
  model.embedding = std::move(embedding);
  model.net = DenseNet::create({model.embedding.input_width(), hidden_dim, 1}, rng);
  model.target = model.net;
  model.adam = AdamState::create(model.net, learning_rate);
  return model;
}

Eigen::VectorXd NetModel::predict(const std::vector<std::size_t>& s,
                                  const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& g,
                                  bool use_target) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.size()), embedding.input_width());
  for (std::size_t i = 0; i < s.size(); ++i)
    embedding.encode_row(s[i], a[i], g[i], x, static_cast<Eigen::Index>(i));
  return (use_target ? target : net).forward(x);
}

Tensor3 NetModel::evaluate_all() const {
  const std::size_t ns = embedding.coords.size();
  const std::size_t na = embedding.num_actions;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ns * na * ns), embedding.input_width());
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ns; ++g) embedding.encode_row(s, a, g, x, row++);
  const Eigen::VectorXd out = net.forward(x);
  Tensor3 t(ns, na, ns);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = out(static_cast<Eigen::Index>(i));
  return t;
}

ClassifierModel ClassifierModel::from_net(NetModel m) {
  ClassifierModel model;
  model.net = std::move(m);
  return model;
}

ClassifierModel ClassifierModel::from_table(RatioTable t) {
  ClassifierModel model;
  model.table = std::move(t);
  return model;
}

Tensor3 ClassifierModel::odds() const {
  if (net.has_value() == table.has_value())
    throw ConfigError("ClassifierModel: exactly one backend must be present");
  if (table) return table->ratio;
  Tensor3 c = net->evaluate_all();
  for (double& v : c.data()) v = to_odds(v);
  return c;
}

std::size_t ClassifierModel::num_states() const {
  return table ? table->ratio.dim0() : net->embedding.coords.size();
}

std::size_t ClassifierModel::num_actions() const {
  return table ? table->ratio.dim1() : net->embedding.num_actions;
}

DiscountedDensity density_from_classifier(const ClassifierModel& model,
                                          const std::vector<double>& marginal) {
  Tensor3 o = model.odds();
  if (o.dim2() != marginal.size())
    throw ConfigError("density_from_classifier: marginal size mismatch");
  DiscountedDensity d;
  d.table = Tensor3(o.dim0(), o.dim1(), o.dim2());
  for (std::size_t s = 0; s < o.dim0(); ++s)
    for (std::size_t a = 0; a < o.dim1(); ++a)
      for (std::size_t g = 0; g < o.dim2(); ++g)
        d.table(s, a, g) = o(s, a, g) * marginal[g];
  return d;
}

std::vector<std::vector<double>> normalization_mass(const ClassifierModel& model,
                                                    const std::vector<double>& marginal) {
  const DiscountedDensity d = density_from_classifier(model, marginal);
  std::vector<std::vector<double>> mass(d.table.dim0(),
                                        std::vector<double>(d.table.dim1(), 0.0));
  for (std::size_t s = 0; s < d.table.dim0(); ++s)
    for (std::size_t a = 0; a < d.table.dim1(); ++a)
      for (std::size_t g = 0; g < d.table.dim2(); ++g) mass[s][a] += d.table(s, a, g);
  return mass;
}

DiscountedDensity q_value_density(const NetModel& model) {
  DiscountedDensity d;
  d.table = model.evaluate_all();
  return d;
}

double mc_c_step(NetModel& model, const ReplayBuffer& buffer, const LearnerConfig& config,
                 RngStream& rng) {
  const std::size_t half = config.batch_size / 2;
  const auto rows = draw_transitions(buffer, half, rng);
  LabeledBatch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(2 * half), model.embedding.input_width());
  batch.labels.resize(static_cast<Eigen::Index>(2 * half));
  batch.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(2 * half));
  for (std::size_t i = 0; i < half; ++i) {
    const Transition& tr = *rows[i];
    const std::size_t future = buffer.sample_hindsight_future(
        tr.trajectory_id, tr.time_index, config.gamma, rng);
    const std::size_t random_state = buffer.sample_marginal_state(rng);
    model.embedding.encode_row(tr.state, tr.action, future, batch.inputs,
                               static_cast<Eigen::Index>(i));
    model.embedding.encode_row(tr.state, tr.action, random_state, batch.inputs,
                               static_cast<Eigen::Index>(half + i));
    batch.labels(static_cast<Eigen::Index>(i)) = 1.0;
    batch.labels(static_cast<Eigen::Index>(half + i)) = 0.0;
  }
  return apply(model, batch, config);
}

namespace {

// Shared TD/goal-conditioned body: the only difference is how the next
// action is drawn (or averaged over).
template <typename NextAction, typename ActionProbs>
double td_step_impl(NetModel& model, const ReplayBuffer& buffer,
                    const LearnerConfig& config, RngStream& rng,
                    NextAction&& next_action, ActionProbs&& action_probs) {
  const double gamma = config.gamma;
  const double clip = config.effective_w_clip();
  const std::size_t half = config.batch_size / 2;
  const auto rows = draw_transitions(buffer, half, rng);

  std::vector<std::size_t> ns(half), na(half), goals(half);
  for (std::size_t i = 0; i < half; ++i) {
    ns[i] = rows[i]->next_state;
    goals[i] = buffer.sample_marginal_state(rng);
    na[i] = next_action(ns[i], goals[i]);
  }
  const bool use_target = config.target_tau < 1.0;
  std::vector<double> w_bar(half);
  if (config.td_exact_expectation) {
    // E_{a'}[clip(odds)] computed over every action at once.
    const std::size_t n_act = model.embedding.num_actions;
    std::vector<std::size_t> ns_all(half * n_act), na_all(half * n_act),
        g_all(half * n_act);
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t a = 0; a < n_act; ++a) {
        ns_all[i * n_act + a] = ns[i];
        na_all[i * n_act + a] = a;
        g_all[i * n_act + a] = goals[i];
      }
    const Eigen::VectorXd c_all = model.predict(ns_all, na_all, g_all, use_target);
    for (std::size_t i = 0; i < half; ++i) {
      double acc = 0.0;
      for (std::size_t a = 0; a < n_act; ++a)
        acc += action_probs(ns[i], goals[i], a) *
               std::min(to_odds(c_all(static_cast<Eigen::Index>(i * n_act + a))), clip);
      w_bar[i] = acc;
    }
  } else {
    const Eigen::VectorXd c_next = model.predict(ns, na, goals, use_target);
    for (std::size_t i = 0; i < half; ++i)
      w_bar[i] = std::min(to_odds(c_next(static_cast<Eigen::Index>(i))), clip);
  }

  LabeledBatch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(2 * half), model.embedding.input_width());
  batch.labels.resize(static_cast<Eigen::Index>(2 * half));
  batch.weights.resize(static_cast<Eigen::Index>(2 * half));
  for (std::size_t i = 0; i < half; ++i) {
    const Transition& tr = *rows[i];
    // Importance weight w = odds at the next state-action, no gradient flow.
    const double w = w_bar[i];
    model.embedding.encode_row(tr.state, tr.action, tr.next_state, batch.inputs,
                               static_cast<Eigen::Index>(i));
    batch.labels(static_cast<Eigen::Index>(i)) = 1.0;
    batch.weights(static_cast<Eigen::Index>(i)) = 1.0 - gamma;
    model.embedding.encode_row(tr.state, tr.action, goals[i], batch.inputs,
                               static_cast<Eigen::Index>(half + i));
    batch.labels(static_cast<Eigen::Index>(half + i)) =
        gamma * w / (1.0 + gamma * w);
    batch.weights(static_cast<Eigen::Index>(half + i)) = 1.0 + gamma * w;
  }
  return apply(model, batch, config);
}

}  // namespace

double td_c_step(NetModel& model, const ReplayBuffer& buffer,
                 const StochasticPolicy& policy, const LearnerConfig& config,
                 RngStream& rng) {
  return td_step_impl(
      model, buffer, config, rng,
      [&](std::size_t next_state, std::size_t) {
        return sample_next_action(policy, next_state, rng);
      },
      [&](std::size_t next_state, std::size_t, std::size_t action) {
        return policy.probs[next_state][action];
      });
}

double td_c_step_gc(NetModel& model, const ReplayBuffer& buffer,
                    const GoalConditionedPolicy& policy, const LearnerConfig& config,
                    RngStream& rng) {
  return td_step_impl(
      model, buffer, config, rng,
      [&](std::size_t next_state, std::size_t goal) {
        return sample_categorical(policy.probs[next_state][goal], rng);
      },
      [&](std::size_t next_state, std::size_t goal, std::size_t action) {
        return policy.probs[next_state][goal][action];
      });
}

double mixed_c_step(NetModel& model, const ReplayBuffer& buffer,
                    const StochasticPolicy& policy, const LearnerConfig& config,
                    RngStream& rng) {
  const double gamma = config.gamma;
  const double lambda = config.mix_ratio;
  const double clip = config.effective_w_clip();
  const std::size_t half = config.batch_size / 2;
  // Fractions lambda/2 next states, (1-lambda)/2 empirical futures, 1/2 random.
  const std::size_t n_next =
      std::min(half, static_cast<std::size_t>(std::llround(lambda * half)));
  const std::size_t n_future = half - n_next;

  const auto rows = draw_transitions(buffer, half, rng);
  std::vector<std::size_t> ns(half), na(half), goals(half);
  for (std::size_t i = 0; i < half; ++i) {
    ns[i] = rows[i]->next_state;
    goals[i] = buffer.sample_marginal_state(rng);
    na[i] = sample_next_action(policy, ns[i], rng);
  }
  const bool use_target = config.target_tau < 1.0;
  const Eigen::VectorXd c_next = model.predict(ns, na, goals, use_target);

  LabeledBatch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(2 * half), model.embedding.input_width());
  batch.labels.resize(static_cast<Eigen::Index>(2 * half));
  batch.weights.resize(static_cast<Eigen::Index>(2 * half));
  for (std::size_t i = 0; i < half; ++i) {
    const Transition& tr = *rows[i];
    Eigen::Index r = static_cast<Eigen::Index>(i);
    if (i < n_next) {
      model.embedding.encode_row(tr.state, tr.action, tr.next_state, batch.inputs, r);
      batch.labels(r) = 1.0;
      batch.weights(r) = 1.0 - gamma;
    } else {
      const std::size_t future = buffer.sample_hindsight_future(
          tr.trajectory_id, tr.time_index, gamma, rng);
      model.embedding.encode_row(tr.state, tr.action, future, batch.inputs, r);
      batch.labels(r) = 1.0;
      batch.weights(r) = 1.0;
    }
    const double w = std::min(to_odds(c_next(static_cast<Eigen::Index>(i))), clip);
    const double lgw = lambda * gamma * w;
    r = static_cast<Eigen::Index>(half + i);
    model.embedding.encode_row(tr.state, tr.action, goals[i], batch.inputs, r);
    batch.labels(r) = lgw / (1.0 + lgw);
    batch.weights(r) = 1.0 + lgw;
  }
  (void)n_future;
  return apply(model, batch, config);
}

double q_hindsight_step(NetModel& model, const ReplayBuffer& buffer,
                        const StochasticPolicy& policy, const LearnerConfig& config,
                        RngStream& rng) {
  const double gamma = config.gamma;
  const double lambda = config.relabel_ratio;
  const std::size_t half = config.batch_size / 2;
  const auto rows = draw_transitions(buffer, half, rng);

  std::vector<std::size_t> ns(half), na(half), goals(half);
  for (std::size_t i = 0; i < half; ++i) {
    ns[i] = rows[i]->next_state;
    goals[i] = buffer.sample_marginal_state(rng);
    na[i] = sample_next_action(policy, ns[i], rng);
  }
  const bool use_target = config.target_tau < 1.0;
  const Eigen::VectorXd q_next = model.predict(ns, na, goals, use_target);

  LabeledBatch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(2 * half), model.embedding.input_width());
  batch.labels.resize(static_cast<Eigen::Index>(2 * half));
  batch.weights.resize(static_cast<Eigen::Index>(2 * half));
  for (std::size_t i = 0; i < half; ++i) {
    const Transition& tr = *rows[i];
    model.embedding.encode_row(tr.state, tr.action, tr.next_state, batch.inputs,
                               static_cast<Eigen::Index>(i));
    batch.labels(static_cast<Eigen::Index>(i)) = 1.0;
    batch.weights(static_cast<Eigen::Index>(i)) = 1.0 - lambda;
    model.embedding.encode_row(tr.state, tr.action, goals[i], batch.inputs,
                               static_cast<Eigen::Index>(half + i));
    // CE targets must be valid probabilities.
    batch.labels(static_cast<Eigen::Index>(half + i)) =
        std::clamp(gamma * q_next(static_cast<Eigen::Index>(i)), 0.0, 1.0);
    batch.weights(static_cast<Eigen::Index>(half + i)) = lambda;
  }
  return apply(model, batch, config);
}

GoalConditionedPolicy gc_policy_improvement_step(const GoalConditionedPolicy& policy,
                                                 const ClassifierModel& model,
                                                 const std::vector<std::size_t>& states,
                                                 const std::vector<std::size_t>& goals) {
  const Tensor3 o = model.odds();
  const std::size_t na = o.dim1();
  GoalConditionedPolicy out = policy;
  for (std::size_t s : states) {
    for (std::size_t g : goals) {
      double best = o(s, 0, g);
      for (std::size_t a = 1; a < na; ++a) best = std::max(best, o(s, a, g));
      const double cutoff = best - 1e-9 * std::max(1.0, std::abs(best));
      std::size_t pick = 0;
      for (std::size_t a = 0; a < na; ++a)
        if (o(s, a, g) >= cutoff) {
          pick = a;
          break;
        }
      for (std::size_t a = 0; a < na; ++a) out.probs[s][g][a] = (a == pick) ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace clearn

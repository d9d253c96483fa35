#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "clearn/rng.hpp"

namespace clearn {

// Small fully-connected net: rectifier hidden layers, logistic output head.
// Predictions are clamped to [1e-7, 1 - 1e-7] before any logarithm.
struct DenseNet {
  std::vector<std::size_t> layer_dims;     // input, hidden..., 1
  std::vector<Eigen::MatrixXd> weights;    // [out x in] per layer
  std::vector<Eigen::VectorXd> biases;

  // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded.
  static DenseNet create(const std::vector<std::size_t>& dims, RngStream& rng);

  // Batched forward pass; inputs is [batch x input_dim].
  Eigen::VectorXd forward(const Eigen::MatrixXd& inputs) const;

  // Flat binary checkpoint: u64 layer count, u64 dims, then row-major
  // weight matrices and bias vectors in declaration order (f64, little-endian).
  void save(std::ostream& out) const;
  static DenseNet load(std::istream& in);
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static Gradients zeros_like(const DenseNet& net);
};

struct LabeledBatch {
  Eigen::MatrixXd inputs;   // [batch x input_dim]
  Eigen::VectorXd labels;   // soft labels in [0, 1]
  Eigen::VectorXd weights;  // non-negative

  void validate() const;
};

// loss = mean_i w_i * [-y_i log c_i - (1 - y_i) log(1 - c_i)]
double weighted_ce_gradient(const DenseNet& net, const LabeledBatch& batch,
                            Gradients& grads);

// loss = mean_i w_i * (c_i - y_i)^2
double weighted_mse_gradient(const DenseNet& net, const LabeledBatch& batch,
                             Gradients& grads);

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  long step_count = 0;
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState create(const DenseNet& net, double learning_rate);
};

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state);

// Polyak target <- (1 - tau) target + tau net.
void polyak_update(DenseNet& target, const DenseNet& net, double tau);

// [state coords | one-hot action | goal coords]
std::vector<double> encode_input(const std::vector<double>& state_obs,
                                 std::size_t action,
                                 const std::vector<double>& goal_obs,
                                 std::size_t num_actions);

}  // namespace clearn

#include "clearn/net.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

#include "clearn/errors.hpp"

namespace clearn {
namespace {

constexpr double kClampLo = 1e-7;
constexpr double kClampHi = 1.0 - 1e-7;

double clamp01(double c) { return c < kClampLo ? kClampLo : (c > kClampHi ? kClampHi : c); }

// Shared forward pass keeping per-layer activations for backprop.
void forward_cached(const DenseNet& net, const Eigen::MatrixXd& inputs,
                    std::vector<Eigen::MatrixXd>& acts) {
  if (static_cast<std::size_t>(inputs.cols()) != net.layer_dims.front())
    throw ConfigError("forward: input width does not match layer_dims[0]");
  acts.clear();
  acts.reserve(net.weights.size() + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Eigen::MatrixXd z =
        (acts.back() * net.weights[l].transpose()).rowwise() + net.biases[l].transpose();
    if (l + 1 < net.weights.size()) {
      acts.push_back(z.cwiseMax(0.0));
    } else {
      acts.push_back((1.0 + (-z.array()).exp()).inverse().matrix());
    }
  }
}

// Backprop from d loss / d z_last through the rectifier stack.
void backprop(const DenseNet& net, const std::vector<Eigen::MatrixXd>& acts,
              Eigen::MatrixXd dz, Gradients& grads) {
  for (std::size_t li = net.weights.size(); li-- > 0;) {
    grads.weights[li] = dz.transpose() * acts[li];
    grads.biases[li] = dz.colwise().sum().transpose();
    if (li > 0) {
      dz = (dz * net.weights[li]).cwiseProduct(
          (acts[li].array() > 0.0).cast<double>().matrix());
    }
  }
}

}  // namespace

DenseNet DenseNet::create(const std::vector<std::size_t>& dims, RngStream& rng) {
  if (dims.size() < 2 || dims.back() != 1)
    throw ConfigError("DenseNet: layer_dims must end in a single output");
  DenseNet net;
  net.layer_dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double lim = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        w(i, j) = (2.0 * rng.uniform01() - 1.0) * lim;
    Eigen::VectorXd b(dims[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b(i) = (2.0 * rng.uniform01() - 1.0) * lim;
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

Eigen::VectorXd DenseNet::forward(const Eigen::MatrixXd& inputs) const {
  std::vector<Eigen::MatrixXd> acts;
  forward_cached(*this, inputs, acts);
  Eigen::VectorXd out = acts.back().col(0);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = clamp01(out(i));
  return out;
}

void DenseNet::save(std::ostream& out) const {
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  auto put_f64 = [&](double v) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, 8);
    put_u64(bits);
  };
  put_u64(layer_dims.size());
  for (std::size_t d : layer_dims) put_u64(d);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) put_f64(weights[l](i, j));
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) put_f64(biases[l](i));
  }
}

DenseNet DenseNet::load(std::istream& in) {
  auto get_u64 = [&]() {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw ConfigError("DenseNet::load: truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  auto get_f64 = [&]() {
    const std::uint64_t bits = get_u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  };
  DenseNet net;
  const std::uint64_t ndims = get_u64();
  net.layer_dims.resize(ndims);
  for (auto& d : net.layer_dims) d = get_u64();
  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    Eigen::MatrixXd w(net.layer_dims[l + 1], net.layer_dims[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = get_f64();
    Eigen::VectorXd b(net.layer_dims[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = get_f64();
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

void LabeledBatch::validate() const {
  if (inputs.rows() != labels.size() || inputs.rows() != weights.size())
    throw ConfigError("LabeledBatch: inconsistent lengths");
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels(i) < 0.0 || labels(i) > 1.0)
      throw ConfigError("LabeledBatch: label outside [0, 1]");
    if (weights(i) < 0.0) throw ConfigError("LabeledBatch: negative weight");
  }
}

double weighted_ce_gradient(const DenseNet& net, const LabeledBatch& batch,
                            Gradients& grads) {
  batch.validate();
  std::vector<Eigen::MatrixXd> acts;
  forward_cached(net, batch.inputs, acts);
  const Eigen::Index n = batch.inputs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  Eigen::MatrixXd dz(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = clamp01(acts.back()(i, 0));
    const double y = batch.labels(i);
    const double w = batch.weights(i);
    loss += w * (-(y * std::log(c) + (1.0 - y) * std::log(1.0 - c)));
    // d loss / d z for the logistic head is w (c - y).
    dz(i, 0) = w * (c - y) * inv_n;
  }
  backprop(net, acts, std::move(dz), grads);
  return loss * inv_n;
}

double weighted_mse_gradient(const DenseNet& net, const LabeledBatch& batch,
                             Gradients& grads) {
  batch.validate();
  std::vector<Eigen::MatrixXd> acts;
  forward_cached(net, batch.inputs, acts);
  const Eigen::Index n = batch.inputs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  Eigen::MatrixXd dz(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = acts.back()(i, 0);
    const double y = batch.labels(i);
    const double w = batch.weights(i);
    const double err = c - y;
    loss += w * err * err;
    dz(i, 0) = w * 2.0 * err * c * (1.0 - c) * inv_n;
  }
  backprop(net, acts, std::move(dz), grads);
  return loss * inv_n;
}

AdamState AdamState::create(const DenseNet& net, double learning_rate) {
  AdamState st;
  st.learning_rate = learning_rate;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    st.m_weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    st.v_weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    st.m_biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    st.v_biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return st;
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state) {
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    update(net.weights[l], state.m_weights[l], state.v_weights[l], grads.weights[l]);
    update(net.biases[l], state.m_biases[l], state.v_biases[l], grads.biases[l]);
  }
}

void polyak_update(DenseNet& target, const DenseNet& net, double tau) {
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    target.weights[l] = (1.0 - tau) * target.weights[l] + tau * net.weights[l];
    target.biases[l] = (1.0 - tau) * target.biases[l] + tau * net.biases[l];
  }
}

std::vector<double> encode_input(const std::vector<double>& state_obs,
                                 std::size_t action,
                                 const std::vector<double>& goal_obs,
                                 std::size_t num_actions) {
  if (action >= num_actions) throw ConfigError("encode_input: action out of range");
  std::vector<double> x;
  x.reserve(state_obs.size() + num_actions + goal_obs.size());
  x.insert(x.end(), state_obs.begin(), state_obs.end());
  for (std::size_t a = 0; a < num_actions; ++a) x.push_back(a == action ? 1.0 : 0.0);
  x.insert(x.end(), goal_obs.begin(), goal_obs.end());
  return x;
}

}  // namespace clearn

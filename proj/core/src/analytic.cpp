#include "clearn/analytic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "clearn/errors.hpp"

namespace clearn {
namespace {

constexpr double kKlFloor = 1e-12;
constexpr double kFixedPointTol = 1e-12;
constexpr long kMaxFixedPointIters = 1000000;
constexpr double kDamping = 0.5;

}  // namespace

void DiscountedDensity::validate(double tol) const {
  for (std::size_t s = 0; s < table.dim0(); ++s) {
    for (std::size_t a = 0; a < table.dim1(); ++a) {
      double sum = 0.0;
      for (std::size_t g = 0; g < table.dim2(); ++g) {
        const double v = table(s, a, g);
        if (v < 0.0) throw NumericalError("DiscountedDensity: negative mass", -v);
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol)
        throw NumericalError("DiscountedDensity: slice does not sum to 1",
                             std::abs(sum - 1.0));
    }
  }
}

void DiscountedDensity::serialize(std::ostream& out) const {
  out << "state,action,goal,prob\n";
  char buf[64];
  for (std::size_t s = 0; s < table.dim0(); ++s)
    for (std::size_t a = 0; a < table.dim1(); ++a)
      for (std::size_t g = 0; g < table.dim2(); ++g) {
        std::snprintf(buf, sizeof buf, "%.17g", table(s, a, g));
        out << s << ',' << a << ',' << g << ',' << buf << '\n';
      }
}

DiscountedDensity DiscountedDensity::deserialize(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "state,action,goal,prob")
    throw ConfigError("DiscountedDensity::deserialize: missing header");
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, double>> rows;
  std::size_t smax = 0, amax = 0, gmax = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t s, a, g;
    double p;
    char c;
    if (!(row >> s >> c >> a >> c >> g >> c >> p))
      throw ConfigError("DiscountedDensity::deserialize: malformed row: " + line);
    rows.emplace_back(s, a, g, p);
    smax = std::max(smax, s);
    amax = std::max(amax, a);
    gmax = std::max(gmax, g);
  }
  DiscountedDensity d;
  d.table = Tensor3(smax + 1, amax + 1, gmax + 1);
  for (const auto& [s, a, g, p] : rows) d.table(s, a, g) = p;
  return d;
}

OccupancyMatrices occupancy_matrices(const TabularMDP& mdp,
                                     const StochasticPolicy& policy) {
  if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
    throw ConfigError("occupancy_matrices: dimension mismatch");
  const std::size_t n = mdp.num_states;
  OccupancyMatrices occ;
  occ.one_step = mdp.transition;
  occ.policy_averaged.assign(n * n, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      const double pa = policy.probs[s][a];
      if (pa == 0.0) continue;
      for (std::size_t g = 0; g < n; ++g)
        occ.policy_averaged[s * n + g] += pa * mdp.transition(s, a, g);
    }
  return occ;
}

DiscountedDensity analytic_density(const TabularMDP& mdp, const StochasticPolicy& policy,
                                   double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw ConfigError("analytic_density: gamma must be in [0, 1)");
  const std::size_t n = mdp.num_states;
  const OccupancyMatrices occ = occupancy_matrices(mdp, policy);

  // Rows of P are (1 - gamma) * T0[s,a,:] * (I - gamma T)^{-1}; solving the
  // transposed system per (s, a) row avoids forming the inverse.
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      m(i, j) -= gamma * occ.policy_averaged[i * n + j];
  const Eigen::MatrixXd mt = m.transpose();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(mt);

  DiscountedDensity density;
  density.table = Tensor3(n, mdp.num_actions, n);
  Eigen::VectorXd r(n), x(n);
  double worst_residual = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      for (std::size_t g = 0; g < n; ++g) r(g) = mdp.transition(s, a, g);
      x = lu.solve(r);
      worst_residual = std::max(worst_residual, (mt * x - r).lpNorm<Eigen::Infinity>());
      for (std::size_t g = 0; g < n; ++g)
        density.table(s, a, g) = (1.0 - gamma) * x(g);
    }
  }
  if (worst_residual > 1e-8)
    throw NumericalError("analytic_density: linear solve residual too large",
                         worst_residual);
  return density;
}

std::vector<std::vector<double>> state_density(const DiscountedDensity& density,
                                               const StochasticPolicy& policy) {
  const std::size_t n = density.table.dim0();
  const std::size_t na = density.table.dim1();
  const std::size_t ng = density.table.dim2();
  std::vector<std::vector<double>> out(n, std::vector<double>(ng, 0.0));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < na; ++a) {
      const double pa = policy.probs[s][a];
      for (std::size_t g = 0; g < ng; ++g) out[s][g] += pa * density.table(s, a, g);
    }
  return out;
}

double forward_kl(const DiscountedDensity& truth, const DiscountedDensity& estimate) {
  if (!truth.table.same_shape(estimate.table))
    throw ConfigError("forward_kl: dimension mismatch");
  const std::size_t ns = truth.table.dim0();
  const std::size_t na = truth.table.dim1();
  const std::size_t ng = truth.table.dim2();
  double total = 0.0;
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double z = 0.0;
      for (std::size_t g = 0; g < ng; ++g) z += estimate.table(s, a, g);
      if (z <= 0.0) z = 1.0;
      double kl = 0.0;
      for (std::size_t g = 0; g < ng; ++g) {
        const double p = truth.table(s, a, g);
        if (p <= 0.0) continue;
        const double q = std::max(estimate.table(s, a, g) / z, kKlFloor);
        kl += p * (std::log(p) - std::log(q));
      }
      total += kl;
    }
  }
  return total / static_cast<double>(ns * na);
}

namespace {

// Damped iteration x <- (1 - d) x + d f(x) until |f(x) - x| < tol.
template <typename F>
double damped_fixed_point(double x0, F&& f, long& iters, double& residual) {
  double x = x0;
  for (long k = 0; k < kMaxFixedPointIters; ++k) {
    const double fx = f(x);
    residual = std::abs(fx - x);
    x = (1.0 - kDamping) * x + kDamping * fx;
    if (residual < kFixedPointTol) {
      iters = k + 1;
      return x;
    }
  }
  throw NumericalError("fixed point iteration did not converge", residual);
}

}  // namespace

FixedPointReport example1_fixed_point(std::size_t n, double gamma, double lambda) {
  if (n < 1) throw ConfigError("example1_fixed_point: n must be >= 1");
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
    throw ConfigError("example1_fixed_point: gamma, lambda must be in [0, 1]");
  const double w_pos = 1.0 - lambda;           // next-state relabel, target 1
  const double w_rel = lambda / static_cast<double>(n);  // random goal, target gamma*Q
  FixedPointReport report;
  long it1 = 0, it2 = 0;
  double r1 = 0.0, r2 = 0.0;

  const double q_norm = damped_fixed_point(
      0.0,
      [&](double q) {
        const double den = w_pos + w_rel;
        return den > 0.0 ? (w_pos + w_rel * gamma * q) / den : q;
      },
      it1, r1);
  const double q_unnorm = damped_fixed_point(
      0.0, [&](double q) { return w_pos + w_rel * gamma * q; }, it2, r2);

  report.values["q_normalized"] = q_norm;
  report.values["q_unnormalized"] = q_unnorm;
  // Printed in the paper as (1 - gamma) / (1 - lambda gamma / n); its own case
  // equation instead yields the values above (see unnormalized closed form).
  report.values["paper_closed_form"] =
      (1.0 - gamma) / (1.0 - lambda * gamma / static_cast<double>(n));
  report.values["true_density_self"] = 1.0;
  report.iterations = std::max(it1, it2);
  report.residual = std::max(r1, r2);
  return report;
}

FixedPointReport example2_fixed_points(double gamma, double lambda) {
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
    throw ConfigError("example2_fixed_points: gamma, lambda must be in [0, 1]");
  // Case weights, conditioned on the (state, goal) pair being updated:
  //   Q11: (1-l) -> 1, l/2 -> g Q11, l/2 -> g Q21      (weights sum to 1)
  //   Q12: (1-l) -> 1, l/2 -> g Q12, l/2 -> g Q22      (weights sum to 1)
  //   Q21: l/2 -> g Q21                                 (single case)
  //   Q22: (1-l) -> 1, l/2 -> g Q22                     (normalized)
  std::array<double, 4> q{0.0, 0.0, 0.0, 0.0};  // q11, q12, q21, q22
  double residual = 0.0;
  long iterations = 0;
  for (long k = 0; k < kMaxFixedPointIters; ++k) {
    std::array<double, 4> t;
    t[0] = (1.0 - lambda) + 0.5 * lambda * gamma * q[0] + 0.5 * lambda * gamma * q[2];
    t[1] = (1.0 - lambda) + 0.5 * lambda * gamma * q[1] + 0.5 * lambda * gamma * q[3];
    t[2] = lambda > 0.0 ? gamma * q[2] : q[2];
    const double den22 = (1.0 - lambda) + 0.5 * lambda;
    t[3] = den22 > 0.0
               ? ((1.0 - lambda) + 0.5 * lambda * gamma * q[3]) / den22
               : q[3];
    residual = 0.0;
    for (int i = 0; i < 4; ++i) {
      residual = std::max(residual, std::abs(t[i] - q[i]));
      q[i] = (1.0 - kDamping) * q[i] + kDamping * t[i];
    }
    if (residual < kFixedPointTol) {
      iterations = k + 1;
      break;
    }
    if (k + 1 == kMaxFixedPointIters)
      throw NumericalError("example2_fixed_points did not converge", residual);
  }

  FixedPointReport report;
  report.values["q11"] = q[0];
  report.values["q12"] = q[1];
  report.values["q21"] = q[2];
  report.values["q22"] = q[3];
  report.values["normalized_prediction"] = q[0] / (q[0] + q[1]);
  // The paper's printed density counts the current state at offset zero; the
  // strict-future convention used throughout this library gives the second.
  report.values["true_density_paper"] = (2.0 - 2.0 * gamma) / (2.0 - gamma);
  report.values["true_density_strict"] = (1.0 - gamma) / (2.0 - gamma);
  report.iterations = iterations;
  report.residual = residual;
  return report;
}

std::vector<double> density_to_expected_goal(
    const std::vector<double>& density_slice,
    const std::vector<std::vector<double>>& goal_embedding) {
  if (density_slice.size() != goal_embedding.size())
    throw ConfigError("density_to_expected_goal: dimension mismatch");
  if (goal_embedding.empty()) return {};
  std::vector<double> out(goal_embedding[0].size(), 0.0);
  for (std::size_t g = 0; g < density_slice.size(); ++g)
    for (std::size_t d = 0; d < out.size(); ++d)
      out[d] += density_slice[g] * goal_embedding[g][d];
  return out;
}

}  // namespace clearn

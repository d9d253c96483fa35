#include "clearn/tabular.hpp"

#include <algorithm>
#include <cmath>

#include "clearn/errors.hpp"

namespace clearn {
namespace {

constexpr double kTieTol = 1e-9;

void check_marginal(const std::vector<double>& marginal) {
  for (double m : marginal)
    if (m <= 0.0)
      throw ConfigError("tabular operator: marginal must be strictly positive");
}

// E_{a'}[ratio(s', a', g)] for every (s', g).
std::vector<double> policy_averaged_ratio(const StochasticPolicy& policy,
                                          const RatioTable& ratio) {
  const std::size_t ns = ratio.ratio.dim0();
  const std::size_t na = ratio.ratio.dim1();
  const std::size_t ng = ratio.ratio.dim2();
  std::vector<double> v(ns * ng, 0.0);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a) {
      const double pa = policy.probs[s][a];
      if (pa == 0.0) continue;
      for (std::size_t g = 0; g < ng; ++g) v[s * ng + g] += pa * ratio.ratio(s, a, g);
    }
  return v;
}

// E_{s'|s,a}[v(s', g)] given the per-(s', g) table v.
double bootstrap(const TabularMDP& mdp, const std::vector<double>& v, std::size_t s,
                 std::size_t a, std::size_t g, std::size_t ng) {
  double acc = 0.0;
  const std::size_t ns = mdp.num_states;
  const double* row = &mdp.transition.data()[(s * mdp.num_actions + a) * ns];
  for (std::size_t sp = 0; sp < ns; ++sp) {
    if (row[sp] == 0.0) continue;
    acc += row[sp] * v[sp * ng + g];
  }
  return acc;
}

}  // namespace

void RatioTable::validate() const {
  for (double v : ratio.data())
    if (!(v >= 0.0) || !std::isfinite(v))
      throw NumericalError("RatioTable: entry not finite and non-negative", v);
}

RatioTable assignment_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                            const std::vector<double>& marginal, const RatioTable& ratio,
                            double gamma) {
  check_marginal(marginal);
  const std::size_t ns = mdp.num_states, na = mdp.num_actions, ng = marginal.size();
  const std::vector<double> v = policy_averaged_ratio(policy, ratio);
  RatioTable out;
  out.ratio = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g)
        out.ratio(s, a, g) = (1.0 - gamma) * mdp.transition(s, a, g) / marginal[g] +
                             gamma * bootstrap(mdp, v, s, a, g, ng);
  return out;
}

RatioTable expected_td_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                             const std::vector<double>& marginal, const RatioTable& ratio,
                             double gamma) {
  check_marginal(marginal);
  const std::size_t ns = mdp.num_states, na = mdp.num_actions, ng = marginal.size();
  const std::vector<double> v = policy_averaged_ratio(policy, ratio);
  RatioTable out;
  out.ratio = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g) {
        // Appearance weights of the triplet (s, a, g) in the TD batch:
        // positives (1-gamma) p(g|s,a) with label 1, marginal draws with the
        // combined soft label (gamma w)/(1 + gamma w) carrying weight 1+gamma w.
        const double w_bar = bootstrap(mdp, v, s, a, g, ng);
        const double pos = (1.0 - gamma) * mdp.transition(s, a, g);
        const double num = pos + marginal[g] * gamma * w_bar;
        const double den = pos + marginal[g] * (1.0 + gamma * w_bar);
        const double expected_label = num / den;
        out.ratio(s, a, g) = expected_label / (1.0 - expected_label);
      }
  return out;
}

RatioTable expected_td_sweep_mse(const TabularMDP& mdp, const StochasticPolicy& policy,
                                 const std::vector<double>& marginal,
                                 const RatioTable& ratio, double gamma) {
  check_marginal(marginal);
  const std::size_t ns = mdp.num_states, na = mdp.num_actions, ng = marginal.size();
  const std::vector<double> v = policy_averaged_ratio(policy, ratio);
  RatioTable out;
  out.ratio = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g) {
        // Expected loss a c^2 - 2 b c + const; the quadratic coefficients come
        // from the same batch composition as the CE route.
        const double w_bar = bootstrap(mdp, v, s, a, g, ng);
        const double pos = (1.0 - gamma) * mdp.transition(s, a, g);
        const double a_coef = pos + marginal[g] * (1.0 + gamma * w_bar);
        const double b_coef = pos + marginal[g] * gamma * w_bar;
        const double c_star = b_coef / a_coef;
        out.ratio(s, a, g) = c_star / (1.0 - c_star);
      }
  return out;
}

RatioTable expected_mc_assignment(const DiscountedDensity& p_plus,
                                  const std::vector<double>& marginal) {
  check_marginal(marginal);
  const std::size_t ns = p_plus.table.dim0(), na = p_plus.table.dim1(),
                    ng = p_plus.table.dim2();
  RatioTable out;
  out.ratio = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g)
        out.ratio(s, a, g) = p_plus.table(s, a, g) / marginal[g];
  return out;
}

RatioTable expected_mixed_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                                const std::vector<double>& marginal,
                                const DiscountedDensity& p_plus, const RatioTable& ratio,
                                double gamma, double lambda_mix) {
  check_marginal(marginal);
  if (lambda_mix < 0.0 || lambda_mix > 1.0)
    throw ConfigError("expected_mixed_sweep: lambda_mix must be in [0, 1]");
  const std::size_t ns = mdp.num_states, na = mdp.num_actions, ng = marginal.size();
  const std::vector<double> v = policy_averaged_ratio(policy, ratio);
  RatioTable out;
  out.ratio = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g) {
        // Batch fractions lambda/2 next states, (1-lambda)/2 empirical
        // futures, 1/2 random states with label l g w/(1 + l g w).
        const double w_bar = bootstrap(mdp, v, s, a, g, ng);
        const double next_term = lambda_mix * (1.0 - gamma) * mdp.transition(s, a, g);
        const double future_term = (1.0 - lambda_mix) * p_plus.table(s, a, g);
        const double num =
            next_term + future_term + marginal[g] * lambda_mix * gamma * w_bar;
        const double den = next_term + future_term +
                           marginal[g] * (1.0 + lambda_mix * gamma * w_bar);
        const double expected_label = num / den;
        out.ratio(s, a, g) = expected_label / (1.0 - expected_label);
      }
  return out;
}

RatioTable assignment_sweep_gc(const TabularMDP& mdp, const GoalConditionedPolicy& policy,
                               const std::vector<double>& marginal,
                               const RatioTable& ratio, double gamma) {
  check_marginal(marginal);
  const std::size_t ns = mdp.num_states, na = mdp.num_actions, ng = marginal.size();
  // v[s'][g] = E_{a' ~ pi(.|s',g)}[ratio(s', a', g)]
  std::vector<double> v(ns * ng, 0.0);
  for (std::size_t sp = 0; sp < ns; ++sp)
    for (std::size_t g = 0; g < ng; ++g) {
      double acc = 0.0;
      for (std::size_t ap = 0; ap < na; ++ap)
        acc += policy.probs[sp][g][ap] * ratio.ratio(sp, ap, g);
      v[sp * ng + g] = acc;
    }
  RatioTable out;
  out.ratio = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g)
        out.ratio(s, a, g) = (1.0 - gamma) * mdp.transition(s, a, g) / marginal[g] +
                             gamma * bootstrap(mdp, v, s, a, g, ng);
  return out;
}

namespace {

template <typename Sweep>
ValueIterationResult iterate_to_convergence(const TabularMDP& mdp,
                                            const std::vector<double>& marginal,
                                            double gamma, double tol, long max_sweeps,
                                            Sweep&& sweep) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw ConfigError("value iteration: gamma must be in [0, 1)");
  ValueIterationResult result;
  result.table.ratio =
      Tensor3(mdp.num_states, mdp.num_actions, marginal.size(), 1.0);
  for (long k = 0; k < max_sweeps; ++k) {
    RatioTable next = sweep(result.table);
    const double change = max_abs_diff(next.ratio, result.table.ratio);
    result.table = std::move(next);
    result.sweep_changes.push_back(change);
    result.final_change = change;
    result.sweeps = k + 1;
    if (change < tol) return result;
  }
  throw NumericalError("tabular value iteration did not converge",
                       result.final_change);
}

}  // namespace

ValueIterationResult tabular_c_value_iteration(const TabularMDP& mdp,
                                               const StochasticPolicy& policy,
                                               const std::vector<double>& marginal,
                                               double gamma, double tol,
                                               long max_sweeps) {
  return iterate_to_convergence(mdp, marginal, gamma, tol, max_sweeps,
                                [&](const RatioTable& r) {
                                  return assignment_sweep(mdp, policy, marginal, r, gamma);
                                });
}

ValueIterationResult tabular_c_value_iteration_gc(const TabularMDP& mdp,
                                                  const GoalConditionedPolicy& policy,
                                                  const std::vector<double>& marginal,
                                                  double gamma, double tol,
                                                  long max_sweeps) {
  return iterate_to_convergence(
      mdp, marginal, gamma, tol, max_sweeps, [&](const RatioTable& r) {
        return assignment_sweep_gc(mdp, policy, marginal, r, gamma);
      });
}

OptimalityResult tabular_c_optimality_iteration(const TabularMDP& mdp,
                                                const std::vector<double>& marginal,
                                                double gamma, double tol,
                                                long max_sweeps) {
  check_marginal(marginal);
  if (gamma < 0.0 || gamma >= 1.0)
    throw ConfigError("optimality iteration: gamma must be in [0, 1)");
  const std::size_t ns = mdp.num_states, na = mdp.num_actions, ng = marginal.size();
  OptimalityResult result;
  result.table.ratio = Tensor3(ns, na, ng, 1.0);
  for (long k = 0; k < max_sweeps; ++k) {
    // v[s'][g] = max_{a'} ratio(s', a', g)
    std::vector<double> v(ns * ng, 0.0);
    for (std::size_t sp = 0; sp < ns; ++sp)
      for (std::size_t g = 0; g < ng; ++g) {
        double best = result.table.ratio(sp, 0, g);
        for (std::size_t ap = 1; ap < na; ++ap)
          best = std::max(best, result.table.ratio(sp, ap, g));
        v[sp * ng + g] = best;
      }
    RatioTable next;
    next.ratio = Tensor3(ns, na, ng);
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t a = 0; a < na; ++a)
        for (std::size_t g = 0; g < ng; ++g)
          next.ratio(s, a, g) = (1.0 - gamma) * mdp.transition(s, a, g) / marginal[g] +
                                gamma * bootstrap(mdp, v, s, a, g, ng);
    const double change = max_abs_diff(next.ratio, result.table.ratio);
    result.table = std::move(next);
    result.final_change = change;
    result.sweeps = k + 1;
    if (change < tol) break;
    if (k + 1 == max_sweeps)
      throw NumericalError("optimality iteration did not converge", change);
  }
  result.greedy = greedy_policy_from_ratio(result.table);
  return result;
}

QTable expected_q_sweep(const TabularMDP& mdp, const StochasticPolicy& policy,
                        const std::vector<double>& marginal, const QTable& q,
                        double gamma, double lambda) {
  const std::size_t ns = mdp.num_states, na = mdp.num_actions, ng = marginal.size();
  // E_{a'}[Q(s', a', g)]
  std::vector<double> v(ns * ng, 0.0);
  for (std::size_t sp = 0; sp < ns; ++sp)
    for (std::size_t ap = 0; ap < na; ++ap) {
      const double pa = policy.probs[sp][ap];
      if (pa == 0.0) continue;
      for (std::size_t g = 0; g < ng; ++g) v[sp * ng + g] += pa * q.q(sp, ap, g);
    }
  QTable out;
  out.q = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g) {
        const double w_pos = (1.0 - lambda) * mdp.transition(s, a, g);
        const double w_rel = lambda * marginal[g];
        const double den = w_pos + w_rel;
        if (den <= 0.0) {
          out.q(s, a, g) = q.q(s, a, g);
          continue;
        }
        const double boot = std::clamp(gamma * bootstrap(mdp, v, s, a, g, ng), 0.0, 1.0);
        out.q(s, a, g) = (w_pos * 1.0 + w_rel * boot) / den;
      }
  return out;
}

QTable tabular_q_fixed_point(const TabularMDP& mdp, const StochasticPolicy& policy,
                             const std::vector<double>& marginal, double gamma,
                             double lambda, double tol, long max_sweeps) {
  QTable q;
  q.q = Tensor3(mdp.num_states, mdp.num_actions, marginal.size(), 0.0);
  double change = 0.0;
  for (long k = 0; k < max_sweeps; ++k) {
    QTable next = expected_q_sweep(mdp, policy, marginal, q, gamma, lambda);
    change = max_abs_diff(next.q, q.q);
    q = std::move(next);
    if (change < tol) return q;
  }
  throw NumericalError("tabular_q_fixed_point did not converge", change);
}

GoalConditionedPolicy greedy_policy_from_ratio(const RatioTable& ratio) {
  const std::size_t ns = ratio.ratio.dim0(), na = ratio.ratio.dim1(),
                    ng = ratio.ratio.dim2();
  GoalConditionedPolicy pi;
  pi.probs.assign(ns, std::vector<std::vector<double>>(ng, std::vector<double>(na, 0.0)));
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t g = 0; g < ng; ++g) {
      double best = ratio.ratio(s, 0, g);
      for (std::size_t a = 1; a < na; ++a) best = std::max(best, ratio.ratio(s, a, g));
      // Lowest index within the tie tolerance wins; exact ties are common on
      // symmetric MDPs and must resolve identically across routes.
      const double cutoff = best - kTieTol * std::max(1.0, std::abs(best));
      std::size_t pick = 0;
      for (std::size_t a = 0; a < na; ++a)
        if (ratio.ratio(s, a, g) >= cutoff) {
          pick = a;
          break;
        }
      pi.probs[s][g][pick] = 1.0;
    }
  return pi;
}

DiscountedDensity density_from_ratio(const RatioTable& ratio,
                                     const std::vector<double>& marginal) {
  const std::size_t ns = ratio.ratio.dim0(), na = ratio.ratio.dim1(),
                    ng = ratio.ratio.dim2();
  DiscountedDensity d;
  d.table = Tensor3(ns, na, ng);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t g = 0; g < ng; ++g)
        d.table(s, a, g) = ratio.ratio(s, a, g) * marginal[g];
  return d;
}

}  // namespace clearn

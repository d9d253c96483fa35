#include <doctest.h>

#include <cmath>
#include <sstream>

#include "clearn/analytic.hpp"
#include "clearn/envs.hpp"
#include "clearn/errors.hpp"
#include "clearn/rng.hpp"
#include "support/oracles.hpp"

using namespace clearn;

TEST_CASE("self-loop density is an indicator on the landing state") {
  const NoisyGridworld world(5, 5);
  // Single action per cell is enough: use example1 for a literal self-loop.
  const TabularMDP mdp = make_example1(4);
  const StochasticPolicy pi = uniform_policy(mdp);
  const DiscountedDensity d = analytic_density(mdp, pi, 0.9);
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t g = 0; g < 4; ++g)
      CHECK(d.table(s, 0, g) == doctest::Approx(s == g ? 1.0 : 0.0).epsilon(1e-12));
  // Deterministic movement: the gridworld density at gamma = 0 is the
  // indicator of f(s, a).
  RngStream rng(3);
  const StochasticPolicy pig = dirichlet_policy(world.mdp(), 1.0, rng);
  const DiscountedDensity dg = analytic_density(world.mdp(), pig, 0.0);
  for (std::size_t s = 0; s < 25; ++s)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t g = 0; g < 25; ++g)
        CHECK(dg.table(s, a, g) == doctest::Approx(world.mdp().transition(s, a, g)));
}

TEST_CASE("density matches a Monte Carlo rollout oracle") {
  RngStream rng(17);
  const TabularMDP mdp = testing::random_mdp(3, 2, rng);
  const StochasticPolicy pi = dirichlet_policy(mdp, 1.0, rng);
  const double gamma = 0.8;
  const DiscountedDensity d = analytic_density(mdp, pi, gamma);
  const std::size_t per_pair = 1000000 / 6;
  const Tensor3 est = testing::rollout_density_estimate(mdp, pi, gamma, per_pair, rng);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t g = 0; g < 3; ++g) {
        const double p = d.table(s, a, g);
        const double se = std::sqrt(p * (1 - p) / per_pair);
        CHECK(std::abs(est(s, a, g) - p) <= 3 * se + 1e-9);
      }
}

TEST_CASE("recursion identity holds for random MDPs and discounts") {
  RngStream rng(23);
  for (double gamma : {0.0, 0.3, 0.5, 0.9, 0.99}) {
    const TabularMDP mdp = testing::random_mdp(4, 3, rng);
    const StochasticPolicy pi = dirichlet_policy(mdp, 1.0, rng);
    const DiscountedDensity d = analytic_density(mdp, pi, gamma);
    d.validate(1e-9);
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t g = 0; g < 4; ++g) {
          double boot = 0.0;
          for (std::size_t sp = 0; sp < 4; ++sp)
            for (std::size_t ap = 0; ap < 3; ++ap)
              boot += mdp.transition(s, a, sp) * pi.probs[sp][ap] * d.table(sp, ap, g);
          const double rhs = (1 - gamma) * mdp.transition(s, a, g) + gamma * boot;
          CHECK(std::abs(d.table(s, a, g) - rhs) < 1e-9);
        }
  }
}

TEST_CASE("forward KL basics") {
  RngStream rng(29);
  const TabularMDP mdp = testing::random_mdp(5, 2, rng);
  const StochasticPolicy pi = dirichlet_policy(mdp, 1.0, rng);
  const DiscountedDensity d = analytic_density(mdp, pi, 0.7);
  CHECK(forward_kl(d, d) == doctest::Approx(0.0).epsilon(1e-12));

  // Point mass against a uniform estimate over n = 25 goals: log 25.
  DiscountedDensity point, uniform;
  point.table = Tensor3(1, 1, 25, 0.0);
  point.table(0, 0, 7) = 1.0;
  uniform.table = Tensor3(1, 1, 25, 1.0 / 25.0);
  CHECK(forward_kl(point, uniform) == doctest::Approx(std::log(25.0)).epsilon(1e-12));

  // Dirichlet-noised estimate scored identically by an independent reference.
  DiscountedDensity noisy = d;
  RngStream noise(31);
  for (double& v : noisy.table.data()) v = std::max(v + 0.05 * noise.uniform01(), 0.0);
  CHECK(forward_kl(d, noisy) ==
        doctest::Approx(testing::reference_forward_kl(d, noisy)).epsilon(1e-12));
  CHECK(forward_kl(d, noisy) >= 0.0);

  DiscountedDensity wrong;
  wrong.table = Tensor3(2, 1, 25);
  CHECK_THROWS_AS(forward_kl(d, wrong), ConfigError);
}

TEST_CASE("example1 fixed point closed forms") {
  // lambda = 0: every target is the next-state label.
  CHECK(example1_fixed_point(5, 0.9, 0.0).values.at("q_normalized") ==
        doctest::Approx(1.0).epsilon(1e-9));
  // gamma = 0: targets are 0/1 constants.
  const double lam = 0.3;
  CHECK(example1_fixed_point(5, 0.0, lam).values.at("q_normalized") ==
        doctest::Approx((1 - lam) / (1 - lam + lam / 5.0)).epsilon(1e-9));
  // Unnormalized closed form (1 - l) / (1 - g l / n).
  const auto rep = example1_fixed_point(5, 0.9, 0.5);
  CHECK(rep.values.at("q_unnormalized") ==
        doctest::Approx(0.5 / (1 - 0.9 * 0.5 / 5.0)).epsilon(1e-9));
  CHECK(rep.values.at("q_normalized") ==
        doctest::Approx(0.5 / (0.5 + 0.1 * 0.1)).epsilon(1e-9));
}

TEST_CASE("example1 fixed point matches the stochastic Q simulation") {
  const auto rep = example1_fixed_point(5, 0.9, 0.5);
  std::vector<std::pair<std::size_t, std::size_t>> transitions;
  for (std::size_t s = 0; s < 5; ++s) transitions.emplace_back(s, s);
  const auto q = testing::stochastic_relabeled_q(transitions, 5, 0.9, 0.5, 1000000, 97);
  CHECK(std::abs(q[0][0] - rep.values.at("q_normalized")) < 1e-3);
}

TEST_CASE("example2 fixed points and the failure claim") {
  for (double lam : {0.2, 0.5, 0.9}) {
    for (double gamma : {0.3, 0.9}) {
      const auto rep = example2_fixed_points(gamma, lam);
      CHECK(rep.values.at("q21") == doctest::Approx(0.0).epsilon(1e-12));
      // Corrected closed forms from the case equations.
      CHECK(rep.values.at("q11") ==
            doctest::Approx((2 - 2 * lam) / (2 - gamma * lam)).epsilon(1e-9));
      CHECK(rep.values.at("q22") ==
            doctest::Approx((2 - 2 * lam) / (2 - lam - gamma * lam)).epsilon(1e-9));
    }
  }
  const auto zero = example2_fixed_points(0.9, 0.0);
  CHECK(zero.values.at("q11") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(zero.values.at("q12") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(zero.values.at("q22") == doctest::Approx(1.0).epsilon(1e-9));

  const auto rep = example2_fixed_points(0.9, 0.5);
  const auto q = testing::stochastic_relabeled_q({{0, 0}, {0, 1}, {1, 1}}, 2, 0.9, 0.5,
                                                 1000000, 101);
  CHECK(std::abs(q[0][0] - rep.values.at("q11")) < 1e-3);
  CHECK(std::abs(q[0][1] - rep.values.at("q12")) < 1e-3);
  CHECK(std::abs(q[1][0] - rep.values.at("q21")) < 1e-3);
  CHECK(std::abs(q[1][1] - rep.values.at("q22")) < 1e-3);

  // Q-learning's value differs from the discounted visit probability under
  // either offset convention, normalized or not.
  CHECK(std::abs(rep.values.at("q11") - rep.values.at("true_density_paper")) > 0.01);
  CHECK(std::abs(rep.values.at("q11") - rep.values.at("true_density_strict")) > 0.01);
  CHECK(std::abs(rep.values.at("normalized_prediction") -
                 rep.values.at("true_density_paper")) > 0.01);
}

TEST_CASE("density_to_expected_goal") {
  std::vector<std::vector<double>> grid;
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t i = 0; i < 5; ++i)
      grid.push_back({double(i), double(j)});

  std::vector<double> point(25, 0.0);
  point[7] = 1.0;
  CHECK(density_to_expected_goal(point, grid) == grid[7]);

  const std::vector<double> uniform(25, 1.0 / 25.0);
  const auto center = density_to_expected_goal(uniform, grid);
  CHECK(center[0] == doctest::Approx(2.0));
  CHECK(center[1] == doctest::Approx(2.0));

  // Self-loop density puts the expected goal at the landing cell.
  const TabularMDP mdp = make_example1(25);
  const StochasticPolicy pi = uniform_policy(mdp);
  const DiscountedDensity d = analytic_density(mdp, pi, 0.9);
  std::vector<double> slice(25);
  for (std::size_t g = 0; g < 25; ++g) slice[g] = d.table(3, 0, g);
  CHECK(density_to_expected_goal(slice, grid)[0] == doctest::Approx(grid[3][0]));
  CHECK(density_to_expected_goal(slice, grid)[1] == doctest::Approx(grid[3][1]));
}

TEST_CASE("density CSV serialization round-trips") {
  RngStream rng(41);
  const TabularMDP mdp = testing::random_mdp(3, 2, rng);
  const StochasticPolicy pi = dirichlet_policy(mdp, 1.0, rng);
  const DiscountedDensity d = analytic_density(mdp, pi, 0.6);
  std::stringstream s;
  d.serialize(s);
  const DiscountedDensity back = DiscountedDensity::deserialize(s);
  CHECK(max_abs_diff(d.table, back.table) == 0.0);
}

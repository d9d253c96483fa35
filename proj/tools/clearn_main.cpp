// clearn: experiment harness for recursive-classification density estimation.
//
//   clearn run <config.json>                 single training run + telemetry
//   clearn sweep <config.json>               full experiment recipe
//   clearn plot <results.csv> --layout NAME  re-render a results file
//   clearn analytic <env> --gamma G --out F  exact density as CSV
//   clearn oracle example1|example2 ...      fixed-point reference values
//
// Exit codes: 0 success, 2 config error, 3 numerical error, 4 gate failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "clearn/analytic.hpp"
#include "clearn/envs.hpp"
#include "clearn/errors.hpp"
#include "clearn/experiment.hpp"
#include "clearn/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitGate = 4;

void print_gates(const clearn::SweepResult& result) {
  for (const auto& g : result.gates)
    std::cout << (g.passed ? "[pass] " : "[FAIL] ") << g.name << "  (" << g.detail
              << ")\n";
}

int cmd_run(const std::string& config_path) {
  auto config = clearn::ExperimentConfig::load(config_path);
  std::filesystem::create_directories(config.output_dir);
  {
    std::ofstream echo(std::filesystem::path(config.output_dir) / "config_echo.json");
    echo << config.to_json() << '\n';
  }
  std::ofstream telemetry(std::filesystem::path(config.output_dir) / "telemetry.csv");
  const auto result = clearn::run_single(config, &telemetry);
  std::ofstream csv(std::filesystem::path(config.output_dir) / "results.csv");
  result.write_csv(csv);
  const auto& row = result.rows.front();
  std::cout << "method=" << row.method << " kl=" << row.kl << " mass=" << row.mass
            << " wall_ms=" << row.wall_ms << '\n';
  return kExitOk;
}

int cmd_sweep(const std::string& config_path) {
  auto config = clearn::ExperimentConfig::load(config_path);
  const auto result = clearn::run_and_persist(config);
  print_gates(result);
  std::cout << "results: " << config.output_dir << "/results.csv\n";
  return result.all_gates_passed() ? kExitOk : kExitGate;
}

int cmd_plot(const std::string& results_path, const std::string& layout,
             const std::string& out_path) {
  std::ifstream in(results_path);
  if (!in) throw clearn::ConfigError("cannot open " + results_path);
  const auto rows = clearn::SweepResult::read_csv(in);
  const std::string svg = clearn::emit_plots(rows, layout);
  std::ofstream out(out_path);
  out << svg;
  std::cout << "wrote " << out_path << '\n';
  return kExitOk;
}

int cmd_analytic(const std::string& env, double gamma, const std::string& out_path,
                 std::uint64_t policy_seed, bool uniform) {
  const auto mdp = clearn::make_env(env);
  clearn::StochasticPolicy policy;
  if (uniform) {
    policy = clearn::uniform_policy(mdp);
  } else {
    clearn::RngStream rng(policy_seed);
    policy = clearn::dirichlet_policy(mdp, 1.0, rng);
  }
  const auto density = clearn::analytic_density(mdp, policy, gamma);
  std::ofstream out(out_path);
  density.serialize(out);
  std::cout << "wrote " << out_path << '\n';
  return kExitOk;
}

int cmd_oracle(const std::string& which, double gamma, double lambda, std::size_t n) {
  clearn::FixedPointReport report;
  if (which == "example1") {
    report = clearn::example1_fixed_point(n, gamma, lambda);
  } else if (which == "example2") {
    report = clearn::example2_fixed_points(gamma, lambda);
  } else {
    throw clearn::ConfigError("oracle: expected example1 or example2");
  }
  for (const auto& [name, value] : report.values)
    std::cout << name << " = " << value << '\n';
  std::cout << "iterations = " << report.iterations
            << ", residual = " << report.residual << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C-learning experiment harness"};
  app.set_version_flag("--version", clearn::kVersion);
  app.require_subcommand(1);

  std::string config_path, results_path, layout, out_path = "plot.svg", env = "gridworld5";
  std::string oracle_which;
  double gamma = 0.9, lambda = 0.5;
  std::uint64_t policy_seed = 0;
  bool uniform = false;
  std::size_t n = 5;

  auto* run = app.add_subcommand("run", "single training run with telemetry");
  run->add_option("config", config_path, "JSON config file")->required();

  auto* sweep = app.add_subcommand("sweep", "full experiment recipe");
  sweep->add_option("config", config_path, "JSON config file")->required();

  auto* plot = app.add_subcommand("plot", "render a results CSV as SVG");
  plot->add_option("results", results_path, "results.csv")->required();
  plot->add_option("--layout", layout, "lambda-sweep | normalization | onoff")->required();
  plot->add_option("--out", out_path, "output SVG path");

  auto* analytic = app.add_subcommand("analytic", "exact discounted density as CSV");
  analytic->add_option("env", env, "gridworld5 | example1:<n> | example2")->required();
  analytic->add_option("--gamma", gamma, "discount")->required();
  analytic->add_option("--out", out_path, "output CSV path")->required();
  analytic->add_option("--policy-seed", policy_seed, "Dirichlet(1) policy seed");
  analytic->add_flag("--uniform", uniform, "use the uniform policy");

  auto* oracle = app.add_subcommand("oracle", "Appendix-H fixed point reference values");
  oracle->add_option("which", oracle_which, "example1 | example2")->required();
  oracle->add_option("--gamma", gamma, "discount")->required();
  oracle->add_option("--lambda", lambda, "relabeling ratio")->required();
  oracle->add_option("--n", n, "number of states (example1)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (sweep->parsed()) return cmd_sweep(config_path);
    if (plot->parsed()) return cmd_plot(results_path, layout, out_path);
    if (analytic->parsed())
      return cmd_analytic(env, gamma, out_path, policy_seed, uniform);
    if (oracle->parsed()) return cmd_oracle(oracle_which, gamma, lambda, n);
  } catch (const clearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const clearn::SamplingError& e) {
    std::cerr << "sampling error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const clearn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << " (residual " << e.residual()
              << ")\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

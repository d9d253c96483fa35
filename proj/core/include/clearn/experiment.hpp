#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "clearn/learners.hpp"

namespace clearn {

// Serializable description of one experiment run or sweep. Key names in the
// JSON config files match the field names here; see docs/config-schema.json.
struct ExperimentConfig {
  std::string experiment = "onpolicy-kl";
  std::string env = "gridworld5";
  std::string method = "mc-c";
  double gamma = 0.9;
  double relabel_ratio = 0.5;
  double mix_ratio = 0.5;
  std::size_t hidden_dims = 32;
  std::size_t train_steps = 1000;
  std::size_t batch_size = 256;
  double learning_rate = 3e-3;
  std::size_t num_trajectories = 100;
  std::size_t trajectory_length = 100;
  std::size_t num_seeds = 5;
  std::uint64_t root_seed = 20240901;
  double w_clip = 0.0;      // <= 0: 1/(1-gamma) heuristic
  double target_tau = 1.0;  // 1.0: stop-gradient current net
  bool td_exact_aprime = false;
  std::string output_dir = "out";
  std::vector<double> lambda_grid;  // empty: recipe default
  std::vector<double> gamma_grid;   // empty: recipe default
  std::size_t workers = 0;          // 0: hardware concurrency

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  LearnerConfig learner() const;
};

struct ResultRow {
  std::string experiment;
  std::string env;
  std::string method;
  double gamma = 0.0;
  double lambda = 0.0;
  std::size_t seed = 0;
  std::size_t step = 0;
  double kl = 0.0;
  double mass = 0.0;
  long wall_ms = 0;
};

struct GateCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SweepResult {
  std::vector<ResultRow> rows;
  std::vector<GateCheck> gates;

  bool all_gates_passed() const;
  // Header: experiment,env,method,gamma,lambda,seed,step,kl,mass,wall_ms
  void write_csv(std::ostream& out) const;
  static std::vector<ResultRow> read_csv(std::istream& in);
};

// The five experiment recipes.
SweepResult run_onpolicy_kl(const ExperimentConfig& config);
SweepResult run_offpolicy_kl(const ExperimentConfig& config);
SweepResult run_normalization(const ExperimentConfig& config);
SweepResult run_lambda_sweep(const ExperimentConfig& config);
SweepResult run_gcrl_tabular(const ExperimentConfig& config);

// Dispatch by config.experiment.
SweepResult run_experiment(const ExperimentConfig& config);

// Single training run of config.method with telemetry rows
// `step,loss,kl,mass_mean` appended every 100 steps.
SweepResult run_single(const ExperimentConfig& config, std::ostream* telemetry);

// Renders a SweepResult in one of the figure layouts:
// `lambda-sweep`, `normalization`, `onoff`.
std::string emit_plots(const std::vector<ResultRow>& rows, const std::string& layout);

// Writes config echo + library version, results.csv, summary.json and the
// recipe's default plot into config.output_dir. Returns the sweep result.
SweepResult run_and_persist(const ExperimentConfig& config);

// Field-wise CSV comparison that ignores the wall_ms column (timings are the
// one nondeterministic output field).
bool results_csv_equivalent(std::istream& a, std::istream& b);

// Median of a vector (by copy); used for all gate statistics.
double median(std::vector<double> values);

}  // namespace clearn

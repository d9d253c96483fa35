#include "clearn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "clearn/envs.hpp"
#include "clearn/svg.hpp"
#include "clearn/errors.hpp"
#include "clearn/version.hpp"

namespace clearn {
namespace {

using nlohmann::json;

// Stream id salts for child-seed derivation; fixed order is part of the
// reproducibility contract.
constexpr std::uint64_t kBehaviorSalt = 11;
constexpr std::uint64_t kTargetSalt = 13;
constexpr std::uint64_t kDataSalt = 17;
constexpr std::uint64_t kTrainSalt = 23;

constexpr double kMarginalFloor = 1e-6;

const std::vector<double> kDefaultLambdaGrid = {0.1, 0.2, 0.3,  0.4, 0.5, 0.6,
                                                0.7, 0.8, 0.9, 0.95, 0.99};
const std::vector<double> kNormalizationLambdaGrid = {0.1, 0.3, 0.5, 0.7, 0.9};
const std::vector<double> kDefaultGammaGrid = {0.5, 0.9};

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::uint64_t method_salt(const std::string& method) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : method) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

void run_jobs(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Everything a single trial needs: environment, policies, data, ground truth.
struct Trial {
  TabularMDP mdp;
  StochasticPolicy behavior;
  StochasticPolicy target;
  ReplayBuffer buffer;
  std::vector<double> marginal;          // raw empirical
  std::vector<double> marginal_floored;  // for tabular ratio operators
  DiscountedDensity truth;               // analytic density of the target policy
  StateEmbedding embedding;
};

Trial make_trial(const ExperimentConfig& config, double gamma, std::size_t gamma_index,
                 std::size_t seed, bool distinct_target) {
  Trial trial;
  trial.mdp = make_env(config.env);
  RngStream pol_rng =
      RngStream::child(config.root_seed, {kBehaviorSalt, gamma_index, seed});
  trial.behavior = dirichlet_policy(trial.mdp, 1.0, pol_rng);
  if (distinct_target) {
    RngStream tgt_rng =
        RngStream::child(config.root_seed, {kTargetSalt, gamma_index, seed});
    trial.target = dirichlet_policy(trial.mdp, 1.0, tgt_rng);
  } else {
    trial.target = trial.behavior;
  }
  RngStream data_rng = RngStream::child(config.root_seed, {kDataSalt, gamma_index, seed});
  trial.buffer = collect_buffer(trial.mdp, trial.behavior, config.num_trajectories,
                                config.trajectory_length, data_rng);
  trial.marginal = trial.buffer.marginal_distribution();
  trial.marginal_floored = trial.buffer.marginal_distribution(kMarginalFloor);
  trial.truth = analytic_density(trial.mdp, trial.target, gamma);
  if (config.env == "gridworld5") {
    NoisyGridworld world(5, 5);
    trial.embedding = StateEmbedding{world.all_centers(), NoisyGridworld::kNumActions};
  } else {
    // 1-d index embedding for the analytic example chains.
    std::vector<std::vector<double>> coords;
    for (std::size_t s = 0; s < trial.mdp.num_states; ++s)
      coords.push_back({static_cast<double>(s)});
    trial.embedding = StateEmbedding{coords, trial.mdp.num_actions};
  }
  return trial;
}

struct EvalOutcome {
  double kl = 0.0;
  double mass = 0.0;
  long wall_ms = 0;
};

double mean_mass(const std::vector<std::vector<double>>& mass) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& row : mass)
    for (double v : row) {
      total += v;
      ++n;
    }
  return total / static_cast<double>(n);
}

// Trains one method on a prepared trial and scores it against the trial's
// analytic truth. KL always goes through the classifier-odds density (Eq. 2
// route); the Q-table mass uses the scaled-probability reading of Q values.
EvalOutcome train_and_eval(const std::string& method, const Trial& trial,
                           const ExperimentConfig& config, double gamma, double lambda,
                           std::size_t gamma_index, std::size_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  LearnerConfig lc = config.learner();
  lc.gamma = gamma;
  lc.relabel_ratio = lambda;

  EvalOutcome out;
  if (method == "tabular-c") {
    const auto vi = tabular_c_value_iteration(trial.mdp, trial.target,
                                              trial.marginal_floored, gamma, 1e-12);
    const auto model = ClassifierModel::from_table(vi.table);
    out.kl = forward_kl(trial.truth,
                        density_from_classifier(model, trial.marginal_floored));
    out.mass = mean_mass(normalization_mass(model, trial.marginal_floored));
  } else if (method == "tabular-c-opt") {
    const auto opt =
        tabular_c_optimality_iteration(trial.mdp, trial.marginal_floored, gamma, 1e-12);
    const auto model = ClassifierModel::from_table(opt.table);
    out.kl = forward_kl(trial.truth,
                        density_from_classifier(model, trial.marginal_floored));
    out.mass = mean_mass(normalization_mass(model, trial.marginal_floored));
  } else {
    RngStream train_rng = RngStream::child(
        config.root_seed,
        {kTrainSalt, gamma_index, seed, method_salt(method),
         static_cast<std::uint64_t>(std::llround(lambda * 1000.0))});
    NetModel model = NetModel::create(trial.embedding, config.hidden_dims,
                                      config.learning_rate, train_rng);
    for (std::size_t step = 0; step < config.train_steps; ++step) {
      if (method == "mc-c") {
        mc_c_step(model, trial.buffer, lc, train_rng);
      } else if (method == "td-c") {
        td_c_step(model, trial.buffer, trial.target, lc, train_rng);
      } else if (method == "mixed-c") {
        mixed_c_step(model, trial.buffer, trial.target, lc, train_rng);
      } else if (method == "q-hindsight") {
        q_hindsight_step(model, trial.buffer, trial.target, lc, train_rng);
      } else {
        throw ConfigError("unknown method: " + method);
      }
    }
    const auto cls = ClassifierModel::from_net(std::move(model));
    out.kl = forward_kl(trial.truth, density_from_classifier(cls, trial.marginal));
    if (method == "q-hindsight") {
      // Hypothesis-1 mass: Q read directly as a scaled probability table.
      const DiscountedDensity q = q_value_density(*cls.net);
      double total = 0.0;
      for (double v : q.table.data()) total += v;
      out.mass = (1.0 - gamma) * total /
                 static_cast<double>(q.table.dim0() * q.table.dim1());
    } else {
      out.mass = mean_mass(normalization_mass(cls, trial.marginal));
    }
  }
  out.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

struct SweepCell {
  std::string method;
  double gamma = 0.0;
  double lambda = 0.0;
  std::size_t gamma_index = 0;
  bool distinct_target = false;
};

std::vector<ResultRow> run_cells(const ExperimentConfig& config,
                                 const std::vector<SweepCell>& cells) {
  const std::size_t jobs = cells.size() * config.num_seeds;
  std::vector<ResultRow> rows(jobs);
  run_jobs(jobs, config.workers, [&](std::size_t j) {
    const SweepCell& cell = cells[j / config.num_seeds];
    const std::size_t seed = j % config.num_seeds;
    const Trial trial =
        make_trial(config, cell.gamma, cell.gamma_index, seed, cell.distinct_target);
    const EvalOutcome ev = train_and_eval(cell.method, trial, config, cell.gamma,
                                          cell.lambda, cell.gamma_index, seed);
    rows[j] = {config.experiment, config.env, cell.method, cell.gamma, cell.lambda,
               seed,              config.train_steps,      ev.kl,      ev.mass,
               ev.wall_ms};
  });
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.method, a.gamma, a.lambda, a.seed) <
           std::tie(b.method, b.gamma, b.lambda, b.seed);
  });
  return rows;
}

std::vector<double> collect_kls(const std::vector<ResultRow>& rows,
                                const std::string& method, double gamma,
                                double lambda = -1.0) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.method == method && r.gamma == gamma && (lambda < 0.0 || r.lambda == lambda))
      v.push_back(r.kl);
  return v;
}

std::vector<double> collect_masses(const std::vector<ResultRow>& rows,
                                   const std::string& method, double lambda) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.method == method && (lambda < 0.0 || r.lambda == lambda)) v.push_back(r.mass);
  return v;
}

std::string gate_detail(double lhs, double rhs) {
  return fmt_num(lhs) + " vs " + fmt_num(rhs);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("config: gamma must be in [0, 1)");
  if (relabel_ratio < 0.0 || relabel_ratio > 1.0)
    throw ConfigError("config: relabel_ratio must be in [0, 1]");
  if (mix_ratio < 0.0 || mix_ratio > 1.0)
    throw ConfigError("config: mix_ratio must be in [0, 1]");
  if (hidden_dims == 0 || train_steps == 0 || batch_size < 2 || num_seeds == 0)
    throw ConfigError("config: hidden_dims, train_steps, batch_size, num_seeds must be positive");
  if (learning_rate <= 0.0) throw ConfigError("config: learning_rate must be positive");
  if (num_trajectories == 0 || trajectory_length == 0)
    throw ConfigError("config: trajectory counts must be positive");
  if (target_tau <= 0.0 || target_tau > 1.0)
    throw ConfigError("config: target_tau must be in (0, 1]");
  for (double l : lambda_grid)
    if (l < 0.0 || l > 1.0) throw ConfigError("config: lambda_grid entries in [0, 1]");
  for (double g : gamma_grid)
    if (g < 0.0 || g >= 1.0) throw ConfigError("config: gamma_grid entries in [0, 1)");
}

LearnerConfig ExperimentConfig::learner() const {
  LearnerConfig lc;
  lc.gamma = gamma;
  lc.relabel_ratio = relabel_ratio;
  lc.mix_ratio = mix_ratio;
  lc.w_clip = w_clip;
  lc.batch_size = batch_size;
  lc.steps = train_steps;
  lc.learning_rate = learning_rate;
  lc.target_tau = target_tau;
  lc.td_exact_expectation = td_exact_aprime;
  return lc;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["env"] = env;
  j["method"] = method;
  j["gamma"] = gamma;
  j["relabel_ratio"] = relabel_ratio;
  j["mix_ratio"] = mix_ratio;
  j["hidden_dims"] = hidden_dims;
  j["train_steps"] = train_steps;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["num_trajectories"] = num_trajectories;
  j["trajectory_length"] = trajectory_length;
  j["num_seeds"] = num_seeds;
  j["root_seed"] = root_seed;
  if (w_clip > 0.0)
    j["w_clip"] = w_clip;
  else
    j["w_clip"] = nullptr;
  j["target_tau"] = target_tau;
  j["td_exact_aprime"] = td_exact_aprime;
  j["output_dir"] = output_dir;
  j["lambda_grid"] = lambda_grid;
  j["gamma_grid"] = gamma_grid;
  j["workers"] = workers;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.contains("experiment")) c.experiment = j["experiment"].get<std::string>();
    if (j.contains("env")) c.env = j["env"].get<std::string>();
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    if (j.contains("relabel_ratio")) c.relabel_ratio = j["relabel_ratio"].get<double>();
    if (j.contains("mix_ratio")) c.mix_ratio = j["mix_ratio"].get<double>();
    if (j.contains("hidden_dims")) c.hidden_dims = j["hidden_dims"].get<std::size_t>();
    if (j.contains("train_steps")) c.train_steps = j["train_steps"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("num_trajectories"))
      c.num_trajectories = j["num_trajectories"].get<std::size_t>();
    if (j.contains("trajectory_length"))
      c.trajectory_length = j["trajectory_length"].get<std::size_t>();
    if (j.contains("num_seeds")) c.num_seeds = j["num_seeds"].get<std::size_t>();
    if (j.contains("root_seed")) c.root_seed = j["root_seed"].get<std::uint64_t>();
    if (j.contains("w_clip") && !j["w_clip"].is_null())
      c.w_clip = j["w_clip"].get<double>();
    if (j.contains("target_tau")) c.target_tau = j["target_tau"].get<double>();
    if (j.contains("td_exact_aprime"))
      c.td_exact_aprime = j["td_exact_aprime"].get<bool>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("lambda_grid"))
      c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
    if (j.contains("gamma_grid"))
      c.gamma_grid = j["gamma_grid"].get<std::vector<double>>();
    if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad field type: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_json_text(text.str());
}

bool SweepResult::all_gates_passed() const {
  for (const auto& g : gates)
    if (!g.passed) return false;
  return true;
}

void SweepResult::write_csv(std::ostream& out) const {
  out << "experiment,env,method,gamma,lambda,seed,step,kl,mass,wall_ms\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.env << ',' << r.method << ',' << fmt_num(r.gamma)
        << ',' << fmt_num(r.lambda) << ',' << r.seed << ',' << r.step << ','
        << fmt_num(r.kl) << ',' << fmt_num(r.mass) << ',' << r.wall_ms << '\n';
  }
}

std::vector<ResultRow> SweepResult::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "experiment,env,method,gamma,lambda,seed,step,kl,mass,wall_ms")
    throw ConfigError("results csv: missing header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) parts.push_back(field);
    if (parts.size() != 10) throw ConfigError("results csv: malformed row: " + line);
    ResultRow r;
    r.experiment = parts[0];
    r.env = parts[1];
    r.method = parts[2];
    r.gamma = std::stod(parts[3]);
    r.lambda = std::stod(parts[4]);
    r.seed = std::stoul(parts[5]);
    r.step = std::stoul(parts[6]);
    r.kl = std::stod(parts[7]);
    r.mass = std::stod(parts[8]);
    r.wall_ms = std::stol(parts[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SweepResult run_onpolicy_kl(const ExperimentConfig& config) {
  std::vector<SweepCell> cells;
  for (const char* m : {"mc-c", "td-c", "q-hindsight", "tabular-c"})
    cells.push_back({m, config.gamma, m == std::string("q-hindsight") ? config.relabel_ratio : 0.0,
                     0, false});
  SweepResult result;
  result.rows = run_cells(config, cells);

  const double q_med = median(collect_kls(result.rows, "q-hindsight", config.gamma));
  const double mc_med = median(collect_kls(result.rows, "mc-c", config.gamma));
  const double td_med = median(collect_kls(result.rows, "td-c", config.gamma));
  const double tab_med = median(collect_kls(result.rows, "tabular-c", config.gamma));
  result.gates.push_back(
      {"onpolicy_mc_below_q", mc_med < q_med, gate_detail(mc_med, q_med)});
  result.gates.push_back(
      {"onpolicy_td_below_q", td_med < q_med, gate_detail(td_med, q_med)});
  result.gates.push_back({"onpolicy_tabular_exact", tab_med < 1e-6, fmt_num(tab_med)});
  result.gates.push_back({"onpolicy_q_over_mc_ratio_reported", true,
                          fmt_num(q_med / std::max(mc_med, 1e-300))});
  return result;
}

SweepResult run_offpolicy_kl(const ExperimentConfig& config) {
  const std::vector<double>& grid =
      config.lambda_grid.empty() ? kDefaultLambdaGrid : config.lambda_grid;
  std::vector<SweepCell> cells;
  cells.push_back({"mc-c", config.gamma, 0.0, 0, true});
  cells.push_back({"td-c", config.gamma, 0.0, 0, true});
  for (double l : grid) cells.push_back({"q-hindsight", config.gamma, l, 0, true});
  SweepResult result;
  result.rows = run_cells(config, cells);

  const double mc_med = median(collect_kls(result.rows, "mc-c", config.gamma));
  const double td_med = median(collect_kls(result.rows, "td-c", config.gamma));
  double best_q = 1e300;
  double best_lambda = 0.0;
  for (double l : grid) {
    const double m = median(collect_kls(result.rows, "q-hindsight", config.gamma, l));
    if (m < best_q) {
      best_q = m;
      best_lambda = l;
    }
  }
  result.gates.push_back(
      {"offpolicy_td_below_mc", td_med < mc_med, gate_detail(td_med, mc_med)});
  result.gates.push_back({"offpolicy_td_below_best_q", td_med < best_q,
                          gate_detail(td_med, best_q) + " at lambda=" +
                              fmt_num(best_lambda)});
  return result;
}

SweepResult run_normalization(const ExperimentConfig& config) {
  const std::vector<double>& grid =
      config.lambda_grid.empty() ? kNormalizationLambdaGrid : config.lambda_grid;
  std::vector<SweepCell> cells;
  cells.push_back({"mc-c", config.gamma, 0.0, 0, false});
  for (double l : grid) cells.push_back({"q-hindsight", config.gamma, l, 0, false});
  SweepResult result;
  result.rows = run_cells(config, cells);

  const double c_mass = median(collect_masses(result.rows, "mc-c", -1.0));
  result.gates.push_back({"normalization_c_mass_in_range",
                          c_mass >= 0.9 && c_mass <= 1.1, fmt_num(c_mass)});
  for (double l : grid) {
    if (l < 0.5) continue;
    const double q_mass = median(collect_masses(result.rows, "q-hindsight", l));
    result.gates.push_back({"normalization_q_below_c_lambda_" + fmt_num(l),
                            q_mass < c_mass, gate_detail(q_mass, c_mass)});
  }
  return result;
}

SweepResult run_lambda_sweep(const ExperimentConfig& config) {
  const std::vector<double>& grid =
      config.lambda_grid.empty() ? kDefaultLambdaGrid : config.lambda_grid;
  const std::vector<double>& gammas =
      config.gamma_grid.empty() ? kDefaultGammaGrid : config.gamma_grid;
  std::vector<SweepCell> cells;
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    cells.push_back({"td-c", gammas[gi], 0.0, gi, false});
    for (double l : grid) cells.push_back({"q-hindsight", gammas[gi], l, gi, false});
  }
  SweepResult result;
  result.rows = run_cells(config, cells);

  for (double gamma : gammas) {
    double best_q = 1e300, best_lambda = 0.0;
    for (double l : grid) {
      const double m = median(collect_kls(result.rows, "q-hindsight", gamma, l));
      if (m < best_q) {
        best_q = m;
        best_lambda = l;
      }
    }
    const double predicted = 0.5 * (1.0 + gamma);
    const double td_med = median(collect_kls(result.rows, "td-c", gamma));
    result.gates.push_back(
        {"lambda_argmin_near_prediction_gamma_" + fmt_num(gamma),
         std::abs(best_lambda - predicted) <= 0.1 + 1e-9,
         "argmin=" + fmt_num(best_lambda) + " predicted=" + fmt_num(predicted)});
    result.gates.push_back({"td_not_worse_than_best_q_gamma_" + fmt_num(gamma),
                            td_med <= best_q, gate_detail(td_med, best_q)});
  }
  return result;
}

SweepResult run_gcrl_tabular(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const TabularMDP mdp = make_env(config.env);
  const double gamma = config.gamma;
  RngStream pol_rng = RngStream::child(config.root_seed, {kBehaviorSalt, 0, 0});
  const StochasticPolicy behavior = dirichlet_policy(mdp, 1.0, pol_rng);
  RngStream data_rng = RngStream::child(config.root_seed, {kDataSalt, 0, 0});
  const ReplayBuffer buffer = collect_buffer(mdp, behavior, config.num_trajectories,
                                             config.trajectory_length, data_rng);
  const std::vector<double> marginal = buffer.marginal_distribution(kMarginalFloor);
  const std::size_t ns = mdp.num_states, na = mdp.num_actions;

  // Reference: Bellman-optimality iteration and its goal-reaching densities.
  const OptimalityResult opt = tabular_c_optimality_iteration(mdp, marginal, gamma, 1e-12);
  std::vector<std::vector<double>> opt_density(ns, std::vector<double>(ns));
  for (std::size_t g = 0; g < ns; ++g) {
    const DiscountedDensity d = analytic_density(mdp, opt.greedy.slice(g), gamma);
    const auto per_state = state_density(d, opt.greedy.slice(g));
    for (std::size_t s = 0; s < ns; ++s) opt_density[s][g] = per_state[s][g];
  }

  // Alternate goal-conditioned evaluation sweeps with greedy improvement.
  GoalConditionedPolicy policy = GoalConditionedPolicy::uniform(ns, ns, na);
  std::vector<std::size_t> all_states(ns), all_goals(ns);
  for (std::size_t i = 0; i < ns; ++i) all_states[i] = all_goals[i] = i;

  SweepResult result;
  double min_monotone_margin = 0.0;
  std::vector<std::vector<double>> prev_density(ns, std::vector<double>(ns, -1.0));
  bool argmax_stable = false;
  std::size_t iterations = 0;
  for (std::size_t it = 0; it < 200 && !argmax_stable; ++it) {
    const auto eval =
        tabular_c_value_iteration_gc(mdp, policy, marginal, gamma, 1e-12);
    const GoalConditionedPolicy improved = gc_policy_improvement_step(
        policy, ClassifierModel::from_table(eval.table), all_states, all_goals);

    // Goal-reaching density of the improved policy, exactly.
    std::vector<std::vector<double>> cur(ns, std::vector<double>(ns));
    for (std::size_t g = 0; g < ns; ++g) {
      const StochasticPolicy slice = improved.slice(g);
      const auto per_state = state_density(analytic_density(mdp, slice, gamma), slice);
      for (std::size_t s = 0; s < ns; ++s) cur[s][g] = per_state[s][g];
    }
    if (prev_density[0][0] >= 0.0) {
      for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t g = 0; g < ns; ++g)
          min_monotone_margin =
              std::min(min_monotone_margin, cur[s][g] - prev_density[s][g]);
    }
    prev_density = cur;
    argmax_stable = improved.probs == policy.probs;
    policy = improved;
    iterations = it + 1;
  }

  double max_density_err = 0.0;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t g = 0; g < ns; ++g)
      max_density_err =
          std::max(max_density_err, std::abs(prev_density[s][g] - opt_density[s][g]));
  const bool argmax_equal = policy.probs == opt.greedy.probs;

  const long wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  result.rows.push_back({config.experiment, config.env, "gcrl-tabular", gamma, 0.0, 0,
                         iterations, max_density_err, min_monotone_margin, wall});
  result.gates.push_back({"gcrl_argmax_matches_optimality", argmax_equal,
                          "iterations=" + std::to_string(iterations)});
  result.gates.push_back(
      {"gcrl_density_matches_optimal", max_density_err < 1e-6, fmt_num(max_density_err)});
  result.gates.push_back({"gcrl_improvement_monotone", min_monotone_margin >= -1e-9,
                          fmt_num(min_monotone_margin)});
  return result;
}

SweepResult run_experiment(const ExperimentConfig& config) {
  if (config.experiment == "onpolicy-kl") return run_onpolicy_kl(config);
  if (config.experiment == "offpolicy-kl") return run_offpolicy_kl(config);
  if (config.experiment == "normalization") return run_normalization(config);
  if (config.experiment == "lambda-sweep") return run_lambda_sweep(config);
  if (config.experiment == "gcrl-tabular") return run_gcrl_tabular(config);
  throw ConfigError("unknown experiment: " + config.experiment);
}

SweepResult run_single(const ExperimentConfig& config, std::ostream* telemetry) {
  const Trial trial = make_trial(config, config.gamma, 0, 0, false);
  LearnerConfig lc = config.learner();
  RngStream train_rng = RngStream::child(
      config.root_seed, {kTrainSalt, 0, 0, method_salt(config.method), 0});
  if (config.method == "tabular-c" || config.method == "tabular-c-opt") {
    const EvalOutcome ev =
        train_and_eval(config.method, trial, config, config.gamma,
                       config.relabel_ratio, 0, 0);
    SweepResult result;
    result.rows.push_back({config.experiment, config.env, config.method, config.gamma,
                           config.relabel_ratio, 0, config.train_steps, ev.kl, ev.mass,
                           ev.wall_ms});
    return result;
  }
  NetModel model =
      NetModel::create(trial.embedding, config.hidden_dims, config.learning_rate, train_rng);
  if (telemetry) *telemetry << "step,loss,kl,mass_mean\n";
  const auto t0 = std::chrono::steady_clock::now();
  double loss = 0.0;
  for (std::size_t step = 1; step <= config.train_steps; ++step) {
    if (config.method == "mc-c")
      loss = mc_c_step(model, trial.buffer, lc, train_rng);
    else if (config.method == "td-c")
      loss = td_c_step(model, trial.buffer, trial.target, lc, train_rng);
    else if (config.method == "mixed-c")
      loss = mixed_c_step(model, trial.buffer, trial.target, lc, train_rng);
    else if (config.method == "q-hindsight")
      loss = q_hindsight_step(model, trial.buffer, trial.target, lc, train_rng);
    else
      throw ConfigError("unknown method: " + config.method);
    if (telemetry && step % 100 == 0) {
      NetModel snapshot = model;
      const auto cls = ClassifierModel::from_net(std::move(snapshot));
      const double kl =
          forward_kl(trial.truth, density_from_classifier(cls, trial.marginal));
      const double mass = mean_mass(normalization_mass(cls, trial.marginal));
      *telemetry << step << ',' << fmt_num(loss) << ',' << fmt_num(kl) << ','
                 << fmt_num(mass) << '\n';
      telemetry->flush();
    }
  }
  const auto cls = ClassifierModel::from_net(std::move(model));
  const double kl = forward_kl(trial.truth, density_from_classifier(cls, trial.marginal));
  const double mass = mean_mass(normalization_mass(cls, trial.marginal));
  const long wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  SweepResult result;
  result.rows.push_back({config.experiment, config.env, config.method, config.gamma,
                         config.relabel_ratio, 0, config.train_steps, kl, mass, wall});
  return result;
}

namespace {

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void add_cells_with_median(SvgPanel& panel, const std::vector<ResultRow>& rows,
                           const std::string& method, double gamma, bool use_mass,
                           const std::string& color, const std::string& label) {
  std::vector<double> lambdas;
  for (const auto& r : rows)
    if (r.method == method && r.gamma == gamma) lambdas.push_back(r.lambda);
  lambdas = sorted_unique(lambdas);
  std::vector<SvgPanel::Point> scatter, medline;
  for (double l : lambdas) {
    std::vector<double> vals;
    for (const auto& r : rows)
      if (r.method == method && r.gamma == gamma && r.lambda == l) {
        vals.push_back(use_mass ? r.mass : r.kl);
        scatter.push_back({l, use_mass ? r.mass : r.kl});
      }
    medline.push_back({l, median(vals)});
  }
  panel.add_scatter(scatter, color);
  panel.add_line(medline, color, false, label);
}

}  // namespace

std::string emit_plots(const std::vector<ResultRow>& rows, const std::string& layout) {
  if (rows.empty()) throw ConfigError("emit_plots: empty results");
  SvgFigure fig;
  std::vector<double> gammas;
  for (const auto& r : rows) gammas.push_back(r.gamma);
  gammas = sorted_unique(gammas);

  if (layout == "lambda-sweep") {
    for (double gamma : gammas) {
      SvgPanel& panel = fig.add_panel("gamma=" + fmt_num(gamma), "relabeling ratio",
                                      "KL divergence");
      add_cells_with_median(panel, rows, "q-hindsight", gamma, false, "#1f77b4",
                            "q-hindsight");
      std::vector<double> td = collect_kls(rows, "td-c", gamma);
      if (!td.empty()) {
        panel.add_hline(median(td), "#ff7f0e", true, "td-c");
        std::vector<SvgPanel::Point> dots;
        for (double v : td) dots.push_back({0.02, v});
        panel.add_scatter(dots, "#ff7f0e");
      }
      panel.add_vline(0.5 * (1.0 + gamma), "#555555", true, "(1+g)/2");
    }
    return fig.render();
  }
  if (layout == "normalization") {
    for (double gamma : gammas) {
      SvgPanel& panel =
          fig.add_panel("gamma=" + fmt_num(gamma), "relabeling ratio", "density mass");
      add_cells_with_median(panel, rows, "q-hindsight", gamma, true, "#1f77b4",
                            "q-hindsight");
      std::vector<double> cmass;
      for (const auto& r : rows)
        if (r.method == "mc-c" && r.gamma == gamma) cmass.push_back(r.mass);
      if (!cmass.empty()) panel.add_hline(median(cmass), "#ff7f0e", true, "mc-c");
      panel.add_hline(1.0, "#999999", true, "");
    }
    return fig.render();
  }
  if (layout == "onoff") {
    std::vector<std::string> methods;
    for (const auto& r : rows)
      if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
        methods.push_back(r.method);
    std::sort(methods.begin(), methods.end());
    std::string title;
    for (std::size_t i = 0; i < methods.size(); ++i)
      title += std::to_string(i) + ":" + methods[i] + " ";
    SvgPanel& panel = fig.add_panel(title, "method", "KL divergence");
    for (std::size_t i = 0; i < methods.size(); ++i) {
      std::vector<SvgPanel::Point> dots;
      std::vector<double> vals;
      for (const auto& r : rows)
        if (r.method == methods[i]) {
          dots.push_back({static_cast<double>(i), r.kl});
          vals.push_back(r.kl);
        }
      panel.add_scatter(dots, "#1f77b4");
      const double m = median(vals);
      panel.add_line({{static_cast<double>(i) - 0.25, m},
                      {static_cast<double>(i) + 0.25, m}},
                     "#d62728");
    }
    return fig.render();
  }
  throw ConfigError("emit_plots: unknown layout: " + layout);
}

SweepResult run_and_persist(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  {
    // Config echo + library version land before any training starts.
    std::ofstream echo(fs::path(config.output_dir) / "config_echo.json");
    json j = json::parse(config.to_json());
    j["library_version"] = kVersion;
    echo << j.dump(2) << '\n';
  }
  const SweepResult result = run_experiment(config);
  {
    std::ofstream csv(fs::path(config.output_dir) / "results.csv");
    result.write_csv(csv);
  }
  {
    json j;
    j["all_gates_passed"] = result.all_gates_passed();
    json gates = json::array();
    for (const auto& g : result.gates)
      gates.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
    j["gates"] = gates;
    std::ofstream summary(fs::path(config.output_dir) / "summary.json");
    summary << j.dump(2) << '\n';
  }
  if (config.experiment != "gcrl-tabular") {
    const std::string layout =
        config.experiment == "lambda-sweep"
            ? "lambda-sweep"
            : (config.experiment == "normalization" ? "normalization" : "onoff");
    std::ofstream svg(fs::path(config.output_dir) / ("plot_" + config.experiment + ".svg"));
    svg << emit_plots(result.rows, layout);
  }
  return result;
}

bool results_csv_equivalent(std::istream& a, std::istream& b) {
  const auto rows_a = SweepResult::read_csv(a);
  const auto rows_b = SweepResult::read_csv(b);
  if (rows_a.size() != rows_b.size()) return false;
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    const ResultRow& x = rows_a[i];
    const ResultRow& y = rows_b[i];
    if (x.experiment != y.experiment || x.env != y.env || x.method != y.method ||
        x.gamma != y.gamma || x.lambda != y.lambda || x.seed != y.seed ||
        x.step != y.step || x.kl != y.kl || x.mass != y.mass)
      return false;
  }
  return true;
}

}  // namespace clearn

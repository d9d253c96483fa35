#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "clearn/errors.hpp"
#include "clearn/experiment.hpp"

using namespace clearn;

namespace {

ExperimentConfig tiny_onpolicy() {
  ExperimentConfig c;
  c.experiment = "onpolicy-kl";
  c.gamma = 0.9;
  c.train_steps = 60;
  c.num_seeds = 2;
  c.num_trajectories = 20;
  c.trajectory_length = 30;
  c.root_seed = 12;
  c.workers = 4;
  return c;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  ExperimentConfig c;
  c.experiment = "lambda-sweep";
  c.gamma_grid = {0.5, 0.9};
  c.lambda_grid = {0.1, 0.9};
  c.w_clip = 7.5;
  c.td_exact_aprime = true;
  const ExperimentConfig back = ExperimentConfig::from_json_text(c.to_json());
  CHECK(back.experiment == c.experiment);
  CHECK(back.gamma_grid == c.gamma_grid);
  CHECK(back.lambda_grid == c.lambda_grid);
  CHECK(back.w_clip == c.w_clip);
  CHECK(back.td_exact_aprime == c.td_exact_aprime);

  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{bad"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"gamma": 1.5})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"batch_size": 1})"), ConfigError);
}

TEST_CASE("results csv round trip") {
  SweepResult r;
  r.rows.push_back({"onpolicy-kl", "gridworld5", "mc-c", 0.9, 0.0, 3, 1000, 0.125, 0.97, 42});
  r.rows.push_back({"onpolicy-kl", "gridworld5", "q-hindsight", 0.9, 0.95, 0, 1000,
                    0.5121, 0.3, 17});
  std::stringstream s;
  r.write_csv(s);
  const auto rows = SweepResult::read_csv(s);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "mc-c");
  CHECK(rows[0].kl == 0.125);
  CHECK(rows[1].lambda == 0.95);
  CHECK(rows[1].wall_ms == 17);
}

TEST_CASE("csv equivalence ignores wall time only") {
  SweepResult a, b;
  a.rows.push_back({"x", "e", "m", 0.9, 0.1, 0, 10, 0.5, 1.0, 100});
  b.rows.push_back({"x", "e", "m", 0.9, 0.1, 0, 10, 0.5, 1.0, 999});
  std::stringstream sa, sb;
  a.write_csv(sa);
  b.write_csv(sb);
  CHECK(results_csv_equivalent(sa, sb));

  b.rows[0].kl = 0.50000001;
  std::stringstream sc, sd;
  a.write_csv(sc);
  b.write_csv(sd);
  CHECK_FALSE(results_csv_equivalent(sc, sd));
}

TEST_CASE("emit_plots is deterministic and validates input") {
  CHECK_THROWS_AS(emit_plots({}, "lambda-sweep"), ConfigError);
  std::vector<ResultRow> rows;
  for (std::size_t seed = 0; seed < 3; ++seed) {
    for (double lam : {0.1, 0.5, 0.9})
      rows.push_back({"lambda-sweep", "gridworld5", "q-hindsight", 0.9, lam, seed, 500,
                      0.4 - 0.2 * lam + 0.01 * seed, 1.0, 5});
    rows.push_back({"lambda-sweep", "gridworld5", "td-c", 0.9, 0.0, seed, 500,
                    0.15 + 0.01 * seed, 1.0, 5});
  }
  const std::string svg1 = emit_plots(rows, "lambda-sweep");
  const std::string svg2 = emit_plots(rows, "lambda-sweep");
  CHECK(svg1 == svg2);
  CHECK(svg1.find("<svg") == 0);
  // The prediction reference line at (1 + gamma)/2 is drawn.
  CHECK(svg1.find("(1+g)/2") != std::string::npos);
  CHECK_THROWS_AS(emit_plots(rows, "nope"), ConfigError);

  CHECK(emit_plots(rows, "onoff").find("td-c") != std::string::npos);
  rows[0].mass = 0.7;
  CHECK(emit_plots(rows, "normalization").find("<svg") == 0);
}

TEST_CASE("sweep results are independent of the worker count") {
  ExperimentConfig c = tiny_onpolicy();
  c.workers = 1;
  const SweepResult serial = run_experiment(c);
  c.workers = 8;
  const SweepResult parallel = run_experiment(c);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].method == parallel.rows[i].method);
    CHECK(serial.rows[i].seed == parallel.rows[i].seed);
    CHECK(serial.rows[i].kl == parallel.rows[i].kl);
    CHECK(serial.rows[i].mass == parallel.rows[i].mass);
  }
}

TEST_CASE("rerunning a sweep reproduces csv and svg bytes") {
  namespace fs = std::filesystem;
  ExperimentConfig c = tiny_onpolicy();
  const fs::path base = fs::temp_directory_path() / "clearn_repro_test";
  fs::remove_all(base);
  auto run_once = [&](const std::string& sub) {
    ExperimentConfig cc = c;
    cc.output_dir = (base / sub).string();
    run_and_persist(cc);
    std::ifstream csv(base / sub / "results.csv");
    std::ifstream svg(base / sub / "plot_onpolicy-kl.svg");
    std::stringstream cs, ss;
    cs << csv.rdbuf();
    ss << svg.rdbuf();
    return std::pair{cs.str(), ss.str()};
  };
  const auto [csv1, svg1] = run_once("a");
  const auto [csv2, svg2] = run_once("b");
  CHECK(svg1 == svg2);
  std::stringstream a(csv1), b(csv2);
  CHECK(results_csv_equivalent(a, b));
  CHECK(fs::exists(base / "a" / "config_echo.json"));
  CHECK(fs::exists(base / "a" / "summary.json"));
  fs::remove_all(base);
}

TEST_CASE("run_single writes telemetry every 100 steps") {
  ExperimentConfig c;
  c.experiment = "single";
  c.method = "mc-c";
  c.train_steps = 300;
  c.num_trajectories = 20;
  c.trajectory_length = 30;
  c.root_seed = 3;
  std::stringstream telemetry;
  const SweepResult r = run_single(c, &telemetry);
  REQUIRE(r.rows.size() == 1);
  std::string line;
  std::getline(telemetry, line);
  CHECK(line == "step,loss,kl,mass_mean");
  int count = 0;
  while (std::getline(telemetry, line))
    if (!line.empty()) ++count;
  CHECK(count == 3);
}

TEST_CASE("unknown experiment and method are config errors") {
  ExperimentConfig c = tiny_onpolicy();
  c.experiment = "nope";
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
  c.experiment = "single";
  c.method = "nope";
  CHECK_THROWS_AS(run_single(c, nullptr), ConfigError);
}

#include "clearn/envs.hpp"

#include <cmath>

#include "clearn/errors.hpp"

namespace clearn {

NoisyGridworld::NoisyGridworld(std::size_t width, std::size_t height)
    : width_(width), height_(height) {
  if (width == 0 || height == 0)
    throw ConfigError("NoisyGridworld: width and height must be positive");
  const std::size_t n = num_cells();
  mdp_.num_states = n;
  mdp_.num_actions = kNumActions;
  mdp_.transition = Tensor3(n, kNumActions, n);
  mdp_.initial_dist.assign(n, 1.0 / static_cast<double>(n));
  for (std::size_t id = 0; id < n; ++id)
    for (std::size_t a = 0; a < kNumActions; ++a) {
      const Cell next = grid_step(cell_of(id), static_cast<GridAction>(a));
      mdp_.transition(id, a, cell_id(next)) = 1.0;
    }
  mdp_.validate();
}

Cell NoisyGridworld::grid_step(Cell c, GridAction a) const {
  switch (a) {
    case GridAction::kUp:
      if (c.y + 1 < height_) ++c.y;
      break;
    case GridAction::kDown:
      if (c.y > 0) --c.y;
      break;
    case GridAction::kLeft:
      if (c.x > 0) --c.x;
      break;
    case GridAction::kRight:
      if (c.x + 1 < width_) ++c.x;
      break;
  }
  return c;
}

CellObservation NoisyGridworld::observe(Cell c, RngStream& rng) const {
  // Half-open noise interval keeps nearest-integer decoding unambiguous.
  const double ex = rng.uniform01() - 0.5;
  const double ey = rng.uniform01() - 0.5;
  return {static_cast<double>(c.x) + ex, static_cast<double>(c.y) + ey};
}

Cell NoisyGridworld::decode(CellObservation obs) const {
  if (obs.x < -0.5 || obs.x >= width_ - 0.5 || obs.y < -0.5 || obs.y >= height_ - 0.5)
    throw ConfigError("decode: observation outside grid bounds");
  const auto round_half_up = [](double v) {
    return static_cast<std::size_t>(std::floor(v + 0.5));
  };
  return {round_half_up(obs.x), round_half_up(obs.y)};
}

std::vector<double> NoisyGridworld::center(std::size_t id) const {
  const Cell c = cell_of(id);
  return {static_cast<double>(c.x), static_cast<double>(c.y)};
}

std::vector<std::vector<double>> NoisyGridworld::all_centers() const {
  std::vector<std::vector<double>> out;
  out.reserve(num_cells());
  for (std::size_t id = 0; id < num_cells(); ++id) out.push_back(center(id));
  return out;
}

TabularMDP make_example1(std::size_t n) {
  if (n < 1) throw ConfigError("make_example1: n must be >= 1");
  TabularMDP mdp;
  mdp.num_states = n;
  mdp.num_actions = 1;
  mdp.transition = Tensor3(n, 1, n);
  for (std::size_t s = 0; s < n; ++s) mdp.transition(s, 0, s) = 1.0;
  mdp.initial_dist.assign(n, 1.0 / static_cast<double>(n));
  mdp.validate();
  return mdp;
}

TabularMDP make_example2() {
  TabularMDP mdp;
  mdp.num_states = 2;
  mdp.num_actions = 1;
  mdp.transition = Tensor3(2, 1, 2);
  mdp.transition(0, 0, 0) = 0.5;
  mdp.transition(0, 0, 1) = 0.5;
  mdp.transition(1, 0, 1) = 1.0;
  mdp.initial_dist = {1.0, 0.0};
  mdp.validate();
  return mdp;
}

TabularMDP make_env(const std::string& name) {
  if (name == "gridworld5") return NoisyGridworld(5, 5).mdp();
  if (name == "example2") return make_example2();
  const std::string prefix = "example1:";
  if (name.rfind(prefix, 0) == 0) {
    const std::string arg = name.substr(prefix.size());
    try {
      const long n = std::stol(arg);
      if (n < 1) throw ConfigError("example1 needs n >= 1");
      return make_example1(static_cast<std::size_t>(n));
    } catch (const std::invalid_argument&) {
      throw ConfigError("make_env: bad example1 argument: " + arg);
    }
  }
  throw ConfigError("make_env: unknown environment name: " + name);
}

}  // namespace clearn

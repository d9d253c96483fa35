#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clearn/mdp.hpp"
#include "clearn/rng.hpp"

namespace clearn {

struct Cell {
  std::size_t x = 0;
  std::size_t y = 0;
  bool operator==(const Cell&) const = default;
};

// Real-valued observation (i + eps_i, j + eps_j), eps ~ Unif[-0.5, 0.5).
struct CellObservation {
  double x = 0.0;
  double y = 0.0;
};

enum class GridAction : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

// 5x5 gridworld with deterministic moves clamped at the boundary and
// noisy continuous observations that still identify the cell uniquely.
class NoisyGridworld {
 public:
  NoisyGridworld(std::size_t width = 5, std::size_t height = 5);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t num_cells() const { return width_ * height_; }
  static constexpr std::size_t kNumActions = 4;

  std::size_t cell_id(Cell c) const { return c.y * width_ + c.x; }
  Cell cell_of(std::size_t id) const { return {id % width_, id / width_}; }

  Cell grid_step(Cell c, GridAction a) const;

  CellObservation observe(Cell c, RngStream& rng) const;
  Cell decode(CellObservation obs) const;

  // Cell-center coordinates (the zero-noise observation).
  std::vector<double> center(std::size_t id) const;
  std::vector<std::vector<double>> all_centers() const;

  // Uniform initial distribution over cells.
  const TabularMDP& mdp() const { return mdp_; }

 private:
  std::size_t width_, height_;
  TabularMDP mdp_;
};

// n states, single action, every state transitions to itself.
TabularMDP make_example1(std::size_t n);

// Two states, single action: p(s1 -> s1) = p(s1 -> s2) = 1/2, s2 absorbing.
TabularMDP make_example2();

// Environment registry: `gridworld5`, `example1:<n>`, `example2`.
TabularMDP make_env(const std::string& name);

}  // namespace clearn

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stokit/sde_model.hpp"

namespace stokit {

// States of one realization on a time grid; column k of `states` is X(times[k]).
struct Trajectory {
  std::string label;
  std::vector<double> times;
  Matrix states;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return times.size(); }
  int dim() const noexcept { return static_cast<int>(states.rows()); }
  Vector state(std::size_t k) const { return states.col(static_cast<Eigen::Index>(k)); }
  Vector terminal() const { return state(size() - 1); }
  // Component c across all nodes.
  std::vector<double> component(int c) const;
};

}  // namespace stokit

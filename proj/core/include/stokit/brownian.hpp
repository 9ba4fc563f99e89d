#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace stokit {

// A realized two-sided m-dimensional Brownian sample on a uniform grid.
//
// Node values are stored once and shared between a path and all of its Wiener
// shifts. A shifted path only moves its anchor (the raw node that plays the
// role of t = 0), and reads subtract the anchor value, so W(0) = 0 exactly and
// composition of shifts is exact.
class BrownianPath {
 public:
  // Wraps explicit node values (row-major, nodes x m). `origin` is the node at
  // t = 0; its value becomes the reference that all reads subtract.
  static BrownianPath from_values(double dt, std::size_t origin, int m,
                                  std::vector<double> values, std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  int m() const noexcept { return m_; }
  double dt() const noexcept { return dt_; }
  std::size_t nodes() const noexcept { return n_nodes_; }
  std::size_t origin() const noexcept { return anchor_; }
  int refinement_level() const noexcept { return level_; }

  double t_min() const noexcept { return time(0); }
  double t_max() const noexcept { return time(n_nodes_ - 1); }
  double time(std::size_t i) const noexcept {
    return (static_cast<double>(i) - static_cast<double>(anchor_)) * dt_;
  }

  // W_c(t_i).
  double w(std::size_t i, int c = 0) const noexcept {
    return (*raw_)[i * m_ + c] - (*raw_)[anchor_ * m_ + c];
  }
  // W_c(t_{i+1}) - W_c(t_i); independent of the anchor.
  double dw(std::size_t i, int c = 0) const noexcept {
    return (*raw_)[(i + 1) * m_ + c] - (*raw_)[i * m_ + c];
  }

  // Node index for a grid-aligned time; throws RangeError otherwise.
  std::size_t index_of(double t) const;
  bool on_grid(double t) const noexcept;

  // Every nodal value in row-major order, anchor subtracted.
  std::vector<double> values() const;

  // Subsamples every `factor`-th node counted from the origin (t_min and
  // t_max shrink to the nearest coarse nodes). Values are copied exactly.
  BrownianPath coarsen(int factor) const;

 private:
  friend BrownianPath sample_path(std::uint64_t, int, double, double, double);
  friend BrownianPath wiener_shift(const BrownianPath&, double);
  friend BrownianPath refine(const BrownianPath&, int);

  BrownianPath() = default;

  std::uint64_t seed_ = 0;
  int m_ = 1;
  double dt_ = 0.0;
  std::size_t n_nodes_ = 0;
  std::size_t anchor_ = 0;
  int level_ = 0;
  std::shared_ptr<const std::vector<double>> raw_;
};

// Two-sided path on [t_min, t_max] with spacing dt. Positive-time increments
// come from stream `positive_time`, negative-time increments from the
// independent stream `negative_time`; step k of either half is keyed by
// (seed, stream, k, component). t_min and t_max are rounded inward to the grid.
BrownianPath sample_path(std::uint64_t seed, int m, double t_min, double t_max, double dt);

// theta_s: (theta_s w)(t) = w(t + s) - w(s). s must be a grid time of the path.
BrownianPath wiener_shift(const BrownianPath& path, double s);

// Log-log regression slope of the largest increment magnitude against the
// lag (lags 1, 2, 4, ... up to a quarter of the path). Diagnostic only; it
// says nothing about the Hoelder constant.
double holder_exponent_estimate(const BrownianPath& path);

// Refines the grid to dt / factor. Original nodes are kept bit-exact; new
// nodes are Brownian-bridge samples keyed by (seed, node index, sublevel).
BrownianPath refine(const BrownianPath& path, int factor);

}  // namespace stokit

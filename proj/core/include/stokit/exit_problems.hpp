#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "stokit/parallel.hpp"
#include "stokit/sde_model.hpp"

namespace stokit {

enum class Face { left, right, bottom, top };

std::string to_string(Face face);
// "left", "right", "bottom", "top" (also "lower"/"upper" for 1D ends).
Face parse_face(const std::string& name);

// Uniform grid on an interval or rectangle. Nodes are numbered x-fastest.
// Gamma is a set of boundary faces; a corner node belongs to Gamma when
// either of its faces does.
class Domain {
 public:
  static Domain interval(double lo, double hi, double h, std::vector<Face> gamma);
  static Domain rectangle(std::array<double, 2> lo, std::array<double, 2> hi, std::array<double, 2> h,
                          std::vector<Face> gamma);

  int dim() const noexcept { return dim_; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  double h(int axis) const { return h_[axis]; }
  std::size_t count(int axis) const { return count_[axis]; }
  std::size_t nodes() const noexcept { return count_[0] * count_[1]; }
  double volume() const noexcept;

  std::size_t node(std::size_t ix, std::size_t iy = 0) const { return ix + count_[0] * iy; }
  Vector point(std::size_t node) const;
  bool is_boundary(std::size_t node) const;
  bool is_gamma(std::size_t node) const { return gamma_mask_[node]; }
  const std::vector<bool>& gamma_mask() const noexcept { return gamma_mask_; }
  const std::vector<Face>& gamma_faces() const noexcept { return gamma_faces_; }
  bool face_in_gamma(Face face) const;

  // Gamma swapped with the rest of the boundary.
  Domain complement() const;
  // Strictly inside.
  bool contains(const Vector& x) const;

 private:
  void build_mask();

  int dim_ = 1;
  std::array<double, 2> lo_{0.0, 0.0};
  std::array<double, 2> hi_{1.0, 0.0};
  std::array<double, 2> h_{1.0, 1.0};
  std::array<std::size_t, 2> count_{2, 1};
  std::vector<Face> gamma_faces_;
  std::vector<bool> gamma_mask_;
};

// Values on every node of a domain; boundary nodes hold their Dirichlet data.
struct GridField {
  Domain domain;
  std::vector<double> values;

  double at(std::size_t ix, std::size_t iy = 0) const { return values[domain.node(ix, iy)]; }
  // Linear (1D) or bilinear (2D) interpolation.
  double interpolate(const Vector& x) const;
};

// Finite-difference generator A g = grad g . b + (1/2) Tr(sigma sigma^T D^2 g)
// on interior nodes. Diffusion uses central second differences, drift
// central first differences unless the cell Peclet number 2|b_i| h / a_ii
// (a = sigma sigma^T) exceeds 2, where it switches to first-order upwinding.
// Mixed derivatives use the four-corner cross difference and require
// |a_xy| / (hx hy) <= a_ii / h_i^2 on both axes.
// `upwind` forces one-sided drift differences on every row.
enum class DriftStencil { automatic, upwind };

struct GeneratorMatrix {
  Eigen::SparseMatrix<double> interior;  // interior x interior
  Eigen::SparseMatrix<double> boundary;  // interior x all nodes, boundary columns only
  std::vector<std::size_t> interior_nodes;
  std::size_t upwinded_rows = 0;
};

// SolverError when a row has no coupling or an axis is degenerate (zero
// diffusion and zero drift) everywhere.
GeneratorMatrix assemble_generator(const SdeModel& model, const Domain& domain,
                                   DriftStencil stencil = DriftStencil::automatic);

// Solves A u = rhs on the interior with u = boundary_values on the boundary.
// Direct sparse LU up to 1e5 unknowns, BiCGSTAB (residual 1e-10) beyond.
GridField solve_dirichlet(const GeneratorMatrix& A, const Domain& domain, const std::vector<double>& boundary_values,
                          double rhs);

// A p = 0, p = 1 on Gamma, 0 elsewhere on the boundary.
GridField escape_probability(const SdeModel& model, const Domain& domain,
                             DriftStencil stencil = DriftStencil::automatic);
// A u = -1, u = 0 on the boundary.
GridField mean_residence_time(const SdeModel& model, const Domain& domain,
                              DriftStencil stencil = DriftStencil::automatic);
// (1/|D|) times the trapezoidal integral of the field.
double average_escape_probability(const GridField& field);

struct ExitOptions {
  bool bridge_correction = false;
  double t_max = 100.0;
  int workers = default_workers();
};

struct ExitStats {
  std::size_t n_paths = 0;
  std::size_t censored = 0;
  std::size_t gamma_hits = 0;
  std::vector<double> exit_times;  // per path in path order; +inf when censored
  std::vector<bool> hit_gamma;
  double mean_exit_time = 0.0;  // over uncensored paths
  double mean_exit_time_se = 0.0;
  double gamma_probability = 0.0;
  double gamma_probability_se = 0.0;
};

// Euler-Maruyama paths from x0 until the first node outside the open domain.
// The exit face is the one the last step crosses first; exact ties go to
// Gamma. With bridge_correction each surviving step also exits with the
// Brownian-bridge crossing probability exp(-2 d0 d1 / (a_ii dt)) per face.
// Path i draws its increments like sample_path(derive_seed(seed, i), ...).
// CensoringError when more than 10% of paths reach t_max.
ExitStats mc_exit(const SdeModel& model, const Vector& x0, const Domain& domain, std::size_t n_paths, double dt,
                  std::uint64_t master_seed, const ExitOptions& options = {});

// Empirical q-quantile (order statistic ceil(q n)), censored samples counting
// as +inf.
double exit_time_quantile(const ExitStats& stats, double q);

// Allowance for the discrete-monitoring bias of mc_exit against an FD field:
// the boundary effectively moves out by 0.5826 sqrt(a dt), so the bias is about
// that shift times the boundary gradient of the field. A safety factor of 1.5
// is applied.
double exit_bias_allowance(const SdeModel& model, const GridField& field, double dt);

struct PredictabilityWindow {
  double q = 0.5;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_paths = 0;
  std::size_t censored = 0;
};

// q-quantile of the first-exit time with a percentile bootstrap interval.
// CensoringError if more than a (1 - q) share of paths is censored.
PredictabilityWindow predictability_window(const SdeModel& model, const Vector& x0, const Domain& domain, double q,
                                           std::size_t n_paths, double dt, std::uint64_t seed,
                                           const ExitOptions& options = {}, std::size_t n_boot = 1000,
                                           double confidence = 0.95);

}  // namespace stokit

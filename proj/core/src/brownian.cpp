#include "stokit/brownian.hpp"

#include <cmath>
#include <string>

#include "stokit/errors.hpp"
#include "stokit/random.hpp"

namespace stokit {
namespace {

// Relative slack used when deciding whether a time sits on the grid.
constexpr double kGridSlack = 1e-9;

std::size_t steps_within(double span, double dt) {
  const double k = span / dt;
  const double r = std::round(k);
  if (std::abs(k - r) <= kGridSlack * std::max(1.0, r)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::floor(k));
}

}  // namespace

BrownianPath BrownianPath::from_values(double dt, std::size_t origin, int m,
                                       std::vector<double> values, std::uint64_t seed) {
  if (!(dt > 0.0)) throw ValidationError("BrownianPath: dt must be positive");
  if (m < 1) throw ValidationError("BrownianPath: m must be at least 1");
  if (values.empty() || values.size() % static_cast<std::size_t>(m) != 0)
    throw ValidationError("BrownianPath: value count must be a positive multiple of m");
  const std::size_t n = values.size() / static_cast<std::size_t>(m);
  if (origin >= n) throw ValidationError("BrownianPath: origin outside the node range");
  BrownianPath p;
  p.seed_ = seed;
  p.m_ = m;
  p.dt_ = dt;
  p.n_nodes_ = n;
  p.anchor_ = origin;
  p.raw_ = std::make_shared<const std::vector<double>>(std::move(values));
  return p;
}

bool BrownianPath::on_grid(double t) const noexcept {
  const double k = t / dt_ + static_cast<double>(anchor_);
  const double r = std::round(k);
  if (std::abs(k - r) > kGridSlack * std::max(1.0, std::abs(r))) return false;
  return r >= 0.0 && r <= static_cast<double>(n_nodes_ - 1);
}

std::size_t BrownianPath::index_of(double t) const {
  const double k = t / dt_ + static_cast<double>(anchor_);
  const double r = std::round(k);
  if (std::abs(k - r) > kGridSlack * std::max(1.0, std::abs(r)))
    throw RangeError("time " + std::to_string(t) + " is not on the path grid");
  if (r < 0.0 || r > static_cast<double>(n_nodes_ - 1))
    throw RangeError("time " + std::to_string(t) + " is outside the path window [" +
                     std::to_string(t_min()) + ", " + std::to_string(t_max()) + "]");
  return static_cast<std::size_t>(r);
}

std::vector<double> BrownianPath::values() const {
  std::vector<double> out(n_nodes_ * m_);
  for (std::size_t i = 0; i < n_nodes_; ++i)
    for (int c = 0; c < m_; ++c) out[i * m_ + c] = w(i, c);
  return out;
}

BrownianPath BrownianPath::coarsen(int factor) const {
  if (factor < 1) throw ValidationError("coarsen: factor must be at least 1");
  const std::size_t f = static_cast<std::size_t>(factor);
  const std::size_t first = anchor_ % f;
  const std::size_t count = (n_nodes_ - 1 - first) / f + 1;
  auto raw = std::make_shared<std::vector<double>>(count * m_);
  for (std::size_t k = 0; k < count; ++k)
    for (int c = 0; c < m_; ++c) (*raw)[k * m_ + c] = (*raw_)[(first + k * f) * m_ + c];
  BrownianPath p = *this;
  p.dt_ = dt_ * factor;
  p.n_nodes_ = count;
  p.anchor_ = (anchor_ - first) / f;
  p.raw_ = std::move(raw);
  return p;
}

BrownianPath sample_path(std::uint64_t seed, int m, double t_min, double t_max, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("sample_path: dt must be positive");
  if (m < 1) throw ValidationError("sample_path: m must be at least 1");
  if (!(t_min <= 0.0 && 0.0 <= t_max) || !std::isfinite(t_min) || !std::isfinite(t_max))
    throw ValidationError("sample_path: require t_min <= 0 <= t_max");

  const std::size_t n_neg = steps_within(-t_min, dt);
  const std::size_t n_pos = steps_within(t_max, dt);
  const std::size_t n = n_neg + n_pos + 1;
  const double sqrt_dt = std::sqrt(dt);

  auto raw = std::make_shared<std::vector<double>>(n * m, 0.0);
  auto& v = *raw;
  for (std::size_t k = 0; k < n_pos; ++k) {
    const std::size_t i = n_neg + k;
    for (int c = 0; c < m; ++c)
      v[(i + 1) * m + c] = v[i * m + c] + sqrt_dt * standard_normal(seed, stream::positive_time, k, c);
  }
  for (std::size_t k = 0; k < n_neg; ++k) {
    const std::size_t i = n_neg - k;
    for (int c = 0; c < m; ++c)
      v[(i - 1) * m + c] = v[i * m + c] + sqrt_dt * standard_normal(seed, stream::negative_time, k, c);
  }

  BrownianPath p;
  p.seed_ = seed;
  p.m_ = m;
  p.dt_ = dt;
  p.n_nodes_ = n;
  p.anchor_ = n_neg;
  p.raw_ = std::move(raw);
  return p;
}

BrownianPath wiener_shift(const BrownianPath& path, double s) {
  const std::size_t k = path.index_of(s);
  BrownianPath shifted = path;
  shifted.anchor_ = k;
  return shifted;
}

double holder_exponent_estimate(const BrownianPath& path) {
  const std::size_t n = path.nodes();
  if (n < 100) throw ValidationError("holder_exponent_estimate: need at least 100 nodes");

  std::vector<double> log_lag, log_inc;
  for (std::size_t lag = 1; lag <= (n - 1) / 4; lag *= 2) {
    double largest = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i)
      for (int c = 0; c < path.m(); ++c)
        largest = std::max(largest, std::abs(path.w(i + lag, c) - path.w(i, c)));
    if (!(largest > 0.0) || !std::isfinite(largest))
      throw ValidationError("holder_exponent_estimate: degenerate path (zero increments)");
    log_lag.push_back(std::log(static_cast<double>(lag) * path.dt()));
    log_inc.push_back(std::log(largest));
  }
  if (log_lag.size() < 2) throw ValidationError("holder_exponent_estimate: too few lags");

  const double k = static_cast<double>(log_lag.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_lag.size(); ++i) {
    mx += log_lag[i];
    my += log_inc[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < log_lag.size(); ++i) {
    sxy += (log_lag[i] - mx) * (log_inc[i] - my);
    sxx += (log_lag[i] - mx) * (log_lag[i] - mx);
  }
  return sxy / sxx;
}

BrownianPath refine(const BrownianPath& path, int factor) {
  if (factor < 2) throw ValidationError("refine: factor must be at least 2");
  const std::size_t f = static_cast<std::size_t>(factor);
  const int m = path.m();
  const std::size_t n = path.nodes();
  const std::size_t n_new = (n - 1) * f + 1;
  const double dt_new = path.dt() / factor;
  const auto& old = *path.raw_;
  const std::uint32_t level_tag = stream::refine_base + (static_cast<std::uint32_t>(path.level_) << 16);

  auto raw = std::make_shared<std::vector<double>>(n_new * m);
  auto& v = *raw;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < m; ++c) v[i * f * m + c] = old[i * m + c];

  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (int c = 0; c < m; ++c) {
      const double right = old[(i + 1) * m + c];
      double left = old[i * m + c];
      for (std::size_t j = 1; j < f; ++j) {
        // Bridge from the previous sub-node to the right endpoint, f - j + 1 sub-steps away.
        const double remaining = static_cast<double>(f - j + 1);
        const double mean = left + (right - left) / remaining;
        const double var = dt_new * (remaining - 1.0) / remaining;
        const double z = standard_normal(path.seed_, level_tag + static_cast<std::uint32_t>(j), i, c);
        left = mean + std::sqrt(var) * z;
        v[(i * f + j) * m + c] = left;
      }
    }
  }

  BrownianPath p = path;
  p.dt_ = dt_new;
  p.n_nodes_ = n_new;
  p.anchor_ = path.anchor_ * f;
  p.level_ = path.level_ + 1;
  p.raw_ = std::move(raw);
  return p;
}

}  // namespace stokit

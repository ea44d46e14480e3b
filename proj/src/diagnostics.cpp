#include "stocc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "stocc/error.hpp"
#include "stocc/kernels/kernels.hpp"

namespace stocc {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
}  // namespace

double mean(std::span<const double> x) {
  require(!x.empty(), "mean of an empty vector");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  require(x.size() >= 2, "variance needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

double quantile(std::span<const double> x, double prob) {
  require(!x.empty(), "quantile of an empty vector");
  require(prob >= 0.0 && prob <= 1.0, "quantile probability must lie in [0, 1]");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double h = (static_cast<double>(s.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double iqr(std::span<const double> x) { return quantile(x, 0.75) - quantile(x, 0.25); }

double normal_reference_bandwidth(std::span<const double> x) {
  const double s = sd(x);
  const double r = iqr(x) / 1.349;
  const double spread = r > 0.0 ? std::min(s, r) : s;
  return 1.06 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

double mse(std::span<const double> estimates, std::span<const double> truths) {
  require(estimates.size() == truths.size(), "mse: estimate and truth shapes differ");
  require(!estimates.empty(), "mse of empty arrays");
  return kernels::sum_sq_diff(estimates, truths) / static_cast<double>(estimates.size());
}

std::vector<BiasBin> bias_curve(std::span<const double> psi_hat, std::span<const double> psi_true,
                                int n_bins) {
  require(n_bins >= 2, "bias curve needs at least two bins");
  require(psi_hat.size() == psi_true.size(), "bias curve: estimate and truth shapes differ");
  std::vector<BiasBin> bins(n_bins);
  std::vector<double> sum_hat(n_bins, 0.0), sum_true(n_bins, 0.0);
  const double width = 1.0 / n_bins;
  for (int b = 0; b < n_bins; ++b) {
    bins[b].lower = b * width;
    bins[b].upper = (b + 1) * width;
  }
  for (std::size_t k = 0; k < psi_true.size(); ++k) {
    const double t = psi_true[k];
    if (!(t >= 0.0 && t <= 1.0)) continue;
    const int b = std::min(n_bins - 1, static_cast<int>(t * n_bins));
    sum_hat[b] += psi_hat[k];
    sum_true[b] += t;
    ++bins[b].count;
  }
  for (int b = 0; b < n_bins; ++b) {
    auto& bin = bins[b];
    bin.empty = bin.count == 0;
    bin.mean_estimate = bin.empty ? kNaN : sum_hat[b] / static_cast<double>(bin.count);
    bin.mean_truth = bin.empty ? kNaN : sum_true[b] / static_cast<double>(bin.count);
  }
  return bins;
}

double DensityGrid::integral() const {
  if (x_grid.size() < 2 || y_grid.size() < 2) return 0.0;
  const double dx = x_grid[1] - x_grid[0];
  const double dy = y_grid[1] - y_grid[0];
  return std::accumulate(density.begin(), density.end(), 0.0) * dx * dy;
}

std::vector<double> DensityGrid::contour_levels() const {
  std::vector<double> sorted;
  for (double d : density) {
    if (d > 0.0) sorted.push_back(d);
  }
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  std::vector<double> levels;
  if (sorted.empty()) return levels;
  double acc = 0.0;
  std::size_t k = 0;
  for (int decile = 1; decile <= 9; ++decile) {
    const double target = total * decile / 10.0;
    while (k < sorted.size() && acc + sorted[k] < target) acc += sorted[k++];
    levels.push_back(sorted[std::min(k, sorted.size() - 1)]);
  }
  std::reverse(levels.begin(), levels.end());
  return levels;
}

std::vector<int> DensityGrid::level_bins() const {
  std::vector<std::size_t> idx(density.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return density[a] > density[b]; });
  double total = 0.0;
  for (double d : density) total += std::max(0.0, d);
  std::vector<int> bins(density.size(), 0);
  if (!(total > 0.0)) return bins;
  double acc = 0.0;
  for (std::size_t k : idx) {
    if (!(density[k] > 0.0)) break;
    acc += density[k];
    const double frac = std::min(1.0, acc / total);
    bins[k] = std::clamp(11 - static_cast<int>(std::ceil(frac * 10.0 - 1e-12)), 1, 10);
  }
  return bins;
}

DensityGrid kde2d(std::span<const double> xs, std::span<const double> ys, int grid_n) {
  require(xs.size() == ys.size(), "kde2d: coordinate lengths differ");
  require(grid_n >= 2, "kde2d: grid needs at least two nodes per axis");
  if (xs.size() < 2) throw DataError("kde2d needs at least two points");
  DensityGrid g;
  g.bandwidth_x = normal_reference_bandwidth(xs);
  g.bandwidth_y = normal_reference_bandwidth(ys);
  if (!(g.bandwidth_x > 0.0) || !(g.bandwidth_y > 0.0)) {
    throw DataError("kde2d: zero spread along an axis");
  }
  auto axis = [grid_n](std::span<const double> v, double h) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<double> grid(grid_n);
    const double a = *lo - h, b = *hi + h;
    for (int k = 0; k < grid_n; ++k) grid[k] = a + (b - a) * k / (grid_n - 1);
    return grid;
  };
  g.x_grid = axis(xs, g.bandwidth_x);
  g.y_grid = axis(ys, g.bandwidth_y);
  g.density.assign(static_cast<std::size_t>(grid_n) * grid_n, 0.0);
  const double norm = 1.0 / (static_cast<double>(xs.size()) * 2.0 * std::numbers::pi *
                             g.bandwidth_x * g.bandwidth_y);
  for (int ix = 0; ix < grid_n; ++ix) {
    for (int iy = 0; iy < grid_n; ++iy) {
      g.density[static_cast<std::size_t>(ix) * grid_n + iy] =
          norm * kernels::gaussian_sum2(g.x_grid[ix], g.y_grid[iy], xs, ys, 1.0 / g.bandwidth_x,
                                        1.0 / g.bandwidth_y);
    }
  }
  return g;
}

double PriorDensity::pdf(double x) const {
  switch (kind) {
    case Kind::uniform:
      return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
    case Kind::normal: {
      const double z = (x - a) / std::sqrt(b);
      return kInvSqrt2Pi / std::sqrt(b) * std::exp(-0.5 * z * z);
    }
    case Kind::inverse_gamma:
      if (x <= 0.0) return 0.0;
      return std::exp(a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x);
  }
  return 0.0;
}

std::string PriorDensity::describe() const {
  std::ostringstream os;
  os.precision(6);
  switch (kind) {
    case Kind::uniform: os << "U(" << a << ", " << b << ")"; break;
    case Kind::normal: os << "N(" << a << ", " << b << ")"; break;
    case Kind::inverse_gamma: os << "IG(" << a << ", " << b << ")"; break;
  }
  return os.str();
}

OverlapResult prior_posterior_overlap(const PriorDensity& prior, std::span<const double> draws) {
  require(draws.size() >= 100, "prior-posterior overlap needs at least 100 draws");
  if (prior.kind == PriorDensity::Kind::uniform) {
    require(prior.a < prior.b, "uniform prior bounds must be ordered");
  } else {
    require(prior.b > 0.0, "prior scale must be positive");
  }
  OverlapResult res;
  for (double d : draws) {
    if (prior.kind == PriorDensity::Kind::uniform && (d < prior.a || d > prior.b)) {
      ++res.outside_support;
    }
    if (prior.kind == PriorDensity::Kind::inverse_gamma && d <= 0.0) ++res.outside_support;
  }
  double h = normal_reference_bandwidth(draws);
  const auto [mn, mx] = std::minmax_element(draws.begin(), draws.end());
  if (!(h > 0.0)) h = std::max(1e-8, 1e-6 * std::max(1.0, std::abs(*mn)));
  double lo = *mn - 5.0 * h, hi = *mx + 5.0 * h;
  if (prior.kind == PriorDensity::Kind::uniform) {
    lo = prior.a;
    hi = prior.b;
  } else if (prior.kind == PriorDensity::Kind::inverse_gamma) {
    lo = std::max(lo, 0.0);
    if (hi <= lo) return res;
  }
  constexpr int kNodes = 2048;
  const double step = (hi - lo) / (kNodes - 1);
  const double norm = kInvSqrt2Pi / (static_cast<double>(draws.size()) * h);
  double total = 0.0;
  for (int k = 0; k < kNodes; ++k) {
    const double x = lo + step * k;
    const double post = norm * kernels::gaussian_sum(x, draws, 1.0 / h);
    const double w = (k == 0 || k == kNodes - 1) ? 0.5 : 1.0;
    total += w * std::min(prior.pdf(x), post);
  }
  res.percent = std::clamp(100.0 * total * step, 0.0, 100.0);
  return res;
}

namespace {

Band summarise_columns(const std::vector<std::vector<double>>& rows) {
  Band band;
  if (rows.empty()) return band;
  const std::size_t width = rows.front().size();
  std::vector<double> column(rows.size());
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) column[r] = rows[r][c];
    band.mean.push_back(mean(column));
    band.lower.push_back(quantile(column, 0.025));
    band.upper.push_back(quantile(column, 0.975));
  }
  return band;
}

}  // namespace

OccupancySummary occupancy_summaries(const std::vector<std::vector<double>>& psi_draws, int I,
                                     int T) {
  require(!psi_draws.empty(), "occupancy summaries need psi draws");
  const auto width = static_cast<std::size_t>(I) * T;
  std::vector<std::vector<double>> site(psi_draws.size(), std::vector<double>(I, 0.0));
  std::vector<std::vector<double>> year(psi_draws.size(), std::vector<double>(T, 0.0));
  for (std::size_t d = 0; d < psi_draws.size(); ++d) {
    require(psi_draws[d].size() == width, "psi draw length must be I*T");
    for (int i = 0; i < I; ++i) {
      for (int t = 0; t < T; ++t) {
        const double v = psi_draws[d][static_cast<std::size_t>(i) * T + t];
        site[d][i] += v;
        year[d][t] += v;
      }
    }
    for (auto& v : site[d]) v /= T;
    for (auto& v : year[d]) v /= I;
  }
  return {summarise_columns(site), summarise_columns(year)};
}

OccupancySummary occupancy_summaries(const PosteriorSamples& samples) {
  const auto width = static_cast<std::size_t>(samples.I) * samples.T;
  std::vector<std::vector<double>> draws;
  for (const auto& c : samples.chains) {
    require(c.psi.size() == c.draws * width, "psi draws are not stored");
    for (std::size_t d = 0; d < c.draws; ++d) {
      draws.emplace_back(c.psi.begin() + d * width, c.psi.begin() + (d + 1) * width);
    }
  }
  return occupancy_summaries(draws, samples.I, samples.T);
}

std::vector<std::optional<double>> naive_occupancy(const EncounterArray& data) {
  std::vector<std::optional<double>> out(data.primaries());
  for (int t = 0; t < data.primaries(); ++t) {
    int sampled = 0, detected = 0;
    for (int i = 0; i < data.sites(); ++i) {
      if (!data.any_survey(i, t)) continue;
      ++sampled;
      if (data.any_detection(i, t)) ++detected;
    }
    if (sampled > 0) out[t] = static_cast<double>(detected) / sampled;
  }
  return out;
}

Band detection_curve(const std::vector<std::vector<double>>& alpha_draws, const DesignMatrix& rows) {
  require(!alpha_draws.empty(), "detection curve needs alpha draws");
  std::vector<std::vector<double>> p(alpha_draws.size(), std::vector<double>(rows.rows()));
  for (std::size_t d = 0; d < alpha_draws.size(); ++d) {
    require(alpha_draws[d].size() == rows.cols(), "detection rows must align with alpha");
    rows.multiply(alpha_draws[d], p[d]);
    kernels::logistic(p[d], p[d]);
  }
  return summarise_columns(p);
}

Band detection_curve(const PosteriorSamples& samples, const DesignMatrix& rows) {
  require(rows.cols() == samples.n_alpha(), "detection rows must align with alpha");
  std::vector<std::vector<double>> draws;
  const std::size_t na = samples.n_alpha();
  for (const auto& c : samples.chains) {
    for (std::size_t d = 0; d < c.draws; ++d) {
      draws.emplace_back(c.alpha.begin() + d * na, c.alpha.begin() + (d + 1) * na);
    }
  }
  return detection_curve(draws, rows);
}

}  // namespace stocc

#include "stocc/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stocc/error.hpp"

namespace stocc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Halves every chain (dropping the middle draw of odd lengths).
ChainSet split_chains(const ChainSet& chains) {
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n = std::min(n, c.size());
  const std::size_t half = n / 2;
  ChainSet out;
  for (const auto& c : chains) {
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.begin() + (n - half), c.begin() + n);
  }
  return out;
}

struct Moments {
  std::vector<double> means, vars;
  double W = 0.0;          // mean within-chain variance
  double B_over_n = 0.0;   // variance of chain means
  double var_plus = 0.0;
};

Moments moments(const ChainSet& chains) {
  Moments m;
  const std::size_t k = chains.size();
  const auto n = static_cast<double>(chains.front().size());
  for (const auto& c : chains) {
    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    m.means.push_back(mean);
    m.vars.push_back(ss / (n - 1.0));
  }
  double grand = 0.0;
  for (double v : m.means) grand += v;
  grand /= static_cast<double>(k);
  for (std::size_t c = 0; c < k; ++c) {
    m.W += m.vars[c];
    if (k > 1) m.B_over_n += (m.means[c] - grand) * (m.means[c] - grand);
  }
  m.W /= static_cast<double>(k);
  if (k > 1) m.B_over_n /= static_cast<double>(k - 1);
  m.var_plus = (n - 1.0) / n * m.W + m.B_over_n;
  return m;
}

// Biased (divide by n) autocovariance at `lag`.
double autocovariance(const std::vector<double>& x, double mean, std::size_t lag) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
  return s / static_cast<double>(n);
}

}  // namespace

ConvergenceStat gelman_rubin(const ChainSet& chains) {
  require(chains.size() >= 2, "R-hat needs at least two chains");
  for (const auto& c : chains) require(c.size() >= 10, "R-hat needs at least 10 draws per chain");
  const Moments m = moments(split_chains(chains));
  if (!(m.W > 0.0)) return {kNaN, true};
  return {std::max(1.0, std::sqrt(m.var_plus / m.W)), false};
}

ConvergenceStat effective_sample_size(const ChainSet& chains) {
  require(!chains.empty(), "ESS needs at least one chain");
  std::size_t n_min = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n_min = std::min(n_min, c.size());
  require(n_min * chains.size() >= 100, "ESS needs at least 100 draws");
  const ChainSet split = split_chains(chains);
  const std::size_t n = split.front().size();
  const double total = static_cast<double>(n * split.size());
  const Moments m = moments(split);
  if (!(m.W > 0.0)) return {kNaN, true};

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < split.size(); ++c) acov += autocovariance(split[c], m.means[c], lag);
    acov /= static_cast<double>(split.size());
    // Within-chain variances use n-1; the lag-0 biased estimate is rescaled.
    if (lag == 0) return 1.0;
    return 1.0 - (m.W - acov) / m.var_plus;
  };

  double tau_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau_sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * tau_sum, 1.0 / std::log10(total));
  return {std::min(total, total / tau), false};
}

ConvergenceStat gelman_rubin(const PosteriorSamples& samples, std::string_view family,
                             std::size_t index) {
  return gelman_rubin(samples.chain_values(family, index));
}

ConvergenceStat effective_sample_size(const PosteriorSamples& samples, std::string_view family,
                                      std::size_t index) {
  return effective_sample_size(samples.chain_values(family, index));
}

}  // namespace stocc

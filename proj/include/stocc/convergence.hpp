#pragma once

// Split-chain R-hat and multi-chain effective sample size.

#include <string_view>
#include <vector>

#include "stocc/sampler.hpp"

namespace stocc {

struct ConvergenceStat {
  double value = 0.0;
  /// Set when the draws have no variance; `value` is then NaN.
  bool degenerate = false;
};

using ChainSet = std::vector<std::vector<double>>;

/// Split-chain potential scale reduction. Needs >= 2 chains of >= 10 draws;
/// chains are truncated to the shortest. Reported values are floored at 1.
ConvergenceStat gelman_rubin(const ChainSet& chains);
ConvergenceStat gelman_rubin(const PosteriorSamples& samples, std::string_view family,
                             std::size_t index = 0);

/// Autocorrelation-sum ESS over split chains, truncated with Geyer's initial
/// monotone sequence and capped at the total draw count. Needs >= 100 draws.
ConvergenceStat effective_sample_size(const ChainSet& chains);
ConvergenceStat effective_sample_size(const PosteriorSamples& samples, std::string_view family,
                                      std::size_t index = 0);

}  // namespace stocc

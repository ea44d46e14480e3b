#pragma once

// Samples directories: draws.csv (long format), summary.csv, manifest.json
// and a copy of the fitted coordinates.

#include <filesystem>
#include <string>

#include "stocc/json_io.hpp"
#include "stocc/sampler.hpp"

namespace stocc {

struct SamplesRecord {
  PriorSpec priors;  // resolved
  MCMCConfig config;
  double wall_seconds = 0.0;
  /// Include z and psi in draws.csv and summary.csv.
  bool full_draws = false;
  Json extra = Json::object();
};

/// Columns chain, draw, parameter, index, value (chain, draw and index are
/// one-based; index is the site-year for psi and z).
void write_draws(const std::filesystem::path& path, const PosteriorSamples& samples,
                 bool full_draws);

/// Columns parameter, index, name, mean, sd, q2.5, q97.5, rhat, ess.
void write_summary(const std::filesystem::path& path, const PosteriorSamples& samples,
                   bool full_draws);

void write_samples(const std::filesystem::path& dir, const PosteriorSamples& samples,
                   const SiteCoords& coords, const SamplesRecord& record);

struct LoadedSamples {
  PosteriorSamples samples;
  SiteCoords coords;
  Json manifest;
};

/// Rebuilds PosteriorSamples from draws.csv using the manifest shapes.
/// Families absent from the file (z, psi without full draws) stay empty.
LoadedSamples read_samples(const std::filesystem::path& dir);

}  // namespace stocc

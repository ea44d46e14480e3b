#pragma once

// Config-driven simulation studies: simulate -> fit -> diagnose for every
// scenario x sub-scenario x replicate, resumable through per-replicate job
// hashes, followed by single-threaded aggregation.

#include <filesystem>
#include <string>
#include <vector>

#include "stocc/json_io.hpp"
#include "stocc/sampler.hpp"

namespace stocc {

struct ScenarioRun {
  std::string id;
  std::vector<int> sub_scenarios{0};
  int replicates = 1;
  int I = 200;
  int T = 5;
  int J = 0;  // 0 keeps the scenario default
  MCMCConfig mcmc;
  PriorSpec priors;
};

struct ExperimentConfig {
  std::vector<ScenarioRun> scenarios;
  std::filesystem::path output_dir;
  std::uint64_t base_seed = 1;
  int threads = 1;
  int bias_bins = 20;
  int grid_n = 64;

  void validate() const;
};

/// Schema (all keys optional except scenarios):
///   output_dir, base_seed, threads, bias_bins, grid_n,
///   defaults: {replicates, I, T, J, sub_scenarios, mcmc, priors},
///   scenarios: "all" | [ {id, sub_scenarios: [..] | "all", replicates, I, T,
///                         J, mcmc, priors} ]
ExperimentConfig experiment_from_json(const Json& j);

struct ReplicateSummary {
  std::string scenario;
  int sub_scenario = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string job_hash;
  bool ok = false;
  std::string error;
  Json data;  // parsed summary.json
};

struct ExperimentResult {
  std::vector<ReplicateSummary> replicates;  // study order
  int computed = 0;
  int skipped = 0;
  int failed = 0;
};

/// OCC_THREADS, when set to a positive integer, overrides config.threads.
int resolve_threads(int configured);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Seed of one replicate; data and MCMC seeds are derived from it.
std::uint64_t replicate_seed(std::uint64_t base_seed, const std::string& scenario, int sub,
                             int replicate);

/// FNV-1a 64 of a string, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace stocc

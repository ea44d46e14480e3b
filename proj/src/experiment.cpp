#include "stocc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "stocc/convergence.hpp"
#include "stocc/csv.hpp"
#include "stocc/diagnostics.hpp"
#include "stocc/error.hpp"
#include "stocc/kernels/kernels.hpp"
#include "stocc/simulator.hpp"

namespace fs = std::filesystem;

namespace stocc {

namespace {

// Bump when replicate outputs change meaning; invalidates cached replicates.
constexpr int kStudyFormat = 1;

const std::vector<std::pair<std::string, std::string>> kDensityPairs = {
    {"beta_0", "alpha_0"}, {"beta_0", "beta_1"},  {"alpha_0", "alpha_1"}, {"alpha_0", "alpha_2"},
    {"alpha_1", "alpha_2"}, {"phi", "sigma2"},    {"rho", "sigma2T"}};

std::vector<int> all_subs() {
  std::vector<int> v(16);
  for (int k = 0; k < 16; ++k) v[k] = k;
  return v;
}

std::vector<int> parse_subs(const Json& j) {
  if (j.is_string()) {
    require(j.get<std::string>() == "all", "sub_scenarios must be a list or \"all\"");
    return all_subs();
  }
  require(j.is_array(), "sub_scenarios must be a list or \"all\"");
  std::vector<int> v;
  for (const auto& x : j) {
    require(x.is_number_integer(), "sub-scenario indices must be integers");
    v.push_back(x.get<int>());
  }
  return v;
}

ScenarioRun run_from_json(const Json& j, const ScenarioRun& base) {
  ScenarioRun r = base;
  if (j.contains("id")) r.id = j["id"].get<std::string>();
  if (j.contains("sub_scenarios")) r.sub_scenarios = parse_subs(j["sub_scenarios"]);
  if (j.contains("replicates")) r.replicates = j["replicates"].get<int>();
  if (j.contains("I")) r.I = j["I"].get<int>();
  if (j.contains("T")) r.T = j["T"].get<int>();
  if (j.contains("J")) r.J = j["J"].get<int>();
  if (j.contains("mcmc")) r.mcmc = mcmc_from_json(j["mcmc"], r.mcmc);
  if (j.contains("priors")) r.priors = priors_from_json(j["priors"], r.priors);
  return r;
}

double json_number(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) return NAN;
  return j[key].get<double>();
}

std::string fmt(double v) { return std::isfinite(v) ? csv::format(v) : "NA"; }

std::string fmt_json(const Json& j, const char* key) { return fmt(json_number(j, key)); }

PriorDensity prior_for(const std::string& name, const PriorSpec& p) {
  if (name.rfind("beta_", 0) == 0) {
    const auto k = std::stoul(name.substr(5));
    return PriorDensity::normal(p.beta_mean[k], p.beta_var[k]);
  }
  if (name.rfind("alpha_", 0) == 0) {
    const auto k = std::stoul(name.substr(6));
    return PriorDensity::normal(p.alpha_mean[k], p.alpha_var[k]);
  }
  if (name == "phi") return PriorDensity::uniform(p.phi->lower, p.phi->upper);
  if (name == "rho") return PriorDensity::uniform(p.rho.lower, p.rho.upper);
  if (name == "sigma2") return PriorDensity::inverse_gamma(p.sigma2.shape, p.sigma2.scale);
  return PriorDensity::inverse_gamma(p.sigma2T.shape, p.sigma2T.scale);
}

struct Job {
  const ScenarioRun* run;
  int sub;
  int replicate;
  std::uint64_t seed;
  ScenarioSpec spec;
  MCMCConfig mcmc;
  std::string hash;
  fs::path dir;
};

ScenarioSpec job_spec(const ScenarioRun& run, int sub) {
  ScenarioSpec spec = make_scenario(run.id, sub, run.I, run.T);
  if (run.J > 0 && run.J != spec.J) {
    spec.J = run.J;
    if (spec.design == DesignKind::bernoulli) spec.bernoulli_p.resize(run.J, 0.0);
  }
  spec.validate();
  return spec;
}

Json run_replicate(const Job& job) {
  const SimulatedDataset sim = simulate_dataset(job.spec, derive_seed(job.seed, 0));
  const PosteriorSamples samples =
      fit({sim.data, sim.cov, sim.coords}, job.run->priors, job.mcmc);
  const PriorSpec priors = resolve_priors(job.run->priors, sim.cov.occ.cols(),
                                          sim.cov.det.cols(), sim.coords);
  const ModelParams& truth = sim.truth.params;
  const std::size_t SY = sim.data.site_years();
  const bool multi = samples.chains.size() >= 2;

  Json params = Json::array();
  double rhat_max = 0.0;
  bool converged = multi;
  auto add_param = [&](const std::string& name, const std::string& label, const char* family,
                       std::size_t index, double true_value) {
    const auto chains = samples.chain_values(family, index);
    std::vector<double> pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    Json p = {{"name", name}, {"label", label}, {"true", true_value}};
    p["mean"] = mean(pooled);
    p["sd"] = pooled.size() >= 2 ? sd(pooled) : 0.0;
    p["lo"] = quantile(pooled, 0.025);
    p["hi"] = quantile(pooled, 0.975);
    bool enough = multi;
    for (const auto& c : chains) enough = enough && c.size() >= 10;
    if (enough) {
      const ConvergenceStat r = gelman_rubin(chains);
      p["rhat_degenerate"] = r.degenerate;
      if (!r.degenerate) {
        p["rhat"] = r.value;
        rhat_max = std::max(rhat_max, r.value);
      }
      converged = converged && !r.degenerate && r.value < 1.1;
    } else {
      converged = false;
    }
    if (pooled.size() >= 100) {
      const ConvergenceStat e = effective_sample_size(chains);
      if (!e.degenerate) p["ess"] = e.value;
      const PriorDensity prior = prior_for(name, priors);
      const OverlapResult o = prior_posterior_overlap(prior, pooled);
      p["ppo"] = o.percent;
      p["ppo_prior"] = prior.describe();
      p["ppo_outside_support"] = o.outside_support;
    }
    params.push_back(p);
  };
  for (std::size_t k = 0; k < samples.n_beta(); ++k) {
    add_param("beta_" + std::to_string(k), samples.beta_names[k], "beta", k, truth.beta[k]);
  }
  for (std::size_t k = 0; k < samples.n_alpha(); ++k) {
    add_param("alpha_" + std::to_string(k), samples.alpha_names[k], "alpha", k, truth.alpha[k]);
  }
  add_param("phi", "phi", "phi", 0, truth.phi);
  add_param("sigma2", "sigma2", "sigma2", 0, truth.sigma2);
  add_param("rho", "rho", "rho", 0, truth.rho);
  add_param("sigma2T", "sigma2T", "sigma2T", 0, truth.sigma2T);

  // Site-year posterior means and the hard constraints on every draw.
  std::vector<double> psi_hat(SY, 0.0);
  bool z_ok = true, probs_ok = true;
  std::size_t total = 0;
  std::vector<double> p_draw(sim.cov.det.rows());
  for (const auto& c : samples.chains) {
    for (std::size_t d = 0; d < c.draws; ++d) {
      for (std::size_t s = 0; s < SY; ++s) {
        const double v = c.psi[d * SY + s];
        psi_hat[s] += v;
        probs_ok = probs_ok && v > 0.0 && v < 1.0;
        const int i = static_cast<int>(s / sim.data.primaries());
        const int t = static_cast<int>(s % sim.data.primaries());
        if (sim.data.any_detection(i, t) && c.z[d * SY + s] != 1) z_ok = false;
      }
      // Detection probabilities of this draw.
      const std::span<const double> alpha(c.alpha.data() + d * samples.n_alpha(), samples.n_alpha());
      sim.cov.det.multiply(alpha, p_draw);
      kernels::logistic(p_draw, p_draw);
      for (double v : p_draw) probs_ok = probs_ok && v > 0.0 && v < 1.0;
      ++total;
    }
  }
  for (auto& v : psi_hat) v /= static_cast<double>(total);

  double low_sum = 0.0;
  std::size_t low_n = 0;
  for (std::size_t s = 0; s < SY; ++s) {
    if (sim.truth.psi[s] < 0.3) {
      low_sum += psi_hat[s] - sim.truth.psi[s];
      ++low_n;
    }
  }

  const OccupancySummary occ = occupancy_summaries(samples);
  const auto naive = naive_occupancy(sim.data);
  Json naive_json = Json::array();
  for (const auto& v : naive) naive_json.push_back(v ? Json(*v) : Json(nullptr));
  std::vector<double> true_year(sim.data.primaries(), 0.0);
  for (std::size_t s = 0; s < SY; ++s) true_year[s % sim.data.primaries()] += sim.truth.psi[s];
  for (auto& v : true_year) v /= sim.data.sites();

  double accept_phi = 0.0, accept_rho = 0.0;
  for (const auto& c : samples.chains) {
    accept_phi += c.accept_phi / static_cast<double>(samples.chains.size());
    accept_rho += c.accept_rho / static_cast<double>(samples.chains.size());
  }

  const double phi_hat = params[params.size() - 4]["mean"].get<double>();
  const double rho_hat = params[params.size() - 2]["mean"].get<double>();
  Json out = {{"status", "ok"},
              {"params", params},
              {"mse_psi", mse(psi_hat, sim.truth.psi)},
              {"mse_phi", (phi_hat - truth.phi) * (phi_hat - truth.phi)},
              {"mse_rho", (rho_hat - truth.rho) * (rho_hat - truth.rho)},
              {"rhat_max", rhat_max},
              {"converged", converged},
              {"bias_low", low_n ? Json(low_sum / static_cast<double>(low_n)) : Json(nullptr)},
              {"low_count", low_n},
              {"z_constraint_ok", z_ok},
              {"probs_ok", probs_ok},
              {"draws", total},
              {"acceptance", {{"phi", accept_phi}, {"rho", accept_rho}}},
              {"psi_hat", psi_hat},
              {"psi_true", sim.truth.psi},
              {"trend",
               {{"estimate", occ.year.mean},
                {"lower", occ.year.lower},
                {"upper", occ.year.upper},
                {"truth", true_year},
                {"naive", naive_json}}}};
  return out;
}

void write_atomically(const fs::path& path, const Json& j) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_json_file(tmp, j);
  fs::rename(tmp, path);
}

std::optional<Json> load_if_current(const fs::path& path, const std::string& hash) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    Json j = read_json_file(path);
    if (j.value("job_hash", "") == hash) return j;
  } catch (const DataError&) {
  }
  return std::nullopt;
}

std::string study_of(const std::string& scenario) { return scenario.substr(0, 1); }

void write_aggregates(const ExperimentConfig& cfg, const ExperimentResult& res) {
  const fs::path& out = cfg.output_dir;

  // Parameter columns in order of first appearance.
  std::vector<std::string> names;
  for (const auto& r : res.replicates) {
    if (!r.ok) continue;
    for (const auto& p : r.data["params"]) {
      const auto n = p["name"].get<std::string>();
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
  }
  std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
    auto rank = [](const std::string& s) {
      if (s.rfind("beta_", 0) == 0) return 0;
      if (s.rfind("alpha_", 0) == 0) return 1;
      if (s == "phi") return 2;
      if (s == "sigma2") return 3;
      if (s == "rho") return 4;
      return 5;
    };
    return std::make_pair(rank(a), a) < std::make_pair(rank(b), b);
  });
  auto find_param = [](const Json& data, const std::string& name) -> const Json* {
    for (const auto& p : data["params"]) {
      if (p["name"] == name) return &p;
    }
    return nullptr;
  };

  {
    csv::Writer w(out / "summary.csv");
    std::vector<std::string> header{"scenario", "sub_scenario", "replicate", "seed", "status"};
    for (const auto& n : names) {
      for (const char* suffix : {"_mean", "_true", "_lo", "_hi", "_rhat"}) header.push_back(n + suffix);
    }
    for (const char* c : {"mse_psi", "mse_phi", "mse_rho", "rhat_max", "converged", "bias_low",
                          "z_constraint_ok", "probs_ok", "error"}) {
      header.push_back(c);
    }
    w.row(header);
    for (const auto& r : res.replicates) {
      std::vector<std::string> row{r.scenario, std::to_string(r.sub_scenario),
                                   std::to_string(r.replicate + 1), std::to_string(r.seed),
                                   r.ok ? "ok" : "failed"};
      for (const auto& n : names) {
        const Json* p = r.ok ? find_param(r.data, n) : nullptr;
        for (const char* key : {"mean", "true", "lo", "hi", "rhat"}) {
          row.push_back(p ? fmt_json(*p, key) : "NA");
        }
      }
      if (r.ok) {
        for (const char* key : {"mse_psi", "mse_phi", "mse_rho", "rhat_max"}) {
          row.push_back(fmt_json(r.data, key));
        }
        row.push_back(r.data["converged"].get<bool>() ? "1" : "0");
        row.push_back(fmt_json(r.data, "bias_low"));
        row.push_back(r.data["z_constraint_ok"].get<bool>() ? "1" : "0");
        row.push_back(r.data["probs_ok"].get<bool>() ? "1" : "0");
        row.push_back("");
      } else {
        for (int k = 0; k < 8; ++k) row.push_back("NA");
        row.push_back(r.error);
      }
      w.row(row);
    }
  }

  {
    csv::Writer w(out / "mse_table.csv");
    w.row({"study", "scenario", "sub_scenario", "replicate", "mse_psi", "mse_phi", "mse_rho"});
    for (const auto& r : res.replicates) {
      if (!r.ok) continue;
      w.row({study_of(r.scenario), r.scenario, std::to_string(r.sub_scenario),
             std::to_string(r.replicate + 1), fmt_json(r.data, "mse_psi"),
             fmt_json(r.data, "mse_phi"), fmt_json(r.data, "mse_rho")});
    }
  }

  {
    csv::Writer w(out / "ppo.csv");
    w.row({"scenario", "sub_scenario", "replicate", "parameter", "prior", "ppo_percent",
           "outside_support", "high_overlap"});
    for (const auto& r : res.replicates) {
      if (!r.ok) continue;
      for (const auto& p : r.data["params"]) {
        if (!p.contains("ppo")) continue;
        const double v = p["ppo"].get<double>();
        w.row({r.scenario, std::to_string(r.sub_scenario), std::to_string(r.replicate + 1),
               p["name"].get<std::string>(), p["ppo_prior"].get<std::string>(), fmt(v),
               std::to_string(p["ppo_outside_support"].get<std::size_t>()), v >= 30.0 ? "1" : "0"});
      }
    }
  }

  {
    csv::Writer w(out / "trends.csv");
    w.row({"scenario", "sub_scenario", "replicate", "primary", "estimate", "lower", "upper",
           "truth", "naive"});
    for (const auto& r : res.replicates) {
      if (!r.ok) continue;
      const Json& tr = r.data["trend"];
      for (std::size_t t = 0; t < tr["estimate"].size(); ++t) {
        const Json& nv = tr["naive"][t];
        w.row({r.scenario, std::to_string(r.sub_scenario), std::to_string(r.replicate + 1),
               std::to_string(t + 1), fmt(tr["estimate"][t].get<double>()),
               fmt(tr["lower"][t].get<double>()), fmt(tr["upper"][t].get<double>()),
               fmt(tr["truth"][t].get<double>()), nv.is_null() ? "NA" : fmt(nv.get<double>())});
      }
    }
  }

  // Group replicates by (scenario, sub-scenario), preserving study order.
  std::vector<std::pair<std::string, int>> groups;
  std::map<std::pair<std::string, int>, std::vector<const ReplicateSummary*>> members;
  for (const auto& r : res.replicates) {
    if (!r.ok) continue;
    const auto key = std::make_pair(r.scenario, r.sub_scenario);
    if (!members.count(key)) groups.push_back(key);
    members[key].push_back(&r);
  }

  {
    csv::Writer psi(out / "psi_pairs.csv");
    psi.row({"scenario", "sub_scenario", "replicate", "site", "primary", "psi_true", "psi_hat"});
    csv::Writer bias(out / "bias_curves.csv");
    bias.row({"scenario", "sub_scenario", "bin", "lower", "upper", "count", "mean_estimate",
              "mean_truth", "empty"});
    for (const auto& key : groups) {
      std::vector<double> hat, truth;
      for (const ReplicateSummary* r : members[key]) {
        const auto h = r->data["psi_hat"].get<std::vector<double>>();
        const auto t = r->data["psi_true"].get<std::vector<double>>();
        const std::size_t T = r->data["trend"]["estimate"].size();
        for (std::size_t s = 0; s < h.size(); ++s) {
          psi.row({key.first, std::to_string(key.second), std::to_string(r->replicate + 1),
                   std::to_string(s / T + 1), std::to_string(s % T + 1), fmt(t[s]), fmt(h[s])});
        }
        hat.insert(hat.end(), h.begin(), h.end());
        truth.insert(truth.end(), t.begin(), t.end());
      }
      const auto bins = bias_curve(hat, truth, cfg.bias_bins);
      for (std::size_t b = 0; b < bins.size(); ++b) {
        bias.row({key.first, std::to_string(key.second), std::to_string(b + 1), fmt(bins[b].lower),
                  fmt(bins[b].upper), std::to_string(bins[b].count), fmt(bins[b].mean_estimate),
                  fmt(bins[b].mean_truth), bins[b].empty ? "1" : "0"});
      }
    }
  }

  for (const auto& [a, b] : kDensityPairs) {
    csv::Writer w(out / ("pair_density_" + a + "_" + b + ".csv"));
    w.row({"scenario", "sub_scenario", "x", "y", "density", "level", "bandwidth_x", "bandwidth_y",
           "true_x", "true_y"});
    for (const auto& key : groups) {
      std::vector<double> xs, ys;
      double tx = NAN, ty = NAN;
      for (const ReplicateSummary* r : members[key]) {
        const Json* pa = find_param(r->data, a);
        const Json* pb = find_param(r->data, b);
        if (!pa || !pb) continue;
        xs.push_back((*pa)["mean"].get<double>());
        ys.push_back((*pb)["mean"].get<double>());
        tx = (*pa)["true"].get<double>();
        ty = (*pb)["true"].get<double>();
      }
      if (xs.size() < 3) continue;
      DensityGrid g;
      try {
        g = kde2d(xs, ys, cfg.grid_n);
      } catch (const DataError&) {
        continue;
      }
      const auto levels = g.level_bins();
      for (std::size_t ix = 0; ix < g.x_grid.size(); ++ix) {
        for (std::size_t iy = 0; iy < g.y_grid.size(); ++iy) {
          w.row({key.first, std::to_string(key.second), fmt(g.x_grid[ix]), fmt(g.y_grid[iy]),
                 fmt(g.at(ix, iy)), std::to_string(levels[ix * g.y_grid.size() + iy]),
                 fmt(g.bandwidth_x), fmt(g.bandwidth_y), fmt(tx), fmt(ty)});
        }
      }
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!scenarios.empty(), "experiment needs at least one scenario");
  require(!output_dir.empty(), "experiment needs an output directory");
  require(threads >= 1, "thread count must be at least 1");
  require(bias_bins >= 2, "bias curves need at least two bins");
  require(grid_n >= 2, "density grids need at least two nodes");
  for (const auto& s : scenarios) {
    require(is_scenario_id(s.id), "unknown scenario id '" + s.id + "'");
    require(s.replicates >= 1, "replicates must be at least 1");
    require(!s.sub_scenarios.empty(), "scenario needs at least one sub-scenario");
    for (int sub : s.sub_scenarios) require(sub >= 0 && sub < 16, "sub-scenario must be in 0..15");
    require(s.I >= 2 && s.T >= 1, "scenario dimensions too small");
    s.mcmc.validate();
  }
}

ExperimentConfig experiment_from_json(const Json& j) {
  require(j.is_object(), "experiment config must be a JSON object");
  ExperimentConfig cfg;
  try {
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.bias_bins = j.value("bias_bins", cfg.bias_bins);
    cfg.grid_n = j.value("grid_n", cfg.grid_n);
    ScenarioRun base;
    if (j.contains("defaults")) base = run_from_json(j["defaults"], base);
    require(j.contains("scenarios"), "experiment config needs 'scenarios'");
    const Json& sc = j["scenarios"];
    if (sc.is_string()) {
      require(sc.get<std::string>() == "all", "scenarios must be a list or \"all\"");
      for (const auto& id : scenario_ids()) {
        ScenarioRun r = base;
        r.id = id;
        if (!j.contains("defaults") || !j["defaults"].contains("sub_scenarios")) {
          r.sub_scenarios = all_subs();
        }
        cfg.scenarios.push_back(r);
      }
    } else {
      require(sc.is_array(), "scenarios must be a list or \"all\"");
      for (const auto& s : sc) {
        if (s.is_string()) {
          ScenarioRun r = base;
          r.id = s.get<std::string>();
          cfg.scenarios.push_back(r);
        } else {
          cfg.scenarios.push_back(run_from_json(s, base));
        }
      }
    }
  } catch (const Json::exception& e) {
    throw UsageError(std::string("malformed experiment config: ") + e.what());
  }
  return cfg;
}

int resolve_threads(int configured) {
  if (const char* env = std::getenv("OCC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1, configured);
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t replicate_seed(std::uint64_t base_seed, const std::string& scenario, int sub,
                             int replicate) {
  const std::string key = scenario + "/" + std::to_string(sub) + "/" + std::to_string(replicate);
  return derive_seed(base_seed, std::stoull(fnv1a_hex(key), nullptr, 16));
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);

  std::vector<Job> jobs;
  for (const auto& run : config.scenarios) {
    for (int sub : run.sub_scenarios) {
      for (int rep = 0; rep < run.replicates; ++rep) {
        Job job{&run, sub, rep, replicate_seed(config.base_seed, run.id, sub, rep), {}, {}, {}, {}};
        job.spec = job_spec(run, sub);
        job.mcmc = run.mcmc;
        job.mcmc.seed = derive_seed(job.seed, 1);
        job.mcmc.threads = 1;
        const Json key = {{"format", kStudyFormat},
                          {"scenario", to_json(job.spec)},
                          {"mcmc", to_json(job.mcmc)},
                          {"priors", to_json(run.priors)},
                          {"seed", job.seed}};
        job.hash = fnv1a_hex(key.dump());
        char sub_dir[16], rep_dir[16];
        std::snprintf(sub_dir, sizeof sub_dir, "sub%02d", sub);
        std::snprintf(rep_dir, sizeof rep_dir, "rep%03d", rep + 1);
        job.dir = config.output_dir / "replicates" / run.id / sub_dir / rep_dir;
        jobs.push_back(std::move(job));
      }
    }
  }

  ExperimentResult result;
  result.replicates.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> computed{0}, skipped{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const Job& job = jobs[k];
      const fs::path summary = job.dir / "summary.json";
      if (load_if_current(summary, job.hash)) {
        ++skipped;
        continue;
      }
      fs::create_directories(job.dir);
      Json data;
      try {
        data = run_replicate(job);
      } catch (const std::exception& e) {
        data = {{"status", "failed"}, {"error", e.what()}};
      }
      data["job_hash"] = job.hash;
      data["scenario"] = job.run->id;
      data["sub_scenario"] = job.sub;
      data["replicate"] = job.replicate + 1;
      data["seed"] = job.seed;
      data["spec"] = to_json(job.spec);
      write_atomically(summary, data);
      ++computed;
    }
  };
  const int threads = std::min<int>(resolve_threads(config.threads),
                                    static_cast<int>(std::max<std::size_t>(1, jobs.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  result.computed = computed;
  result.skipped = skipped;

  Json entries = Json::array();
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Job& job = jobs[k];
    ReplicateSummary& r = result.replicates[k];
    r.scenario = job.run->id;
    r.sub_scenario = job.sub;
    r.replicate = job.replicate;
    r.seed = job.seed;
    r.job_hash = job.hash;
    r.data = read_json_file(job.dir / "summary.json");
    r.ok = r.data.value("status", "") == "ok";
    if (!r.ok) {
      r.error = r.data.value("error", "unknown failure");
      ++result.failed;
    }
    entries.push_back({{"scenario", r.scenario},
                       {"sub_scenario", r.sub_scenario},
                       {"replicate", r.replicate + 1},
                       {"job_hash", r.job_hash},
                       {"status", r.ok ? "ok" : "failed"},
                       {"path", fs::relative(job.dir, config.output_dir).generic_string()}});
  }

  write_aggregates(config, result);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json_file(config.output_dir / "manifest.json",
                  {{"base_seed", config.base_seed},
                   {"threads", threads},
                   {"replicates", entries},
                   {"computed", result.computed},
                   {"skipped", result.skipped},
                   {"failed", result.failed},
                   {"wall_seconds", wall}});
  return result;
}

}  // namespace stocc

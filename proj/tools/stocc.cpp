// Command-line front end: simulate, fit, diagnose, study, ingest, predict.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "stocc/convergence.hpp"
#include "stocc/csv.hpp"
#include "stocc/dataset_io.hpp"
#include "stocc/diagnostics.hpp"
#include "stocc/error.hpp"
#include "stocc/experiment.hpp"
#include "stocc/ingest.hpp"
#include "stocc/json_io.hpp"
#include "stocc/kernels/kernels.hpp"
#include "stocc/samples_io.hpp"
#include "stocc/sampler.hpp"
#include "stocc/simulator.hpp"

namespace fs = std::filesystem;
using namespace stocc;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;

  Json load_config() const { return config.empty() ? Json::object() : read_json_file(config); }
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "Random seed");
  auto* o = cmd->add_option("--out", c.out, "Output location");
  if (out_required) o->required();
  cmd->add_option("--config", c.config, "JSON configuration file");
}

std::string fmt(double v) { return std::isfinite(v) ? csv::format(v) : "NA"; }

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string scenario;
  std::optional<int> sub, sites, years, secondaries;
};

int cmd_simulate(const SimulateArgs& a) {
  Json cfg = a.common.load_config();
  if (!a.scenario.empty()) cfg["id"] = a.scenario;
  if (!cfg.contains("id")) throw UsageError("simulate needs --scenario or an 'id' in --config");
  if (a.sub) cfg["sub_scenario"] = *a.sub;
  if (a.sites) cfg["I"] = *a.sites;
  if (a.years) cfg["T"] = *a.years;
  if (a.secondaries) cfg["J"] = *a.secondaries;
  if (!cfg.contains("I")) cfg["I"] = 200;
  if (!cfg.contains("T")) cfg["T"] = 5;
  const ScenarioSpec spec = scenario_from_json(cfg);
  const std::uint64_t seed = a.common.seed.value_or(cfg.value("seed", std::uint64_t{1}));
  const SimulatedDataset sim = simulate_dataset(spec, seed);
  write_dataset(a.common.out, from_simulation(sim));
  const DesignReport rep = design_report(sim.data, spec);
  Json report = {{"design", to_string(spec.design)},
                 {"visit_histogram", rep.visit_histogram},
                 {"zero_visit_fraction", rep.zero_visit_fraction},
                 {"two_visit_fraction", rep.two_visit_fraction},
                 {"never_visited_fraction", rep.never_visited_fraction},
                 {"expected_histogram", rep.expected_histogram},
                 {"expected_never_visited", nullptr}};
  if (std::isfinite(rep.expected_never_visited)) report["expected_never_visited"] = rep.expected_never_visited;
  write_json_file(fs::path(a.common.out) / "design_report.json", report);
  std::cout << "simulated scenario " << spec.id << " (sub " << spec.sub_scenario << "): I="
            << spec.I << " T=" << spec.T << " J=" << spec.J << ", "
            << sim.data.surveyed_count() << " surveyed cells, " << sim.data.detection_count()
            << " detections -> " << a.common.out << "\n";
  return 0;
}

// fit -------------------------------------------------------------------------

struct FitArgs {
  Common common;
  std::string data;
  std::optional<int> chains, iter, burn, thin, neighbors, threads;
  bool full_draws = false;
};

int cmd_fit(const FitArgs& a) {
  const Json cfg = a.common.load_config();
  const Dataset ds = read_dataset(a.data);
  MCMCConfig mcmc = cfg.contains("mcmc") ? mcmc_from_json(cfg["mcmc"]) : MCMCConfig{};
  if (a.chains) mcmc.n_chains = *a.chains;
  if (a.iter) mcmc.n_iter = *a.iter;
  if (a.burn) mcmc.n_burn = *a.burn;
  if (a.thin) mcmc.thin = *a.thin;
  if (a.neighbors) mcmc.m_neighbors = *a.neighbors;
  mcmc.threads = resolve_threads(a.threads.value_or(mcmc.threads));
  if (a.common.seed) mcmc.seed = *a.common.seed;
  mcmc.validate();
  const PriorSpec raw = cfg.contains("priors") ? priors_from_json(cfg["priors"]) : PriorSpec{};
  const PriorSpec priors =
      resolve_priors(raw, ds.cov.occ.cols(), ds.cov.det.cols(), ds.coords);

  const auto t0 = std::chrono::steady_clock::now();
  const PosteriorSamples samples = fit({ds.data, ds.cov, ds.coords}, priors, mcmc);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  SamplesRecord rec;
  rec.priors = priors;
  rec.config = mcmc;
  rec.wall_seconds = wall;
  rec.full_draws = a.full_draws || cfg.value("full_draws", false);
  rec.extra = {{"dataset", fs::absolute(a.data).lexically_normal().string()},
               {"dataset_info", ds.info},
               {"simd", std::string(kernels::isa_name(kernels::active_isa()))}};
  write_samples(a.common.out, samples, ds.coords, rec);
  std::cout << "fitted " << mcmc.n_chains << " chains x " << mcmc.retained_per_chain()
            << " draws in " << wall << " s -> " << a.common.out << "\n";
  return 0;
}

// diagnose ----------------------------------------------------------------------

struct DiagnoseArgs {
  Common common;
  std::string samples;
  std::string data;
  int bins = 20;
};

// psi draws recomputed from beta, omega and eta on the dataset's design.
std::vector<std::vector<double>> psi_draws(const PosteriorSamples& s, const DesignMatrix& occ) {
  std::vector<std::vector<double>> out;
  const auto SY = static_cast<std::size_t>(s.I) * s.T;
  std::vector<double> lin(SY);
  for (const auto& c : s.chains) {
    for (std::size_t d = 0; d < c.draws; ++d) {
      occ.multiply(std::span<const double>(c.beta.data() + d * s.n_beta(), s.n_beta()), lin);
      for (std::size_t k = 0; k < SY; ++k) {
        lin[k] += c.omega[d * s.I + k / s.T] + c.eta[d * s.T + k % s.T];
      }
      std::vector<double> psi(SY);
      kernels::logistic(lin, psi);
      out.push_back(std::move(psi));
    }
  }
  return out;
}

int cmd_diagnose(const DiagnoseArgs& a) {
  const Json cfg = a.common.load_config();
  const LoadedSamples loaded = read_samples(a.samples);
  const PosteriorSamples& s = loaded.samples;
  std::string data_dir = a.data;
  if (data_dir.empty()) data_dir = loaded.manifest["extra"].value("dataset", "");
  if (data_dir.empty()) throw UsageError("diagnose needs --data");
  const Dataset ds = read_dataset(data_dir);
  if (ds.data.sites() != s.I || ds.data.primaries() != s.T) {
    throw DataError("samples and dataset dimensions differ");
  }
  const int bins = cfg.value("bias_bins", a.bins);
  fs::create_directories(a.common.out);
  const PriorSpec priors = priors_from_json(loaded.manifest.at("priors"));

  const auto psi = psi_draws(s, ds.cov.occ);
  const OccupancySummary occ = occupancy_summaries(psi, s.I, s.T);
  {
    csv::Writer w(fs::path(a.common.out) / "occupancy_sites.csv");
    w.row({"site_id", "mean", "q2.5", "q97.5"});
    for (int i = 0; i < s.I; ++i) {
      w.row({std::to_string(i + 1), fmt(occ.site.mean[i]), fmt(occ.site.lower[i]),
             fmt(occ.site.upper[i])});
    }
  }
  const auto naive = naive_occupancy(ds.data);
  {
    csv::Writer w(fs::path(a.common.out) / "occupancy_years.csv");
    w.row({"primary", "mean", "q2.5", "q97.5", "naive"});
    for (int t = 0; t < s.T; ++t) {
      w.row({std::to_string(t + 1), fmt(occ.year.mean[t]), fmt(occ.year.lower[t]),
             fmt(occ.year.upper[t]), naive[t] ? fmt(*naive[t]) : "NA"});
    }
  }

  Json report = {{"draws", s.total_draws()}};
  Json params = Json::array();
  auto scalar = [&](const std::string& name, const char* family, std::size_t k,
                    const PriorDensity& prior) {
    const auto chains = s.chain_values(family, k);
    std::vector<double> pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    Json p = {{"name", name}, {"mean", mean(pooled)}, {"prior", prior.describe()}};
    if (chains.size() >= 2 && chains[0].size() >= 10) {
      const auto r = gelman_rubin(chains);
      p["rhat"] = r.degenerate ? Json(nullptr) : Json(r.value);
    }
    if (pooled.size() >= 100) {
      const auto e = effective_sample_size(chains);
      p["ess"] = e.degenerate ? Json(nullptr) : Json(e.value);
      const auto o = prior_posterior_overlap(prior, pooled);
      p["ppo_percent"] = o.percent;
      p["ppo_outside_support"] = o.outside_support;
    }
    if (ds.truth) {
      double tv = NAN;
      if (std::string(family) == "beta") tv = ds.truth->params.beta[k];
      else if (std::string(family) == "alpha") tv = ds.truth->params.alpha[k];
      else if (name == "phi") tv = ds.truth->params.phi;
      else if (name == "sigma2") tv = ds.truth->params.sigma2;
      else if (name == "rho") tv = ds.truth->params.rho;
      else tv = ds.truth->params.sigma2T;
      p["true"] = tv;
    }
    params.push_back(p);
  };
  for (std::size_t k = 0; k < s.n_beta(); ++k) {
    scalar(s.beta_names[k], "beta", k, PriorDensity::normal(priors.beta_mean[k], priors.beta_var[k]));
  }
  for (std::size_t k = 0; k < s.n_alpha(); ++k) {
    scalar(s.alpha_names[k], "alpha", k,
           PriorDensity::normal(priors.alpha_mean[k], priors.alpha_var[k]));
  }
  scalar("phi", "phi", 0, PriorDensity::uniform(priors.phi->lower, priors.phi->upper));
  scalar("sigma2", "sigma2", 0, PriorDensity::inverse_gamma(priors.sigma2.shape, priors.sigma2.scale));
  scalar("rho", "rho", 0, PriorDensity::uniform(priors.rho.lower, priors.rho.upper));
  scalar("sigma2T", "sigma2T", 0,
         PriorDensity::inverse_gamma(priors.sigma2T.shape, priors.sigma2T.scale));
  report["parameters"] = params;

  if (ds.truth) {
    std::vector<double> hat(psi.front().size(), 0.0);
    for (const auto& row : psi) {
      for (std::size_t k = 0; k < hat.size(); ++k) hat[k] += row[k] / static_cast<double>(psi.size());
    }
    report["mse_psi"] = mse(hat, ds.truth->psi);
    const auto curve = bias_curve(hat, ds.truth->psi, bins);
    csv::Writer w(fs::path(a.common.out) / "bias_curve.csv");
    w.row({"bin", "lower", "upper", "count", "mean_estimate", "mean_truth", "empty"});
    for (std::size_t b = 0; b < curve.size(); ++b) {
      w.row({std::to_string(b + 1), fmt(curve[b].lower), fmt(curve[b].upper),
             std::to_string(curve[b].count), fmt(curve[b].mean_estimate),
             fmt(curve[b].mean_truth), curve[b].empty ? "1" : "0"});
    }
  }
  if (cfg.contains("detection_rows")) {
    const auto rows = cfg["detection_rows"].get<std::vector<std::vector<double>>>();
    DesignMatrix m(rows.size(), s.alpha_names);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      require(rows[r].size() == s.n_alpha(), "detection_rows must match the alpha length");
      for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    const Band band = detection_curve(s, m);
    csv::Writer w(fs::path(a.common.out) / "detection_curve.csv");
    w.row({"row", "mean", "q2.5", "q97.5"});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      w.row({std::to_string(r + 1), fmt(band.mean[r]), fmt(band.lower[r]), fmt(band.upper[r])});
    }
  }
  write_json_file(fs::path(a.common.out) / "diagnostics.json", report);
  std::cout << "diagnostics -> " << a.common.out << "\n";
  return 0;
}

// study -------------------------------------------------------------------------

struct StudyArgs {
  Common common;
  std::optional<int> threads;
};

int cmd_study(const StudyArgs& a) {
  if (a.common.config.empty()) throw UsageError("study needs --config");
  ExperimentConfig cfg = experiment_from_json(a.common.load_config());
  if (!a.common.out.empty()) cfg.output_dir = a.common.out;
  if (a.common.seed) cfg.base_seed = *a.common.seed;
  if (a.threads) cfg.threads = *a.threads;
  const ExperimentResult res = run_experiment(cfg);
  std::cout << "study: " << res.replicates.size() << " replicates (" << res.computed
            << " computed, " << res.skipped << " reused, " << res.failed << " failed) -> "
            << cfg.output_dir.string() << "\n";
  return 0;
}

// ingest ------------------------------------------------------------------------

struct IngestArgs {
  Common common;
  std::string records, cells, covariates, species, years, months;
  std::optional<double> cell_size;
};

std::pair<int, int> parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError(std::string("malformed ") + what + " range '" + text + "' (expected A:B)");
  }
}

int cmd_ingest(const IngestArgs& a) {
  const Json cfg = a.common.load_config();
  const std::string species = !a.species.empty() ? a.species : cfg.value("species", "");
  if (species.empty()) throw UsageError("ingest needs --species");
  const double size = a.cell_size.value_or(cfg.value("cell_size", 0.0));
  if (!(size > 0.0)) throw UsageError("ingest needs a positive --cell-size");
  StudyWindow win;
  std::string years = a.years, months = a.months;
  if (years.empty() && cfg.contains("years")) {
    years = std::to_string(cfg["years"][0].get<int>()) + ":" + std::to_string(cfg["years"][1].get<int>());
  }
  if (months.empty() && cfg.contains("months")) {
    months = std::to_string(cfg["months"][0].get<int>()) + ":" + std::to_string(cfg["months"][1].get<int>());
  }
  if (years.empty()) throw UsageError("ingest needs --years A:B");
  std::tie(win.first_year, win.last_year) = parse_range(years, "year");
  if (!months.empty()) std::tie(win.first_month, win.last_month) = parse_range(months, "month");
  win.validate();

  const RecordTable records = RecordTable::read(a.records);
  const CellGrid grid = CellGrid::read(a.cells, size);
  std::optional<csv::Table> cov;
  if (!a.covariates.empty()) cov = csv::read(a.covariates);
  const IngestResult res = ingest_records(records, grid, species, win);
  const Dataset ds = build_ingested_dataset(res, grid, win, cov, species);
  write_dataset(a.common.out, ds);
  csv::Writer w(fs::path(a.common.out) / "rejected.csv");
  w.row({"line", "reason"});
  for (const auto& r : res.rejected) w.row({std::to_string(r.line), r.reason});
  std::cout << "ingested " << res.accepted << " records (" << res.rejected.size()
            << " rejected) into I=" << ds.data.sites() << " T=" << ds.data.primaries()
            << " J=" << ds.data.secondaries() << " -> " << a.common.out << "\n";
  return 0;
}

// predict -----------------------------------------------------------------------

struct PredictArgs {
  Common common;
  std::string samples, sites;
  std::optional<int> neighbors;
};

int cmd_predict(const PredictArgs& a) {
  const Json cfg = a.common.load_config();
  const LoadedSamples loaded = read_samples(a.samples);
  const PosteriorSamples& s = loaded.samples;
  const int m = a.neighbors.value_or(
      cfg.value("m_neighbors", loaded.manifest["mcmc"].value("m_neighbors", 5)));
  const Json info = loaded.manifest["extra"].value("dataset_info", Json::object());
  const Json stdz = info.value("standardization", Json::object());

  const csv::Table table = csv::read(a.sites);
  const std::size_t c_id = table.column("site_id"), c_lat = table.column("lat"),
                    c_lon = table.column("lon");
  const auto c_primary = table.find_column("primary");
  std::vector<long long> ids;
  std::map<long long, std::size_t> id_index;
  std::vector<Point> points;
  for (const auto& row : table.rows) {
    const long long id = csv::parse_int(row[c_id], "site_id");
    if (id_index.count(id)) continue;
    id_index[id] = ids.size();
    ids.push_back(id);
    points.push_back({csv::parse_double(row[c_lat], "lat"), csv::parse_double(row[c_lon], "lon")});
  }
  const std::size_t n = ids.size();
  const auto T = static_cast<std::size_t>(s.T);
  DesignMatrix occ(n * T, s.beta_names);
  std::vector<std::uint8_t> seen(n * T, 0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t site = id_index.at(csv::parse_int(row[c_id], "site_id"));
    std::vector<std::size_t> years;
    if (c_primary) {
      const long long t = csv::parse_int(row[*c_primary], "primary");
      if (t < 1 || t > static_cast<long long>(T)) throw DataError("primary out of range");
      years.push_back(static_cast<std::size_t>(t - 1));
    } else {
      for (std::size_t t = 0; t < T; ++t) years.push_back(t);
    }
    for (std::size_t c = 0; c < s.n_beta(); ++c) {
      const std::string& name = s.beta_names[c];
      double v = 1.0;
      if (name != kInterceptName) {
        std::string source = name;
        double mu = 0.0, sdv = 1.0;
        if (stdz.contains(name)) {
          source = stdz[name].value("source", name);
          mu = stdz[name].value("mean", 0.0);
          sdv = stdz[name].value("sd", 1.0);
        }
        const auto col = table.find_column(source);
        if (!col) throw DataError("new-sites file lacks covariate column '" + source + "'");
        v = (csv::parse_double(row[*col], source) - mu) / sdv;
      }
      for (std::size_t t : years) occ(site * T + t, c) = v;
    }
    for (std::size_t t : years) seen[site * T + t] = 1;
  }
  for (auto f : seen) {
    if (!f) throw DataError("new-sites file does not cover every site and primary occasion");
  }
  const std::uint64_t seed = a.common.seed.value_or(cfg.value("seed", std::uint64_t{1}));
  const auto draws = predict(s, loaded.coords, points, occ, m, seed);

  csv::Writer w(a.common.out);
  w.row({"site_id", "primary", "mean", "sd", "q2.5", "q97.5"});
  std::vector<double> col(draws.size());
  for (std::size_t k = 0; k < n * T; ++k) {
    for (std::size_t d = 0; d < draws.size(); ++d) col[d] = draws[d][k];
    w.row({std::to_string(ids[k / T]), std::to_string(k % T + 1), fmt(mean(col)),
           fmt(col.size() >= 2 ? sd(col) : 0.0), fmt(quantile(col, 0.025)),
           fmt(quantile(col, 0.975))});
  }
  std::cout << "predicted " << n << " sites x " << T << " primaries -> " << a.common.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal occupancy models: simulation, fitting and diagnostics"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a scenario dataset");
  add_common(c_sim, sim.common);
  c_sim->add_option("--scenario", sim.scenario, "Scenario id (1-0 ... 3-2)");
  c_sim->add_option("--sub", sim.sub, "Sub-scenario 0..15");
  c_sim->add_option("--sites", sim.sites, "Number of sites I (default 200)");
  c_sim->add_option("--years", sim.years, "Primary occasions T (default 5)");
  c_sim->add_option("--secondaries", sim.secondaries, "Secondary occasions J");

  FitArgs fit_args;
  auto* c_fit = app.add_subcommand("fit", "Fit the model to a dataset directory");
  add_common(c_fit, fit_args.common);
  c_fit->add_option("--data", fit_args.data, "Dataset directory")->required();
  c_fit->add_option("--chains", fit_args.chains);
  c_fit->add_option("--iter", fit_args.iter);
  c_fit->add_option("--burn", fit_args.burn);
  c_fit->add_option("--thin", fit_args.thin);
  c_fit->add_option("--neighbors", fit_args.neighbors);
  c_fit->add_option("--threads", fit_args.threads);
  c_fit->add_flag("--full-draws", fit_args.full_draws, "Also write z and psi draws");

  DiagnoseArgs diag;
  auto* c_diag = app.add_subcommand("diagnose", "Summaries, PPO and error against truth");
  add_common(c_diag, diag.common);
  c_diag->add_option("--samples", diag.samples, "Samples directory")->required();
  c_diag->add_option("--data", diag.data, "Dataset directory (defaults to the fitted one)");
  c_diag->add_option("--bins", diag.bins, "Bias-curve bins");

  StudyArgs study;
  auto* c_study = app.add_subcommand("study", "Run a simulation study from a JSON config");
  add_common(c_study, study.common, false);
  c_study->add_option("--threads", study.threads);

  IngestArgs ing;
  auto* c_ing = app.add_subcommand("ingest", "Build a dataset from occurrence records");
  add_common(c_ing, ing.common);
  c_ing->add_option("--records", ing.records, "Records CSV")->required();
  c_ing->add_option("--cells", ing.cells, "Cells CSV (cell_id, x, y centres)")->required();
  c_ing->add_option("--cell-size", ing.cell_size, "Cell side length");
  c_ing->add_option("--species", ing.species, "Focal species");
  c_ing->add_option("--years", ing.years, "Year window A:B");
  c_ing->add_option("--months", ing.months, "Month window A:B (default 1:12)");
  c_ing->add_option("--covariates", ing.covariates, "Cell covariate CSV keyed by cell_id");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Predict psi at new sites");
  add_common(c_pred, pred.common);
  c_pred->add_option("--samples", pred.samples, "Samples directory")->required();
  c_pred->add_option("--sites", pred.sites, "New sites CSV")->required();
  c_pred->add_option("--neighbors", pred.neighbors);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_fit->parsed()) return cmd_fit(fit_args);
    if (c_diag->parsed()) return cmd_diagnose(diag);
    if (c_study->parsed()) return cmd_study(study);
    if (c_ing->parsed()) return cmd_ingest(ing);
    if (c_pred->parsed()) return cmd_predict(pred);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const Json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

#include "stocc/samples_io.hpp"

#include <cmath>

#include "stocc/convergence.hpp"
#include "stocc/csv.hpp"
#include "stocc/dataset_io.hpp"
#include "stocc/diagnostics.hpp"
#include "stocc/error.hpp"

namespace fs = std::filesystem;

namespace stocc {

namespace {

std::vector<std::string> families(bool full) {
  std::vector<std::string> f{"beta", "alpha", "phi", "sigma2", "rho", "sigma2T", "omega", "eta"};
  if (full) {
    f.push_back("z");
    f.push_back("psi");
  }
  return f;
}

std::string element_name(const PosteriorSamples& s, const std::string& family, std::size_t k) {
  if (family == "beta") return s.beta_names[k];
  if (family == "alpha") return s.alpha_names[k];
  if (family == "omega") return "site " + std::to_string(k + 1);
  if (family == "eta") return "primary " + std::to_string(k + 1);
  if (family == "psi" || family == "z") {
    return "site " + std::to_string(k / s.T + 1) + " primary " + std::to_string(k % s.T + 1);
  }
  return family;
}

std::string stat(double v) { return std::isfinite(v) ? csv::format(v) : "NA"; }

}  // namespace

void write_draws(const fs::path& path, const PosteriorSamples& samples, bool full_draws) {
  csv::Writer w(path);
  w.row({"chain", "draw", "parameter", "index", "value"});
  auto& out = w.stream();
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& ch = samples.chains[c];
    for (std::size_t d = 0; d < ch.draws; ++d) {
      for (const auto& fam : families(full_draws)) {
        const std::size_t width = samples.family_size(fam);
        for (std::size_t k = 0; k < width; ++k) {
          double v = 0.0;
          if (fam == "beta") v = ch.beta[d * width + k];
          else if (fam == "alpha") v = ch.alpha[d * width + k];
          else if (fam == "phi") v = ch.phi[d];
          else if (fam == "sigma2") v = ch.sigma2[d];
          else if (fam == "rho") v = ch.rho[d];
          else if (fam == "sigma2T") v = ch.sigma2T[d];
          else if (fam == "omega") v = ch.omega[d * width + k];
          else if (fam == "eta") v = ch.eta[d * width + k];
          else if (fam == "z") v = ch.z[d * width + k];
          else v = ch.psi[d * width + k];
          out << (c + 1) << ',' << (d + 1) << ',' << fam << ',' << (k + 1) << ','
              << csv::format(v) << '\n';
        }
      }
    }
  }
}

void write_summary(const fs::path& path, const PosteriorSamples& samples, bool full_draws) {
  csv::Writer w(path);
  w.row({"parameter", "index", "name", "mean", "sd", "q2.5", "q97.5", "rhat", "ess"});
  const bool multi = samples.chains.size() >= 2;
  for (const auto& fam : families(full_draws)) {
    const std::size_t width = samples.family_size(fam);
    for (std::size_t k = 0; k < width; ++k) {
      const auto chains = samples.chain_values(fam, k);
      std::vector<double> pooled;
      for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
      double rhat = NAN, ess = NAN;
      bool enough = true;
      for (const auto& c : chains) enough = enough && c.size() >= 10;
      if (multi && enough) rhat = gelman_rubin(chains).value;
      if (pooled.size() >= 100) ess = effective_sample_size(chains).value;
      w.row({fam, std::to_string(k + 1), element_name(samples, fam, k), stat(mean(pooled)),
             stat(pooled.size() >= 2 ? sd(pooled) : NAN), stat(quantile(pooled, 0.025)),
             stat(quantile(pooled, 0.975)), stat(rhat), stat(ess)});
    }
  }
}

void write_samples(const fs::path& dir, const PosteriorSamples& samples, const SiteCoords& coords,
                   const SamplesRecord& record) {
  fs::create_directories(dir);
  write_draws(dir / "draws.csv", samples, record.full_draws);
  write_summary(dir / "summary.csv", samples, record.full_draws);
  write_coords(dir / "coords.csv", coords);
  Json accept = Json::array();
  for (const auto& c : samples.chains) {
    accept.push_back({{"phi", c.accept_phi}, {"rho", c.accept_rho}});
  }
  Json manifest = {{"I", samples.I},
                   {"T", samples.T},
                   {"beta_names", samples.beta_names},
                   {"alpha_names", samples.alpha_names},
                   {"chains", samples.chains.size()},
                   {"draws_per_chain", samples.chains.empty() ? 0 : samples.chains[0].draws},
                   {"full_draws", record.full_draws},
                   {"priors", to_json(record.priors)},
                   {"mcmc", to_json(record.config)},
                   {"seed", record.config.seed},
                   {"wall_seconds", record.wall_seconds},
                   {"acceptance", accept},
                   {"extra", record.extra}};
  write_json_file(dir / "manifest.json", manifest);
}

LoadedSamples read_samples(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw DataError("samples manifest not found: " + mpath.string());
  LoadedSamples out;
  out.manifest = read_json_file(mpath);
  PosteriorSamples& s = out.samples;
  std::size_t n_chains = 0, per_chain = 0;
  bool full = false;
  try {
    s.I = out.manifest.at("I").get<int>();
    s.T = out.manifest.at("T").get<int>();
    s.beta_names = out.manifest.at("beta_names").get<std::vector<std::string>>();
    s.alpha_names = out.manifest.at("alpha_names").get<std::vector<std::string>>();
    n_chains = out.manifest.at("chains").get<std::size_t>();
    per_chain = out.manifest.at("draws_per_chain").get<std::size_t>();
    full = out.manifest.at("full_draws").get<bool>();
  } catch (const Json::exception& e) {
    throw DataError("malformed samples manifest: " + std::string(e.what()));
  }
  out.coords = read_coords(dir / "coords.csv");
  const std::size_t nb = s.n_beta(), na = s.n_alpha();
  const auto I = static_cast<std::size_t>(s.I), T = static_cast<std::size_t>(s.T);
  s.chains.resize(n_chains);
  for (auto& c : s.chains) {
    c.draws = per_chain;
    c.beta.assign(per_chain * nb, NAN);
    c.alpha.assign(per_chain * na, NAN);
    c.phi.assign(per_chain, NAN);
    c.sigma2.assign(per_chain, NAN);
    c.rho.assign(per_chain, NAN);
    c.sigma2T.assign(per_chain, NAN);
    c.omega.assign(per_chain * I, NAN);
    c.eta.assign(per_chain * T, NAN);
    if (full) {
      c.z.assign(per_chain * I * T, 0);
      c.psi.assign(per_chain * I * T, NAN);
    }
  }
  const csv::Table table = csv::read(dir / "draws.csv");
  const std::size_t cc = table.column("chain"), cd = table.column("draw"),
                    cp = table.column("parameter"), ci = table.column("index"),
                    cv = table.column("value");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto chain = csv::parse_int(row[cc], "chain") - 1;
    const auto draw = csv::parse_int(row[cd], "draw") - 1;
    const auto index = csv::parse_int(row[ci], "index") - 1;
    const double v = csv::parse_double(row[cv], "value");
    const std::string& fam = row[cp];
    std::size_t width = 0;
    try {
      width = s.family_size(fam);
    } catch (const UsageError&) {
      throw DataError("draws.csv:" + std::to_string(table.line_numbers[r]) +
                      ": unknown parameter '" + fam + "'");
    }
    if (chain < 0 || chain >= static_cast<long long>(n_chains) || draw < 0 ||
        draw >= static_cast<long long>(per_chain) || index < 0 ||
        index >= static_cast<long long>(width) || ((fam == "z" || fam == "psi") && !full)) {
      throw DataError("draws.csv:" + std::to_string(table.line_numbers[r]) + ": out of range");
    }
    auto& c = s.chains[chain];
    const std::size_t at = static_cast<std::size_t>(draw) * width + static_cast<std::size_t>(index);
    if (fam == "beta") c.beta[at] = v;
    else if (fam == "alpha") c.alpha[at] = v;
    else if (fam == "phi") c.phi[at] = v;
    else if (fam == "sigma2") c.sigma2[at] = v;
    else if (fam == "rho") c.rho[at] = v;
    else if (fam == "sigma2T") c.sigma2T[at] = v;
    else if (fam == "omega") c.omega[at] = v;
    else if (fam == "eta") c.eta[at] = v;
    else if (fam == "z") c.z[at] = static_cast<std::uint8_t>(v != 0.0);
    else c.psi[at] = v;
  }
  for (const auto& c : s.chains) {
    for (const auto* v : {&c.beta, &c.alpha, &c.phi, &c.sigma2, &c.rho, &c.sigma2T, &c.omega,
                          &c.eta}) {
      for (double x : *v) {
        if (std::isnan(x)) throw DataError("draws.csv is incomplete");
      }
    }
  }
  return out;
}

}  // namespace stocc

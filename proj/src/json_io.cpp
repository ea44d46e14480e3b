#include "stocc/json_io.hpp"

#include <fstream>

#include "stocc/error.hpp"

namespace stocc {

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const Json::exception& e) {
    throw UsageError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

}  // namespace

Json to_json(const ModelParams& p) {
  return {{"beta", p.beta}, {"alpha", p.alpha}, {"phi", p.phi},
          {"sigma2", p.sigma2}, {"rho", p.rho}, {"sigma2T", p.sigma2T}};
}

ModelParams params_from_json(const Json& j) {
  ModelParams p;
  p.beta = get_or(j, "beta", p.beta);
  p.alpha = get_or(j, "alpha", p.alpha);
  p.phi = get_or(j, "phi", p.phi);
  p.sigma2 = get_or(j, "sigma2", p.sigma2);
  p.rho = get_or(j, "rho", p.rho);
  p.sigma2T = get_or(j, "sigma2T", p.sigma2T);
  return p;
}

Json to_json(const PriorSpec& p) {
  Json j;
  j["beta"] = {{"mean", p.beta_mean}, {"var", p.beta_var}};
  j["alpha"] = {{"mean", p.alpha_mean}, {"var", p.alpha_var}};
  j["sigma2"] = {{"shape", p.sigma2.shape}, {"scale", p.sigma2.scale}};
  j["sigma2T"] = {{"shape", p.sigma2T.shape}, {"scale", p.sigma2T.scale}};
  j["phi"] = p.phi ? Json{{"lower", p.phi->lower}, {"upper", p.phi->upper}} : Json(nullptr);
  j["rho"] = {{"lower", p.rho.lower}, {"upper", p.rho.upper}};
  return j;
}

PriorSpec priors_from_json(const Json& j, PriorSpec p) {
  require(j.is_object(), "priors must be a JSON object");
  auto coef = [&](const char* key, std::vector<double>& m, std::vector<double>& v) {
    if (!j.contains(key)) return;
    m = get_or(j[key], "mean", m);
    v = get_or(j[key], "var", v);
  };
  coef("beta", p.beta_mean, p.beta_var);
  coef("alpha", p.alpha_mean, p.alpha_var);
  auto ig = [&](const char* key, InverseGammaPrior& g) {
    if (!j.contains(key)) return;
    g.shape = get_or(j[key], "shape", g.shape);
    g.scale = get_or(j[key], "scale", g.scale);
  };
  ig("sigma2", p.sigma2);
  ig("sigma2T", p.sigma2T);
  if (j.contains("phi")) {
    if (j["phi"].is_null()) {
      p.phi.reset();
    } else {
      UniformPrior u = p.phi.value_or(UniformPrior{3.0, 60.0});
      u.lower = get_or(j["phi"], "lower", u.lower);
      u.upper = get_or(j["phi"], "upper", u.upper);
      p.phi = u;
    }
  }
  if (j.contains("rho")) {
    p.rho.lower = get_or(j["rho"], "lower", p.rho.lower);
    p.rho.upper = get_or(j["rho"], "upper", p.rho.upper);
  }
  p.validate();
  return p;
}

Json to_json(const MCMCConfig& c) {
  Json j = {{"n_chains", c.n_chains},
            {"n_iter", c.n_iter},
            {"n_burn", c.n_burn},
            {"thin", c.thin},
            {"batch_length", c.batch_length},
            {"m_neighbors", c.m_neighbors},
            {"seed", c.seed},
            {"target_accept", c.target_accept},
            {"dispersed_inits", c.dispersed_inits},
            {"fix_covariance", c.fix_covariance},
            {"threads", c.threads}};
  return j;
}

MCMCConfig mcmc_from_json(const Json& j, MCMCConfig c) {
  require(j.is_object(), "mcmc settings must be a JSON object");
  c.n_chains = get_or(j, "n_chains", c.n_chains);
  c.n_iter = get_or(j, "n_iter", c.n_iter);
  c.n_burn = get_or(j, "n_burn", c.n_burn);
  c.thin = get_or(j, "thin", c.thin);
  c.batch_length = get_or(j, "batch_length", c.batch_length);
  c.m_neighbors = get_or(j, "m_neighbors", c.m_neighbors);
  c.seed = get_or(j, "seed", c.seed);
  c.target_accept = get_or(j, "target_accept", c.target_accept);
  c.dispersed_inits = get_or(j, "dispersed_inits", c.dispersed_inits);
  c.fix_covariance = get_or(j, "fix_covariance", c.fix_covariance);
  c.threads = get_or(j, "threads", c.threads);
  c.validate();
  return c;
}

Json to_json(const ScenarioSpec& s) {
  return {{"id", s.id},
          {"sub_scenario", s.sub_scenario},
          {"I", s.I},
          {"T", s.T},
          {"J", s.J},
          {"params", to_json(s.params)},
          {"design", to_string(s.design)},
          {"bernoulli_p", s.bernoulli_p},
          {"lambda", s.lambda},
          {"cluster_fraction", s.cluster_fraction},
          {"occ_covariate", to_string(s.occ)},
          {"det_covariate", to_string(s.det)}};
}

ScenarioSpec scenario_from_json(const Json& j) {
  require(j.is_object() && j.contains("id"), "scenario needs an 'id'");
  const auto id = get_or<std::string>(j, "id", "");
  require(is_scenario_id(id), "unknown scenario id '" + id + "'");
  const int sub = get_or(j, "sub_scenario", 0);
  ScenarioSpec s = make_scenario(id, sub, get_or(j, "I", 1200), get_or(j, "T", 10));
  s.J = get_or(j, "J", s.J);
  if (s.design == DesignKind::bernoulli && s.bernoulli_p.size() != static_cast<std::size_t>(s.J)) {
    s.bernoulli_p.resize(s.J, 0.0);
  }
  s.bernoulli_p = get_or(j, "bernoulli_p", s.bernoulli_p);
  s.lambda = get_or(j, "lambda", s.lambda);
  s.cluster_fraction = get_or(j, "cluster_fraction", s.cluster_fraction);
  if (j.contains("params")) {
    ModelParams p = s.params;
    const Json& pj = j["params"];
    p.beta = get_or(pj, "beta", p.beta);
    p.alpha = get_or(pj, "alpha", p.alpha);
    p.phi = get_or(pj, "phi", p.phi);
    p.sigma2 = get_or(pj, "sigma2", p.sigma2);
    p.rho = get_or(pj, "rho", p.rho);
    p.sigma2T = get_or(pj, "sigma2T", p.sigma2T);
    s.params = p;
  }
  s.validate();
  return s;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace stocc

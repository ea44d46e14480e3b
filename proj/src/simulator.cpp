#include "stocc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stocc/error.hpp"

namespace stocc {

std::string_view to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::bernoulli: return "bernoulli";
    case DesignKind::poisson: return "poisson";
    case DesignKind::phenology: return "phenology";
    case DesignKind::cluster: return "cluster";
  }
  return "?";
}

std::string_view to_string(OccCovariate kind) {
  return kind == OccCovariate::site_year ? "X" : "L";
}

std::string_view to_string(DetCovariate kind) {
  switch (kind) {
    case DetCovariate::visit: return "v";
    case DetCovariate::latitude: return "L";
    case DetCovariate::visit_latitude: return "v+L";
  }
  return "?";
}

const std::vector<std::string>& scenario_ids() {
  static const std::vector<std::string> ids{"1-0", "1-1", "2-0", "2-1", "2-2", "2-3", "3-1", "3-2"};
  return ids;
}

bool is_scenario_id(std::string_view id) {
  const auto& ids = scenario_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

void ScenarioSpec::validate() const {
  require(is_scenario_id(id), "unknown study scenario '" + id + "'");
  require(sub_scenario >= 0 && sub_scenario < 16, "sub-scenario must be in 0..15");
  require(I >= 1 && T >= 1 && J >= 1, "scenario dimensions must be positive");
  params.validate();
  switch (design) {
    case DesignKind::bernoulli:
      require(bernoulli_p.size() == static_cast<std::size_t>(J),
              "Bernoulli design needs one probability per secondary occasion");
      for (double p : bernoulli_p) require(p >= 0.0 && p <= 1.0, "design probabilities in [0,1]");
      break;
    case DesignKind::cluster:
      require(cluster_fraction > 0.0 && cluster_fraction < 1.0, "cluster fraction in (0,1)");
      [[fallthrough]];
    case DesignKind::poisson:
    case DesignKind::phenology:
      require(lambda > 0.0, "Poisson intensity must be positive");
      break;
  }
  if (design == DesignKind::phenology || design == DesignKind::cluster) {
    require(J >= 2, "phenology designs need at least two secondary occasions");
  }
}

ModelParams sub_scenario_params(std::string_view scenario_id, int sub_scenario, DetCovariate det) {
  require(sub_scenario >= 0 && sub_scenario < 16, "sub-scenario must be in 0..15");
  const bool strong_range = scenario_id == "1-1";
  ModelParams p;
  p.beta = {0.0, 0.5};
  p.alpha = det == DetCovariate::visit_latitude ? std::vector<double>{0.0, -0.5, -0.5}
                                                 : std::vector<double>{0.0, -0.5};
  const auto bit = [&](int b) { return (sub_scenario >> b) & 1; };
  p.phi = strong_range ? (bit(0) ? 1.0 : 0.5) : (bit(0) ? 15.0 : 3.75);
  p.sigma2 = bit(1) ? 1.5 : 0.3;
  p.rho = bit(2) ? 0.9 : 0.5;
  p.sigma2T = bit(3) ? 1.5 : 0.3;
  return p;
}

ScenarioSpec make_scenario(std::string_view id, int sub_scenario, int I, int T) {
  require(is_scenario_id(id), "unknown study scenario '" + std::string(id) + "'");
  ScenarioSpec s;
  s.id = std::string(id);
  s.sub_scenario = sub_scenario;
  s.I = I;
  s.T = T;
  const char study = id.front();
  s.J = study == '3' ? 10 : 5;
  if (study == '1') {
    s.design = DesignKind::bernoulli;
    s.bernoulli_p.assign(s.J, 0.0);
    s.bernoulli_p[0] = 1.0;
    s.bernoulli_p[1] = 0.1;
    s.occ = OccCovariate::site_year;
    s.det = DetCovariate::visit;
  } else if (id == "2-0") {
    s.design = DesignKind::poisson;
    s.occ = OccCovariate::site_year;
    s.det = DetCovariate::visit;
  } else if (id == "2-1") {
    s.design = DesignKind::poisson;
    s.occ = OccCovariate::latitude;
    s.det = DetCovariate::visit;
  } else if (id == "2-2") {
    s.design = DesignKind::poisson;
    s.occ = OccCovariate::latitude;
    s.det = DetCovariate::latitude;
  } else {
    // 2-3 and study 3 share the partial-overlap covariates.
    s.design = id == "2-3" ? DesignKind::poisson
                           : (id == "3-1" ? DesignKind::phenology : DesignKind::cluster);
    s.occ = OccCovariate::latitude;
    s.det = DetCovariate::visit_latitude;
  }
  s.lambda = 1.1;
  s.cluster_fraction = 0.25;
  s.params = sub_scenario_params(id, sub_scenario, s.det);
  s.validate();
  return s;
}

std::vector<int> latitude_order(const SiteCoords& coords) {
  std::vector<int> order(coords.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const Point& pa = coords[a];
    const Point& pb = coords[b];
    if (pa.lat != pb.lat) return pa.lat < pb.lat;
    if (pa.lon != pb.lon) return pa.lon < pb.lon;
    return a < b;
  });
  return order;
}

std::vector<double> standardized_latitude(const SiteCoords& coords) {
  const std::size_t n = coords.size();
  std::vector<double> lat(n);
  for (std::size_t k = 0; k < n; ++k) lat[k] = coords[k].lat;
  const double mean = std::accumulate(lat.begin(), lat.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : lat) ss += (v - mean) * (v - mean);
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  for (double& v : lat) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return lat;
}

Covariates generate_covariates(OccCovariate occ, DetCovariate det, int I, int T, int J,
                               const SiteCoords& coords, Rng& rng) {
  require(coords.size() == static_cast<std::size_t>(I), "coordinates must match site count");
  const std::size_t SY = static_cast<std::size_t>(I) * T;
  const std::size_t C = SY * J;
  const std::vector<double> L = standardized_latitude(coords);

  Covariates cov;
  cov.occ = DesignMatrix(SY, {kInterceptName, occ == OccCovariate::site_year ? "X" : "L"});
  for (std::size_t s = 0; s < SY; ++s) {
    cov.occ(s, 0) = 1.0;
    cov.occ(s, 1) = occ == OccCovariate::site_year ? std_normal(rng) : L[s / T];
  }

  std::vector<std::string> names{kInterceptName};
  if (det != DetCovariate::latitude) names.push_back("v");
  if (det != DetCovariate::visit) names.push_back("L");
  cov.det = DesignMatrix(C, names);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t col = 0;
    cov.det(c, col++) = 1.0;
    if (det != DetCovariate::latitude) cov.det(c, col++) = std_normal(rng);
    if (det != DetCovariate::visit) cov.det(c, col++) = L[c / (static_cast<std::size_t>(T) * J)];
  }
  return cov;
}

namespace {

int truncated_poisson(double lambda, int J, Rng& rng) {
  const int d = std::poisson_distribution<int>(lambda)(rng);
  return std::min(d, J);
}

}  // namespace

SurveyMask design_bernoulli(int I, int T, int J, std::span<const double> p, Rng& rng) {
  require(p.size() == static_cast<std::size_t>(J), "need one probability per occasion");
  SurveyMask g(static_cast<std::size_t>(I) * T * J, 0);
  std::size_t c = 0;
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < J; ++j, ++c) {
        if (p[j] >= 1.0) {
          g[c] = 1;
        } else if (p[j] > 0.0) {
          g[c] = uniform01(rng) < p[j] ? 1 : 0;
        }
      }
    }
  }
  return g;
}

SurveyMask design_poisson(int I, int T, int J, double lambda, Rng& rng) {
  require(lambda > 0.0, "Poisson intensity must be positive");
  SurveyMask g(static_cast<std::size_t>(I) * T * J, 0);
  std::vector<int> slots(J);
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      const int d = truncated_poisson(lambda, J, rng);
      std::iota(slots.begin(), slots.end(), 0);
      // Partial Fisher-Yates: first d slots are a uniform draw without replacement.
      for (int k = 0; k < d; ++k) {
        const int pick = std::uniform_int_distribution<int>(k, J - 1)(rng);
        std::swap(slots[k], slots[pick]);
        g[(static_cast<std::size_t>(i) * T + t) * J + slots[k]] = 1;
      }
    }
  }
  return g;
}

std::vector<double> phenology_weights(int J, double shift) {
  require(J >= 2, "phenology weights need J >= 2");
  const double mu = J / 2.0;
  const double sigma = J / 4.0;
  std::vector<double> w(J);
  for (int j = 1; j <= J; ++j) {
    const double u = (j - mu) / sigma;
    w[j - 1] = std::exp(shift - u * u);
  }
  return w;
}

double draw_phenology_shift(Rng& rng) { return 0.33 * std_normal(rng); }

std::vector<double> phenology_weights(int J, Rng& rng) {
  return phenology_weights(J, draw_phenology_shift(rng));
}

std::vector<int> top_k(std::span<const double> weights, int k) {
  std::vector<int> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return weights[a] > weights[b]; });
  idx.resize(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), 0, idx.size()));
  return idx;
}

namespace {

void place_phenology_visits(int i, int T, int J, double lambda,
                            const std::vector<std::vector<double>>& year_weights, SurveyMask& g,
                            Rng& rng) {
  for (int t = 0; t < T; ++t) {
    const int d = truncated_poisson(lambda, J, rng);
    for (int j : top_k(year_weights[t], d)) g[(static_cast<std::size_t>(i) * T + t) * J + j] = 1;
  }
}

}  // namespace

SurveyMask design_phenology(int I, int T, int J, double lambda, Rng& rng) {
  require(lambda > 0.0, "Poisson intensity must be positive");
  std::vector<std::vector<double>> year_weights;
  for (int t = 0; t < T; ++t) year_weights.push_back(phenology_weights(J, rng));
  SurveyMask g(static_cast<std::size_t>(I) * T * J, 0);
  for (int i = 0; i < I; ++i) place_phenology_visits(i, T, J, lambda, year_weights, g, rng);
  return g;
}

std::vector<int> cluster_sites(const SiteCoords& coords, double fraction, double shift) {
  require(fraction > 0.0 && fraction < 1.0, "cluster fraction must lie in (0,1)");
  const int I = static_cast<int>(coords.size());
  const std::vector<int> order = latitude_order(coords);
  const double mu = I / 2.0;
  const double sigma = I / 2.0;
  std::vector<double> w(I);
  for (int k = 1; k <= I; ++k) {
    const double u = (k - mu) / sigma;
    w[k - 1] = std::exp(shift - u * u);
  }
  const int keep = static_cast<int>(std::ceil(fraction * I - 1e-9));
  std::vector<int> spot;
  for (int pos : top_k(w, keep)) spot.push_back(order[pos]);
  std::sort(spot.begin(), spot.end());
  return spot;
}

SurveyMask design_cluster(int I, int T, int J, double lambda, double fraction,
                          const SiteCoords& coords, Rng& rng) {
  require(coords.size() == static_cast<std::size_t>(I), "coordinates must match site count");
  require(lambda > 0.0, "Poisson intensity must be positive");
  const std::vector<int> spot = cluster_sites(coords, fraction, draw_phenology_shift(rng));
  std::vector<std::vector<double>> year_weights;
  for (int t = 0; t < T; ++t) year_weights.push_back(phenology_weights(J, rng));
  SurveyMask g(static_cast<std::size_t>(I) * T * J, 0);
  for (int i : spot) place_phenology_visits(i, T, J, lambda, year_weights, g, rng);
  return g;
}

SimulatedDataset simulate_dataset(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SimulatedDataset ds;
  ds.spec = spec;
  ds.seed = seed;
  const int I = spec.I, T = spec.T, J = spec.J;
  ds.coords = SiteCoords::lattice(I);
  ds.cov = generate_covariates(spec.occ, spec.det, I, T, J, ds.coords, rng);
  require(ds.cov.occ.cols() == spec.params.beta.size(), "beta length does not match covariates");
  require(ds.cov.det.cols() == spec.params.alpha.size(), "alpha length does not match covariates");

  Truth& truth = ds.truth;
  truth.params = spec.params;
  truth.omega = sample_spatial_effects(ds.coords, {spec.params.phi, spec.params.sigma2}, rng);
  truth.eta = sample_temporal_effects(T, {spec.params.rho, spec.params.sigma2T}, rng);

  const std::size_t SY = static_cast<std::size_t>(I) * T;
  truth.psi.resize(SY);
  truth.z.resize(SY);
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      const std::size_t s = static_cast<std::size_t>(i) * T + t;
      truth.psi[s] = occupancy_probability(ds.cov.occ.row(s), spec.params.beta, truth.omega[i],
                                           truth.eta[t]);
      truth.z[s] = uniform01(rng) < truth.psi[s] ? 1 : 0;
    }
  }
  truth.p.resize(SY * J);
  for (std::size_t c = 0; c < SY * J; ++c) {
    truth.p[c] = detection_probability(ds.cov.det.row(c), spec.params.alpha);
  }

  SurveyMask g;
  switch (spec.design) {
    case DesignKind::bernoulli: g = design_bernoulli(I, T, J, spec.bernoulli_p, rng); break;
    case DesignKind::poisson: g = design_poisson(I, T, J, spec.lambda, rng); break;
    case DesignKind::phenology: g = design_phenology(I, T, J, spec.lambda, rng); break;
    case DesignKind::cluster:
      g = design_cluster(I, T, J, spec.lambda, spec.cluster_fraction, ds.coords, rng);
      break;
  }

  ds.data = EncounterArray(I, T, J);
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      const std::size_t s = static_cast<std::size_t>(i) * T + t;
      for (int j = 0; j < J; ++j) {
        const std::size_t c = s * J + j;
        if (!g[c]) continue;
        const double u = uniform01(rng);
        ds.data.set(i, t, j, truth.z[s] && u < truth.p[c] ? 1 : 0);
      }
    }
  }
  return ds;
}

DesignReport design_report(const EncounterArray& data, const ScenarioSpec& spec) {
  const auto m = data.mask_data();
  return design_report(SurveyMask(m.begin(), m.end()), data.sites(), data.primaries(),
                       data.secondaries(), spec);
}

DesignReport design_report(const SurveyMask& mask, int I, int T, int J, const ScenarioSpec& spec) {
  require(mask.size() == static_cast<std::size_t>(I) * T * J, "survey mask size must be I*T*J");
  DesignReport r;
  r.visit_histogram.assign(J + 1, 0);
  std::size_t never = 0;
  for (int i = 0; i < I; ++i) {
    bool any = false;
    for (int t = 0; t < T; ++t) {
      const auto row = mask.begin() + (static_cast<std::ptrdiff_t>(i) * T + t) * J;
      const int d = static_cast<int>(std::count(row, row + J, std::uint8_t{1}));
      ++r.visit_histogram[d];
      any = any || d > 0;
    }
    if (!any) ++never;
  }
  const auto SY = static_cast<double>(I) * T;
  r.zero_visit_fraction = r.visit_histogram[0] / SY;
  r.two_visit_fraction = J >= 2 ? r.visit_histogram[2] / SY : 0.0;
  r.never_visited_fraction = static_cast<double>(never) / I;

  if (spec.design == DesignKind::bernoulli) {
    // Poisson-binomial distribution of independent occasion visits.
    std::vector<double> h{1.0};
    for (double p : spec.bernoulli_p) {
      std::vector<double> next(h.size() + 1, 0.0);
      for (std::size_t k = 0; k < h.size(); ++k) {
        next[k] += h[k] * (1.0 - p);
        next[k + 1] += h[k] * p;
      }
      h = std::move(next);
    }
    r.expected_histogram = h;
  } else if (spec.design != DesignKind::cluster) {
    // Poisson counts, everything above J collapsed onto J.
    r.expected_histogram.assign(J + 1, 0.0);
    double pk = std::exp(-spec.lambda), below = 0.0;
    for (int k = 0; k < J; ++k) {
      r.expected_histogram[k] = pk;
      below += pk;
      pk *= spec.lambda / (k + 1);
    }
    r.expected_histogram[J] = 1.0 - below;
  }
  if (!r.expected_histogram.empty()) r.expected_never_visited = std::pow(r.expected_histogram[0], T);
  return r;
}

}  // namespace stocc

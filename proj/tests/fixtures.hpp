#pragma once

// Small random fixtures shared by the unit tests.

#include <random>

#include "stocc/core.hpp"

namespace fixtures {

struct Instance {
  stocc::EncounterArray data;
  stocc::Covariates cov;
  stocc::ModelParams params;
  stocc::RandomEffects effects;
};

// Random tiny instance: mask and detections drawn independently, detections
// only where surveyed.
inline Instance random_instance(int I, int T, int J, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  Instance in;
  in.data = stocc::EncounterArray(I, T, J);
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < J; ++j)
        if (u(rng) < 0.7) in.data.set(i, t, j, u(rng) < 0.4 ? 1 : 0);
  in.cov.occ = stocc::DesignMatrix(static_cast<std::size_t>(I) * T, {"(Intercept)", "x"});
  for (std::size_t r = 0; r < in.cov.occ.rows(); ++r) {
    in.cov.occ(r, 0) = 1.0;
    in.cov.occ(r, 1) = n(rng);
  }
  in.cov.det = stocc::DesignMatrix(in.data.cells(), {"(Intercept)", "v"});
  for (std::size_t r = 0; r < in.cov.det.rows(); ++r) {
    in.cov.det(r, 0) = 1.0;
    in.cov.det(r, 1) = n(rng);
  }
  in.params.beta = {n(rng), n(rng)};
  in.params.alpha = {n(rng), n(rng)};
  in.effects.omega.resize(I);
  in.effects.eta.resize(T);
  for (auto& w : in.effects.omega) w = n(rng);
  for (auto& e : in.effects.eta) e = 0.5 * n(rng);
  return in;
}

inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Likelihood by explicit enumeration of every latent occupancy vector.
inline double enumeration_log_likelihood(const Instance& in) {
  const auto& d = in.data;
  const int I = d.sites(), T = d.primaries(), J = d.secondaries();
  const int SY = I * T;
  std::vector<double> psi(SY);
  std::vector<double> p(d.cells());
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      const std::size_t s = static_cast<std::size_t>(i) * T + t;
      double lin = in.effects.omega[i] + in.effects.eta[t];
      for (std::size_t c = 0; c < in.cov.occ.cols(); ++c) lin += in.cov.occ(s, c) * in.params.beta[c];
      psi[s] = inv_logit(lin);
      for (int j = 0; j < J; ++j) {
        const std::size_t k = d.index(i, t, j);
        double lp = 0.0;
        for (std::size_t c = 0; c < in.cov.det.cols(); ++c) lp += in.cov.det(k, c) * in.params.alpha[c];
        p[k] = inv_logit(lp);
      }
    }
  }
  double total = 0.0;
  for (long mask = 0; mask < (1L << SY); ++mask) {
    double prob = 1.0;
    for (int s = 0; s < SY; ++s) {
      const int z = (mask >> s) & 1;
      prob *= z ? psi[s] : 1.0 - psi[s];
      const int i = s / T, t = s % T;
      for (int j = 0; j < J; ++j) {
        if (!d.surveyed(i, t, j)) continue;
        const std::size_t k = d.index(i, t, j);
        const int y = d.y(i, t, j);
        if (z) prob *= y ? p[k] : 1.0 - p[k];
        else prob *= y ? 0.0 : 1.0;
      }
    }
    total += prob;
  }
  return std::log(total);
}

}  // namespace fixtures

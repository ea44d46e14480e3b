#pragma once

#include "stocc/rng.hpp"

namespace stocc {

/// Exact draw from PG(1, z) using Devroye's alternating-series rejection
/// sampler with the truncation point 0.64.
double sample_polya_gamma(double z, Rng& rng);

/// E[PG(1, z)] = tanh(z / 2) / (2 z), with the z -> 0 limit 1/4.
double polya_gamma_mean(double z);

/// Var[PG(1, z)] = (sinh z - z) / (4 z^3 cosh^2(z / 2)), limit 1/24.
double polya_gamma_variance(double z);

}  // namespace stocc

#pragma once

#include "otspec/spd_geometry.hpp"

#include <cstdint>
#include <random>

namespace otspec {

using Rng = std::mt19937_64;

// Independent, reproducible stream for (seed, stream index).
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

// Uniform variate in the open interval (0, 1); never returns 0 or 1.
double open_uniform(Rng& rng);

// Q^T D Q with Q from the QR factorization of a standard Gaussian matrix and
// D log-uniform on [e^{-log_range}, e^{log_range}].
SpdMatrix random_spd(int n, Rng& rng, double log_range = 3.0);

// Standard Gaussian matrix, redrawn until its condition number is below max_condition.
Mat random_invertible(int n, Rng& rng, double max_condition = 1e4);

Vec random_unit_vector(int n, Rng& rng);

}  // namespace otspec

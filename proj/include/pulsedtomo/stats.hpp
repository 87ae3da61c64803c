#pragma once

#include <cstdint>
#include <span>

namespace pulsedtomo {

double mean(std::span<const double> xs);
/// Unbiased sample variance; 0 for fewer than two samples.
double variance(std::span<const double> xs);
double stddev(std::span<const double> xs);
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::span<const double> xs, double q);

/// Bootstrap standard error of the sample variance (deterministic for a given seed).
double bootstrap_variance_se(std::span<const double> xs, int n_boot, std::uint64_t seed);
/// Bootstrap standard error of the sample standard deviation.
double bootstrap_stddev_se(std::span<const double> xs, int n_boot, std::uint64_t seed);

} // namespace pulsedtomo

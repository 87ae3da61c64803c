#include "pulsedtomo/stats.hpp"

#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pulsedtomo {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw StatisticsError("mean of an empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

double quantile(std::span<const double> xs, double q) {
    if (xs.empty()) throw StatisticsError("quantile of an empty sample");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

namespace {

template <typename Stat>
double bootstrap_se(std::span<const double> xs, int n_boot, std::uint64_t seed, Stat stat) {
    if (xs.size() < 2 || n_boot < 2) return 0.0;
    RngStream rng(seed, 0xb0075u);
    std::vector<double> resample(xs.size());
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(n_boot));
    std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
    for (int b = 0; b < n_boot; ++b) {
        for (auto& r : resample) r = xs[pick(rng.engine())];
        stats.push_back(stat(std::span<const double>(resample)));
    }
    return stddev(stats);
}

} // namespace

double bootstrap_variance_se(std::span<const double> xs, int n_boot, std::uint64_t seed) {
    return bootstrap_se(xs, n_boot, seed, [](std::span<const double> v) { return variance(v); });
}

double bootstrap_stddev_se(std::span<const double> xs, int n_boot, std::uint64_t seed) {
    return bootstrap_se(xs, n_boot, seed, [](std::span<const double> v) { return stddev(v); });
}

} // namespace pulsedtomo

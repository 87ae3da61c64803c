#include "pulsedtomo/calibrate.hpp"
#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/params.hpp"
#include "pulsedtomo/rng.hpp"
#include "pulsedtomo/stats.hpp"
#include "pulsedtomo/transduce.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

using namespace pulsedtomo;

namespace {

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// P(H' < h) from the preimages of the transduction function.
double thermal_cdf(double h, double sigma) {
    if (h <= -0.5) return 0.0;
    if (h >= 0.5) return 1.0;
    if (h == 0.0) return 0.5;
    const double s = std::sqrt(1.0 - 4.0 * h * h);
    const double dm = (1.0 - s) / (2.0 * h);
    const double dp = (1.0 + s) / (2.0 * h);
    if (h > 0.0) return phi(dm / sigma) + 1.0 - phi(dp / sigma);
    // h < 0: D in (dp, dm), both negative
    return phi(dm / sigma) - phi(dp / sigma);
}

double simpson(auto&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

std::vector<double> synthetic_thermal(double sigma_delta, double scale_a, double noise_sd, std::size_t n,
                                      std::uint64_t seed) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        RngStream rng(seed, i);
        const double d = rng.normal(sigma_delta);
        v[i] = scale_a * (homodyne_eq1(d, 1.0) + rng.normal(noise_sd));
    }
    return v;
}

} // namespace

TEST_CASE("branch inversion round trip") {
    for (double d : {-0.999, -0.5, -1e-3, 1e-6, 0.2, 0.7, 0.999}) {
        const double h = d / (d * d + 1.0);
        const BranchPair b = invert_transduction(h);
        CHECK(b.minus == doctest::Approx(d).epsilon(1e-10));
        CHECK(b.plus == doctest::Approx(1.0 / d).epsilon(1e-10));
    }
    for (double d : {1.5, 4.0, 1e3, -2.0}) {
        const double h = d / (d * d + 1.0);
        CHECK(invert_transduction(h).plus == doctest::Approx(d).epsilon(1e-9));
    }
    CHECK(invert_transduction(0.5).minus == doctest::Approx(1.0));
    CHECK(invert_transduction(0.5).plus == doctest::Approx(1.0));
    CHECK(invert_transduction(0.0).minus == 0.0);
    CHECK(std::isinf(invert_transduction(0.0).plus));
    CHECK_THROWS_AS(invert_transduction(0.5000001), NoRealSolution);
    CHECK_THROWS_AS(invert_transduction(-0.7), NoRealSolution);
}

TEST_CASE("branch Jacobian matches a central finite difference") {
    for (double h : {-0.45, -0.2, 0.01, 0.1, 0.31, 0.49}) {
        const double eps = 1e-7;
        const BranchPair jac = branch_jacobian(h);
        const double fd_minus =
            (invert_transduction(h + eps).minus - invert_transduction(h - eps).minus) / (2.0 * eps);
        const double fd_plus = (invert_transduction(h + eps).plus - invert_transduction(h - eps).plus) / (2.0 * eps);
        CHECK(jac.minus == doctest::Approx(std::abs(fd_minus)).epsilon(1e-5));
        CHECK(jac.plus == doctest::Approx(std::abs(fd_plus)).epsilon(1e-5));
    }
    CHECK_THROWS_AS(branch_jacobian(0.5), NoRealSolution);
}

TEST_CASE("thermal density agrees with the preimage CDF") {
    for (double sigma : {0.3, 0.71, 2.0}) {
        const double a = -0.45, b = 0.42;
        auto f = [&](double h) { return thermal_pdf(h, sigma); };
        // the density is smooth away from 0 and +-0.5; split at 0 where it has a cusp in sigma
        const double integral = simpson(f, a, -1e-9, 20000) + simpson(f, 1e-9, b, 20000);
        CHECK(integral == doctest::Approx(thermal_cdf(b, sigma) - thermal_cdf(a, sigma)).epsilon(1e-6));
    }
    CHECK(thermal_pdf(0.6, 1.0) == 0.0);
    CHECK(std::isinf(thermal_pdf(0.5, 1.0)));
    CHECK_THROWS_AS(thermal_pdf(0.1, 0.0), InvalidParameter);
}

TEST_CASE("histogram model bin masses match Monte-Carlo") {
    HistogramModel m{0.71, 2.0, 0.016};
    const auto v = synthetic_thermal(m.sigma_delta, m.scale_a, m.noise_sd, 100000, 21);
    const std::vector<double> edges = {-1.2, -0.95, -0.6, -0.2, 0.0, 0.3, 0.9, 0.98, 1.2};
    const BinnedHistogram hist = BinnedHistogram::from_samples(v, edges);
    double total = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double p = m.bin_mass(edges[i], edges[i + 1]);
        total += p;
        const double se = std::sqrt(hist.total_n * p * (1.0 - p));
        CHECK(std::abs(hist.counts[i] - hist.total_n * p) < 4.0 * se);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    // density integrates to the bin mass
    auto dens = [&](double x) { return m.density(x); };
    CHECK(simpson(dens, -0.6, -0.2, 400) == doctest::Approx(m.bin_mass(-0.6, -0.2)).epsilon(1e-5));
}

TEST_CASE("noise convolution on a grid") {
    HistogramModel m{0.71, 1.0, 0.02};
    std::vector<double> grid;
    for (int i = -700; i <= 700; ++i) grid.push_back(i * 0.001);
    const auto c = convolve_noise(m, grid);
    double s = 0.0;
    for (double v : c) s += v * 0.001;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(c[700] == doctest::Approx(m.density(0.0)).epsilon(1e-6));
    const std::vector<double> narrow = {-0.5, 0.0, 0.5};
    CHECK_THROWS_AS(convolve_noise(m, narrow), CoverageError);
}

TEST_CASE("Freedman-Diaconis edges") {
    std::vector<double> v;
    for (int i = 0; i < 1000; ++i) v.push_back(i);
    const auto edges = freedman_diaconis_edges(v);
    const double width = edges[1] - edges[0];
    const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
    CHECK(width == doctest::Approx(2.0 * iqr / std::cbrt(1000.0)).epsilon(0.05));
    CHECK(edges.front() <= 0.0);
    CHECK(edges.back() >= 999.0);
    CHECK_THROWS_AS(freedman_diaconis_edges(std::vector<double>(10, 1.0)), StatisticsError);
}

TEST_CASE("half-period difference variance factor") {
    CHECK(half_period_variance_factor(1.0) == doctest::Approx(1.0));
    // Monte-Carlo of (x(0) - x(pi)) / 2 for two equal modes, ratio r
    const double r = 1.3;
    std::vector<double> d;
    for (std::uint64_t i = 0; i < 50000; ++i) {
        RngStream rng(9, i);
        const double x1 = rng.normal(), y1 = rng.normal(), x2 = rng.normal(), y2 = rng.normal();
        const double p0 = x1 + x2;
        const double p1 = -x1 + x2 * std::cos(r * pi) + y2 * std::sin(r * pi);
        d.push_back(0.5 * (p0 - p1));
    }
    // two modes of unit variance: random sampling has variance 2
    CHECK(variance(d) / 2.0 == doctest::Approx(half_period_variance_factor(r)).epsilon(0.03));
}

TEST_CASE("calibration fit recovers synthetic truth") {
    const double sigma = 0.711, a = 2.5, ns = 0.0163;
    const auto v = synthetic_thermal(sigma, a, ns, 200000, 5);
    const BinnedHistogram hist = BinnedHistogram::from_samples(v, freedman_diaconis_edges(v));
    const CalibrationGuess guess = guess_calibration(hist, ns);
    CHECK(guess.scale_a == doctest::Approx(a).epsilon(0.1));
    const CalibrationFit fit = fit_calibration(hist, guess);
    CHECK(fit.model.scale_a == doctest::Approx(a).epsilon(0.02));
    CHECK(fit.model.sigma_delta == doctest::Approx(sigma).epsilon(0.02));
    CHECK(fit.warnings.empty());
    CHECK(fit.n_samples == 200000);
    CHECK(fit.residual_chi2 / fit.dof < 3.0);
    // linear-regime conversion
    CHECK(fit.to_displacement(a * 0.01, 0.01) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("calibration JSON round trip and CSV columns") {
    CalibrationFit fit;
    fit.model = {0.7, 2.0, 0.016};
    fit.scale_a_se = 0.01;
    fit.dof = 40;
    fit.warnings = {"w"};
    const CalibrationFit back = calibration_from_json(to_json(fit));
    CHECK(back.model.scale_a == fit.model.scale_a);
    CHECK(back.model.sigma_delta == fit.model.sigma_delta);
    CHECK(back.model.noise_sd == fit.model.noise_sd);
    CHECK(back.dof == 40);
    CHECK(back.warnings == fit.warnings);

    const auto v = synthetic_thermal(0.7, 2.0, 0.016, 2000, 1);
    const BinnedHistogram hist = BinnedHistogram::from_samples(v, freedman_diaconis_edges(v));
    std::ostringstream os;
    write_histogram_csv(os, hist, fit.model);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "bin_center,density,model_density");
    std::size_t rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == hist.size());
}

TEST_CASE("invalid calibration inputs") {
    HistogramModel bad{0.7, 0.0, 0.01};
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    BinnedHistogram h;
    h.edges = {0.0, 1.0, 0.5};
    h.counts = {1.0, 1.0};
    h.total_n = 2.0;
    CHECK_THROWS_AS(h.validate(), InvalidParameter);
    CalibrationGuess g;
    g.noise_sd = 0.0;
    h.edges = {0.0, 1.0, 2.0};
    CHECK_THROWS_AS(fit_calibration(h, g), InvalidParameter);
}

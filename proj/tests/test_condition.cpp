#include "pulsedtomo/condition.hpp"
#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace pulsedtomo;

namespace {

CavitySetup cavity() {
    CavitySetup c;
    c.g0 = two_pi * 25e6;
    c.kappa = two_pi * 20.4e9;
    c.eta_in = 0.013;
    c.eta_out = 0.35 * 0.013;
    return c;
}

TrainSetup setup_for(std::vector<MechMode> modes, double chi, double theta, ConversionKind kind) {
    TrainSetup s;
    s.modes = std::move(modes);
    s.transducer = {cavity(), chi, true};
    s.conversion = {kind, s.transducer.beta(), 1.0};
    s.schedule.theta = theta;
    return s;
}

ConditionalSample simulate(const TrainSetup& setup, std::uint64_t i, double offset_sd = 0.05) {
    RngStream rng(42, i);
    auto state = sample_thermal_state(setup.modes, offset_sd, rng);
    return run_train(std::move(state), setup, i, rng).sample;
}

/// Direct Monte-Carlo of the preparation readout frozen at time 0 and the
/// tomography pulse after an OU step of length t.
struct FrozenPrep {
    double x0, xh, xt;
};

FrozenPrep frozen_prep(std::span<const ModeTerm> modes, double theta, double t, std::mt19937_64& eng) {
    std::normal_distribution<double> n01;
    FrozenPrep f{0.0, 0.0, 0.0};
    for (const auto& m : modes) {
        const double sd = std::sqrt(m.var_q);
        double x = sd * n01(eng), y = sd * n01(eng);
        f.x0 += x;
        f.xh += x * std::cos(m.r * pi / 2.0) + y * std::sin(m.r * pi / 2.0);
        const double e = std::exp(-m.gamma * t);
        const double innov = sd * std::sqrt(1.0 - e * e);
        x = e * x + innov * n01(eng);
        y = e * y + innov * n01(eng);
        f.xt += x * std::cos(m.r * theta) + y * std::sin(m.r * theta);
    }
    return f;
}

} // namespace

TEST_CASE("conditioning names and conversions") {
    CHECK(parse_conditioning("two-pulse") == Conditioning::TwoPulse);
    CHECK(to_string(Conditioning::OnePulse) == "one-pulse");
    CHECK_THROWS_AS(parse_conditioning("three"), InvalidParameter);
    CHECK(parse_conversion("branch-inverse") == ConversionKind::BranchInverse);
    CHECK_THROWS_AS(parse_conversion("cubic"), InvalidParameter);

    Conversion lin{ConversionKind::Linear, 0.01, 1.0};
    CHECK(lin.to_displacement(0.2, 0.1) == doctest::Approx(20.0));
    Conversion inv{ConversionKind::BranchInverse, 0.01, 1.0};
    const double d = 0.6;
    CHECK(inv.to_displacement(d / (1 + d * d) + 0.1, 0.1) == doctest::Approx(60.0));
    // saturated values land on the branch point
    CHECK(inv.to_displacement(0.9, 0.0) == doctest::Approx(100.0));
}

TEST_CASE("schedule angles in time order") {
    PulseSchedule s;
    s.theta = 3.0 * pi;
    s.second_theta = two_pi;
    const auto a = s.angles();
    REQUIRE(a.size() == 6);
    CHECK(a[0] == -2.5 * pi);
    CHECK(a[3] == 0.0);
    CHECK(a[4] == two_pi);
    CHECK(a[5] == 3.0 * pi);
    s.theta = 0.0;
    CHECK_THROWS_AS(s.validate(), InvalidParameter);
}

TEST_CASE("noise floor factors: 7/4, 5/4 + cos^2/2, 5/4") {
    for (double theta : {0.3, pi, 1.7 * pi, 54.0 * pi}) {
        const double c = std::cos(theta);
        CHECK(noise_floor_variance_factor(Conditioning::TwoPulse, theta) == doctest::Approx(7.0 / 4.0));
        CHECK(noise_floor_variance_factor(Conditioning::OnePulse, theta) == doctest::Approx(1.25 + c * c / 2.0));
        CHECK(noise_floor_variance_factor(Conditioning::None, theta) == doctest::Approx(5.0 / 4.0));
    }
    CHECK(noise_correction("two-pulse") == 1.75);
    CHECK(noise_correction("non-conditional") == 1.25);
    CHECK_THROWS_AS(noise_correction("other"), InvalidParameter);
}

TEST_CASE("noise correction reproduces the worked numbers") {
    // measured widths 11.67 (two-pulse) and 9.92 (non-conditional) with 8.8 x_zpf single-pulse noise
    CHECK(11.67 / std::sqrt(noise_correction("two-pulse")) == doctest::Approx(8.8).epsilon(0.01));
    CHECK(9.92 / std::sqrt(noise_correction("non-conditional")) == doctest::Approx(8.8).epsilon(0.01));
    CHECK(8.8 * std::sqrt(7.0 / 4.0) == doctest::Approx(11.64).epsilon(0.005));
}

TEST_CASE("s_cond is the weighted pulse sum with the sequence coefficients") {
    const std::vector<MechMode> modes = {MechMode::from_temperature(two_pi * 3.1081e6, two_pi * 400, 3.2)};
    for (double theta : {pi, 1.3 * pi, 2.0 * pi}) {
        const TrainSetup setup = setup_for(modes, 0.1066, theta, ConversionKind::Linear);
        RngStream rng(1, 1);
        auto state = sample_thermal_state(modes, 0.05, rng);
        const TrainOutput out = run_train(state, setup, 1, rng);
        const double beta = setup.transducer.beta();
        for (auto c : {Conditioning::None, Conditioning::OnePulse, Conditioning::TwoPulse}) {
            const auto w = sequence_coefficients(c, theta);
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += w[k] * out.pulses[k].h_norm / beta;
            CHECK(out.sample.s_cond(c) == doctest::Approx(s).epsilon(1e-9));
        }
        // the coefficients sum to zero, so the train offset cancels
        double sum = 0.0;
        for (double w : sequence_coefficients(Conditioning::TwoPulse, theta)) sum += w;
        CHECK(sum == doctest::Approx(0.0).scale(1.0));
    }
}

TEST_CASE("noiseless single mode: two-pulse conditional value vanishes") {
    const std::vector<MechMode> modes = {MechMode{two_pi * 3.1081e6, 0.0, 2000.0, 1.0}};
    for (double theta : {pi, 1.5 * pi, 2.0 * pi}) {
        const TrainSetup setup = setup_for(modes, 1e9, theta, ConversionKind::BranchInverse);
        for (std::uint64_t i = 0; i < 50; ++i) {
            const auto s = simulate(setup, i);
            if (!is_accepted(s, QuadratureSet::both(), 0.49)) continue;
            CHECK(std::abs(s.s_cond(Conditioning::TwoPulse)) < 1e-4);
        }
    }
}

TEST_CASE("closed-form variances agree with frozen-preparation Monte-Carlo") {
    const std::vector<ModeTerm> modes = {{1.0, 0.0, 1.0}, {1.0386, 0.0, 0.96}};
    const int n = 40000;
    for (double gt : {0.0, 1.0}) {
        std::vector<ModeTerm> ms = modes;
        for (auto& m : ms) m.gamma = 1.0;
        const double t = gt;
        for (double theta : {0.9 * pi, 1.5 * pi, 2.0 * pi}) {
            std::mt19937_64 eng(static_cast<std::uint64_t>(1000 * theta + 7 * gt));
            std::vector<double> diff, one, two;
            for (int i = 0; i < n; ++i) {
                const auto f = frozen_prep(ms, theta, t, eng);
                diff.push_back(f.xt - f.x0);
                one.push_back(f.xt - std::cos(theta) * f.x0);
                two.push_back(f.xt - std::cos(theta) * f.x0 - std::sin(theta) * f.xh);
            }
            const struct {
                VarianceKind kind;
                const std::vector<double>* v;
            } cases[] = {{VarianceKind::Difference, &diff}, {VarianceKind::OnePulse, &one}, {VarianceKind::TwoPulse, &two}};
            for (const auto& c : cases) {
                const double expect = analytic_variance(c.kind, theta, t, ms);
                const double se = bootstrap_variance_se(*c.v, 100, 3);
                CHECK(std::abs(variance(*c.v) - expect) < 4.0 * se);
            }
        }
    }
}

TEST_CASE("two-pulse approximation is the r = 1 limit of the exact form") {
    const std::vector<ModeTerm> m = {{1.0, 0.2, 3.0}};
    for (double theta : {0.5, 2.0, 5.0}) {
        CHECK(analytic_variance(VarianceKind::TwoPulse, theta, 1.3, m) ==
              doctest::Approx(analytic_variance(VarianceKind::TwoPulseApprox, theta, 1.3, m)));
    }
    const std::vector<ModeTerm> single = {{1.0, 0.0, 2.0}};
    // a single mode without dephasing is fully determined by two quadratures
    CHECK(analytic_variance(VarianceKind::TwoPulse, 1.234, 0.0, single) == doctest::Approx(0.0).scale(1.0));
    CHECK_THROWS_AS(analytic_variance(VarianceKind::TwoPulse, 1.0, -1.0, single), InvalidParameter);
}

TEST_CASE("full sequence variance equals the covariance-kernel route") {
    const double omega1 = two_pi * 3.1081e6;
    for (double r : {1.0386, 0.9631, 1.2}) {
        const std::vector<MechMode> modes = {MechMode{omega1, 0.0, 0.0, 1.0}, MechMode{r * omega1, 0.0, 50.0, 1.0}};
        for (int k = 0; k <= 16; ++k) {
            const double theta = pi + pi * k / 16.0;
            const auto w = sequence_coefficients(Conditioning::TwoPulse, theta);
            std::vector<double> angles(preparation_angles.begin(), preparation_angles.end());
            angles.push_back(theta);
            const double kernel = sequence_variance(angles, w, modes, 0.0);
            CHECK(full_sequence_variance(theta, r, 100.0) == doctest::Approx(kernel).epsilon(1e-10));
        }
    }
}

TEST_CASE("run_train variance matches the full sequence plus noise floor") {
    const double omega1 = two_pi * 3.1081e6;
    const double r = 3.2280 / 3.1081;
    const double theta = 1.25 * pi;
    auto run = [&](double n_th, double chi, ConversionKind kind) {
        const std::vector<MechMode> modes = {MechMode{omega1, 0.0, n_th, 1.0}, MechMode{r * omega1, 0.0, n_th, 1.0}};
        const TrainSetup setup = setup_for(modes, chi, theta, kind);
        std::vector<double> v;
        for (std::uint64_t i = 0; i < 30000; ++i) v.push_back(simulate(setup, i, 0.0).s_cond(Conditioning::TwoPulse));
        const double expect = full_sequence_variance(theta, r, modes[1].quadrature_variance()) + 1.75 / (chi * chi);
        const double se = bootstrap_variance_se(v, 100, 1);
        CHECK(std::abs(variance(v) - expect) < 4.0 * se);
    };
    // noiseless, exact inverse: only the second mode survives
    run(800.0, 1e6, ConversionKind::BranchInverse);
    // small occupation keeps the linear map accurate, shot noise adds 7/4 sigma_m^2
    run(50.0, 0.1066, ConversionKind::Linear);
}

TEST_CASE("decoherence model reduces to the kernel route without damping") {
    const double omega1 = two_pi * 3.090e6;
    const std::vector<MechMode> modes = {MechMode{omega1, 0.0, 21000.0, 1.0},
                                         MechMode{omega1 * 2.976 / 3.090, 0.0, 21800.0, 1.0}};
    for (int n : {1, 27, 54}) {
        const double theta = two_pi * n;
        const auto w = sequence_coefficients(Conditioning::TwoPulse, theta);
        std::vector<double> angles(preparation_angles.begin(), preparation_angles.end());
        angles.push_back(theta);
        CHECK(decoherence_variance(theta, Conditioning::TwoPulse, modes, 0.0, 9.4) ==
              doctest::Approx(sequence_variance(angles, w, modes, 9.4)).epsilon(1e-10));
    }
}

TEST_CASE("decoherence envelope") {
    const double n = 21577.0;
    const double gamma = two_pi * 400.0;
    CHECK(decoherence_envelope(0.0, gamma, n) == 0.0);
    const double t = 1e-5;
    CHECK(decoherence_envelope(t, gamma, n) == doctest::Approx(std::sqrt(8.0 * n * (1.0 - std::exp(-t * gamma / 2)))));
    // long times: thermal two-pulse difference, sqrt(8 n)
    CHECK(decoherence_envelope(1.0, gamma, n) == doctest::Approx(std::sqrt(8.0 * n)));
    CHECK_THROWS_AS(decoherence_envelope(-1.0, gamma, n), InvalidParameter);
}

TEST_CASE("decoherence fit recovers the rate from exact model variances") {
    const double omega1 = two_pi * 3.090e6;
    const std::vector<MechMode> modes = {MechMode{omega1, two_pi * 400.0, 21577.0, 1.0},
                                         MechMode{omega1 * 2.976 / 3.090, two_pi * 400.0, 22403.0, 1.0}};
    std::vector<DecoherencePoint> pts;
    for (int n : {1, 2, 3, 26, 27, 28, 53, 54, 55, 80, 81, 82})
        pts.push_back({two_pi * n, decoherence_variance(two_pi * n, Conditioning::TwoPulse, modes, two_pi * 400.0, 9.4,
                                                        0.6),
                       120});
    const auto fit = fit_decoherence(pts, modes, 9.4, two_pi * 100.0);
    CHECK(fit.gamma_decay / two_pi == doctest::Approx(400.0).epsilon(1e-4));
    CHECK(fit.prior_scale == doctest::Approx(0.6).epsilon(1e-4));
    CHECK_THROWS_AS(fit_decoherence(std::span(pts).first(2), modes, 9.4, 1.0), StatisticsError);
}

TEST_CASE("post-selection statistics") {
    std::vector<ConditionalSample> s(4);
    s[0].h_centered = {0.1, 0.1, 0.1, 0.1};
    s[1].h_centered = {0.4, 0.1, 0.1, 0.1};  // Y pair fails
    s[2].h_centered = {0.1, 0.1, -0.35, 0.1};  // X pair fails
    s[3].h_centered = {0.1, 0.1, 0.1, 0.1};
    s[3].wrong_branch = {false, false, true, false};
    const Selection both = post_select(s, 0.31, QuadratureSet::both());
    CHECK(both.stats.n_accepted == 2);
    CHECK(both.stats.retention == doctest::Approx(0.5));
    CHECK(both.stats.wrong_branch == 1);
    CHECK(both.stats.pair_retention == doctest::Approx(6.0 / 8.0));
    CHECK(both.stats.pair_contamination == doctest::Approx(1.0 / 6.0));
    const Selection x_only = post_select(s, 0.31, QuadratureSet::for_conditioning(Conditioning::OnePulse));
    CHECK(x_only.stats.n_accepted == 3);
    const Selection none = post_select(s, 0.31, QuadratureSet::none());
    CHECK(none.stats.n_accepted == 4);
    const Selection empty = post_select(s, 0.01, QuadratureSet::both());
    CHECK(empty.stats.empty);
    CHECK_THROWS_AS(post_select(s, 0.0, QuadratureSet::both()), InvalidParameter);
}

TEST_CASE("branch statistics at the 0.31 threshold") {
    const auto b = branch_statistics(0.31, 1.0 / 408.0, 290.2019795199055);
    // crossings at 0.488 and 4.05 sigma_th; values evaluated independently
    CHECK(b.x_lo / 290.2019795199055 == doctest::Approx(0.4884387970715).epsilon(1e-9));
    CHECK(b.x_hi / 290.2019795199055 == doctest::Approx(4.046778483098).epsilon(1e-9));
    CHECK(b.retention == doctest::Approx(0.3748128604678).epsilon(1e-9));
    CHECK(b.wrong_fraction == doctest::Approx(1.385420410862e-4).epsilon(1e-8));
    CHECK_THROWS_AS(branch_statistics(0.5, 1.0, 1.0), InvalidParameter);
}

TEST_CASE("Gaussian update: Kalman identities") {
    GaussianState prior = GaussianState::thermal(10.0);
    prior.mean << 3.0, -1.0;
    const double chi = 0.5, rho = 2.0;
    const double sm2 = 1.0 / (chi * chi);
    const GaussianState post = gaussian_update(prior, 5.0, chi, rho);
    const double v = 20.0;
    CHECK(post.cov(0, 0) == doctest::Approx(1.0 / (1.0 / v + 1.0 / sm2)));
    CHECK(post.mean(0) == doctest::Approx((3.0 / v + 5.0 / sm2) / (1.0 / v + 1.0 / sm2)));
    CHECK(post.cov(1, 1) == doctest::Approx(v + rho * chi * chi));
    CHECK(post.mean(1) == doctest::Approx(-1.0));
    const GaussianState kicked = gaussian_update(prior, 5.0, chi, rho, 0.5, 1);
    CHECK(kicked.mean(0) == doctest::Approx(3.0 + 0.5 * std::sqrt(2.0)));
    CHECK(kicked.cov(0, 0) == doctest::Approx(v + rho * chi * chi));
    CHECK_THROWS_AS(gaussian_update(prior, 0.0, 0.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(gaussian_update(prior, 0.0, 1.0, 1.0, 0.0, 2), InvalidParameter);
}

TEST_CASE("Gaussian update: posterior stays PSD and the product bound holds for chi <= 1") {
    std::mt19937_64 eng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double chi = 0.01 + 0.99 * u(eng);
        const double rho = std::exp(std::log(1e-2) + u(eng) * std::log(1e4));
        GaussianState prior = GaussianState::thermal(std::exp(u(eng) * std::log(1e5)));
        const double c = (u(eng) - 0.5) * std::sqrt(prior.cov(0, 0) * prior.cov(1, 1));
        prior.cov(0, 1) = prior.cov(1, 0) = c;
        const GaussianState post = gaussian_update(prior, u(eng), chi, rho, 0.0, i % 2);
        CHECK(post.is_psd());
        CHECK(uncertainty_product(chi, rho) >= 1.0);
    }
}

TEST_CASE("Gaussian update: the product bound can fail for strong, lopsided measurements") {
    // chi = 2, eta ratio 1/4: sigma_m = 0.5, sigma_ba = 1, product^2 = 0.5 * 1.5
    CHECK(uncertainty_product(2.0, 0.25) == doctest::Approx(std::sqrt(0.75)));
    CHECK(uncertainty_product(2.0, 0.25) < 1.0);
    // with equal efficiencies the bound holds at any strength
    for (double chi : {0.1, 1.0, 2.0, 10.0}) CHECK(uncertainty_product(chi, 1.0) >= 1.0);
}

TEST_CASE("thermal and vacuum Gaussian states") {
    CHECK(GaussianState::thermal(5.0).cov(0, 0) == 10.0);
    CHECK(GaussianState::vacuum().cov(1, 1) == 1.0);
    CHECK_THROWS_AS(GaussianState::thermal(-1.0), InvalidParameter);
    GaussianState bad;
    bad.cov << 1.0, 2.0, 2.0, 1.0;
    CHECK_FALSE(bad.is_psd());
}

TEST_CASE("conditional and analytics CSV columns") {
    ConditionalSample s;
    s.train_id = 9;
    s.x_hat = 1.5;
    s.h_centered = {0.0, 0.0, 0.0, 0.0};
    TomographyValue v;
    v.theta = pi;
    v.s_two = 2.5;
    s.tomo.push_back(v);
    std::ostringstream os;
    write_conditional_csv(os, std::vector<ConditionalSample>{s}, Conditioning::TwoPulse, QuadratureSet::both(), 0.31);
    CHECK(os.str().rfind("train_id,theta,s_cond_xzpf,X_hat,Y_hat,accepted\n9,", 0) == 0);
    CHECK(os.str().find(",2.5,1.5,0,1\n") != std::string::npos);
    std::ostringstream as;
    write_analytics_csv(as, std::vector<AnalyticsRow>{{pi, 30.0, 46.0, 44.0, 12.4}});
    CHECK(as.str().rfind("theta,mc_width,analytic_width,second_mode_width,noise_floor\n", 0) == 0);
}

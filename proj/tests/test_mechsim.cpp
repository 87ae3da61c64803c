#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/mechsim.hpp"
#include "pulsedtomo/rng.hpp"
#include "pulsedtomo/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace pulsedtomo;

TEST_CASE("rng streams are addressed by (seed, stream)") {
    RngStream a(5, 17), b(5, 17), c(5, 18), d(6, 17);
    const double va = a.normal();
    CHECK(va == b.normal());
    CHECK(va != c.normal());
    CHECK(va != d.normal());
    CHECK(stream_id(1, 2) != stream_id(2, 1));
}

TEST_CASE("thermal state has quadrature variance 2 n_th") {
    const std::vector<MechMode> modes = {MechMode{two_pi * 3e6, 0.0, 50.0, 1.0}};
    std::vector<double> xs, ys, offs;
    for (std::uint64_t i = 0; i < 40000; ++i) {
        RngStream rng(11, i);
        const auto s = sample_thermal_state(modes, 0.5, rng);
        xs.push_back(s.modes[0].x);
        ys.push_back(s.modes[0].y);
        offs.push_back(s.v_off);
    }
    // sd of a sample variance at n = 40000 is about 0.7%
    CHECK(variance(xs) == doctest::Approx(100.0).epsilon(0.03));
    CHECK(variance(ys) == doctest::Approx(100.0).epsilon(0.03));
    CHECK(variance(offs) == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("displacement follows the rotating-frame quadratures") {
    const std::vector<MechMode> modes = {MechMode{2.0, 0.0, 1.0, 1.0}, MechMode{3.0, 0.0, 1.0, 1.0}};
    QuadratureState s;
    s.modes = {{1.0, 2.0}, {-0.5, 0.25}};
    const double t = 0.7;
    const double expect = 1.0 * std::cos(1.4) + 2.0 * std::sin(1.4) - 0.5 * std::cos(2.1) + 0.25 * std::sin(2.1);
    CHECK(displacement_at(s, modes, t) == doctest::Approx(expect));
    const std::vector<double> angles = {1.4, 2.1};
    CHECK(displacement(s, angles) == doctest::Approx(expect));
    CHECK_THROWS_AS(displacement(s, std::vector<double>{1.0}), InvalidParameter);
}

TEST_CASE("Ornstein-Uhlenbeck step: stationary variance and exp(-gamma t) correlation") {
    const double gamma_decay = 2.0;  // dephasing rate 1
    const std::vector<MechMode> modes = {MechMode{10.0, gamma_decay, 8.0, 1.0}};
    for (double dt : {0.01, 1.0}) {
        std::vector<double> x0, x1;
        for (std::uint64_t i = 0; i < 40000; ++i) {
            RngStream rng(3, i);
            auto s = sample_thermal_state(modes, 0.0, rng);
            x0.push_back(s.modes[0].x);
            s = evolve_dephase(std::move(s), modes, dt, rng);
            x1.push_back(s.modes[0].x);
        }
        double cov = 0.0;
        const double m0 = mean(x0), m1 = mean(x1);
        for (std::size_t i = 0; i < x0.size(); ++i) cov += (x0[i] - m0) * (x1[i] - m1);
        cov /= static_cast<double>(x0.size() - 1);
        CHECK(variance(x1) == doctest::Approx(16.0).epsilon(0.03));
        CHECK(cov / 16.0 == doctest::Approx(std::exp(-dt)).epsilon(0.03));
    }
}

TEST_CASE("zero damping leaves the quadratures frozen") {
    const std::vector<MechMode> modes = {MechMode{10.0, 0.0, 8.0, 1.0}};
    RngStream rng(1, 1);
    auto s = sample_thermal_state(modes, 0.0, rng);
    const auto before = s.modes[0];
    s = evolve_dephase(std::move(s), modes, 5.0, rng);
    CHECK(s.modes[0].x == before.x);
    CHECK(s.modes[0].y == before.y);
    CHECK_THROWS_AS(evolve_dephase(s, modes, -1.0, rng), InvalidParameter);
}

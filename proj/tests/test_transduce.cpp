#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/transduce.hpp"

#include <doctest.h>

#include <cmath>
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

} // namespace

TEST_CASE("full homodyne response reduces to D / (D^2 + 1) on resonance at phi = pi/2") {
    const CavitySetup c = cavity();
    const double beta = c.beta();
    for (double x : {-2000.0, -408.0, -50.0, 0.0, 13.0, 408.0, 5000.0})
        CHECK(homodyne_full(x, c) == doctest::Approx(homodyne_eq1(x, beta)).epsilon(1e-12));
}

TEST_CASE("transduction shape: odd, maximum 1/2 at beta x = 1") {
    const double beta = 1.0 / 408.0;
    CHECK(homodyne_eq1(408.0, beta) == doctest::Approx(0.5));
    CHECK(homodyne_eq1(-408.0, beta) == doctest::Approx(-0.5));
    for (double x : {1.0, 100.0, 300.0, 407.0, 409.0, 1e4}) {
        CHECK(homodyne_eq1(-x, beta) == doctest::Approx(-homodyne_eq1(x, beta)));
        CHECK(homodyne_eq1(x, beta) < 0.5);
    }
    // linear regime slope
    CHECK(homodyne_eq1(1.0, beta) == doctest::Approx(beta).epsilon(1e-5));
    CHECK(homodyne_eq1(INFINITY, beta) == 0.0);
}

TEST_CASE("amplitude quadrature at phi = 0 is a Lorentzian dip") {
    CavitySetup c = cavity();
    c.phi = 0.0;
    const double u = 2.0 * c.g0 * 300.0 / c.kappa;
    CHECK(homodyne_full(300.0, c) == doctest::Approx(1.0 / (1.0 + u * u)));
}

TEST_CASE("transducer noise and the off-resonant reference") {
    Transducer t{cavity(), 0.1066, true};
    CHECK(t.noise_sd() == doctest::Approx(t.beta() / 0.1066));
    // displacement-equivalent imprecision is 1/chi
    CHECK(t.noise_sd() / t.beta() == doctest::Approx(1.0 / 0.1066));
    Transducer off = t;
    off.coupled = false;
    CHECK(off.response(250.0) == off.response(0.0));
    t.chi = 0.0;
    CHECK_THROWS_AS(t.noise_sd(), InvalidParameter);
}

TEST_CASE("integrated homodyne output is sqrt(N_lo) chi x in the linear regime") {
    Transducer t{cavity(), 0.1, true};
    const double x = 3.0;
    const double h = t.response(x);
    CHECK(integrated_homodyne(h, t, 1e8) == doctest::Approx(1e4 * 0.1 * x).epsilon(1e-4));
}

TEST_CASE("measure_pulse noise has the configured sd") {
    Transducer t{cavity(), 0.1, true};
    double s2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        RngStream rng(2, static_cast<std::uint64_t>(i));
        const double d = measure_pulse(0.0, t, rng);
        s2 += d * d;
    }
    CHECK(std::sqrt(s2 / n) == doctest::Approx(t.noise_sd()).epsilon(0.02));
}

TEST_CASE("pulse CSV columns") {
    std::ostringstream os;
    const std::vector<PulseRecord> recs = {{7, 2, 1e-7, -pi, 0.125}};
    write_pulse_csv(os, recs);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "train_id,pulse_index,t,theta,h_norm");
    CHECK(row.rfind("7,2,", 0) == 0);
}

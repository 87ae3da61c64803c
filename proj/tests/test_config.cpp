#include "pulsedtomo/config.hpp"
#include "pulsedtomo/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>

using namespace pulsedtomo;

TEST_CASE("defaults describe the two-mode device") {
    const ExperimentConfig c = default_config();
    CHECK_NOTHROW(c.validate());
    REQUIRE(c.modes.size() == 2);
    CHECK(c.modes[0].freq_mhz == 3.1081);
    CHECK(c.schedule.theta_pi.size() == 9);
    CHECK(c.schedule.theta_pi.front() == 1.0);
    CHECK(c.schedule.theta_pi.back() == 2.0);
    CHECK(c.threshold == 0.31);
    CHECK(c.schedule.kick_omega == 0.0);
}

TEST_CASE("an empty document yields the defaults") {
    CHECK(parse_config("") == default_config());
}

TEST_CASE("TOML round trip is lossless") {
    ExperimentConfig c = default_config();
    c.seed = 77;
    c.trains = 1234;
    c.threshold = 0.2;
    c.sweep_thresholds = {0.1, 0.31};
    c.schedule.decoherence_n = {1, 27, 54};
    c.schedule.second_theta_pi = 2.0;
    c.schedule.kick_omega = 0.125;
    c.modes[1].n_th = 500.0;
    c.modes[1].x_zpf_rel = 1.1;
    c.cavity.phi_rad = 0.3;
    c.conversion = "branch-inverse";
    c.output_dir = "somewhere";
    const ExperimentConfig back = parse_config(to_toml(c));
    CHECK(back == c);
    CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("config hash is 16 hex digits and tracks content") {
    const ExperimentConfig a = default_config();
    ExperimentConfig b = a;
    const std::string h = config_hash(a);
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(config_hash(a) == h);
    b.seed = 2;
    CHECK(config_hash(b) != h);
}

TEST_CASE("unknown keys and wrong types are rejected") {
    CHECK_THROWS_AS(parse_config("tains = 10"), ConfigError);
    CHECK_THROWS_AS(parse_config("[schedule]\ntheta = [1.0]"), ConfigError);
    CHECK_THROWS_AS(parse_config("[[mode]]\nfreq = 3.0"), ConfigError);
    CHECK_THROWS_AS(parse_config("trains = \"many\""), ConfigError);
    CHECK_THROWS_AS(parse_config("trains = 1.5"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed = -1"), ConfigError);
    CHECK_THROWS_AS(parse_config("mode = 3"), ConfigError);
    CHECK_THROWS_AS(parse_config("threshold = "), ConfigError);
}

TEST_CASE("validation catches inconsistent values") {
    CHECK_THROWS_AS(parse_config("threshold = 0.6"), ConfigError);
    CHECK_THROWS_AS(parse_config("trains = 0"), ConfigError);
    CHECK_THROWS_AS(parse_config("conversion = \"cubic\""), ConfigError);
    CHECK_THROWS_AS(parse_config("[[mode]]\nfreq_mhz = -3.0"), ConfigError);
    CHECK_THROWS_AS(parse_config("[[mode]]\nfreq_mhz = 3.0\ntemp_k = -1.0"), ConfigError);
    CHECK_THROWS_AS(parse_config("[schedule]\naccepted_per_angle = 10\nmax_trains_per_angle = 5"), ConfigError);
    CHECK_THROWS_AS(parse_config("[schedule]\ntheta_pi = []"), ConfigError);
    CHECK_THROWS_AS(parse_config("[schedule]\ndecoherence_n = [0]"), ConfigError);
    CHECK_THROWS_AS(parse_config("[cavity]\neta_in = 2.0"), ConfigError);
    CHECK_THROWS_AS(parse_config("[pulse]\nn_photons = 0.0"), ConfigError);
    CHECK_THROWS_AS(parse_config("detector_gain = 0.0"), ConfigError);
    CHECK_THROWS_AS(parse_config("sweep_thresholds = [0.1, 0.7]"), ConfigError);
    CHECK_THROWS_AS(parse_config("[schedule]\nkick_omega = inf"), ConfigError);
}

TEST_CASE("modes map to physical units") {
    const ExperimentConfig c = parse_config("[[mode]]\nfreq_mhz = 2.0\ngamma_hz = 100.0\nn_th = 42.0\n");
    const auto modes = c.mech_modes();
    REQUIRE(modes.size() == 1);
    CHECK(modes[0].omega == doctest::Approx(two_pi * 2e6));
    CHECK(modes[0].gamma_decay == doctest::Approx(two_pi * 100.0));
    CHECK(modes[0].n_th == 42.0);
}

TEST_CASE("shipped configs load") {
    const std::filesystem::path dir = std::filesystem::path(PULSEDTOMO_SOURCE_DIR) / "configs";
    for (const char* name : {"thermal.toml", "tomo.toml", "decoherence.toml", "noise_floor.toml", "sweep.toml"}) {
        CAPTURE(name);
        CHECK_NOTHROW(load_config(dir / name));
    }
    CHECK_THROWS_AS(load_config(dir / "missing.toml"), ConfigError);
}

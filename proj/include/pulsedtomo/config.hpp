#pragma once

#include "pulsedtomo/condition.hpp"
#include "pulsedtomo/params.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pulsedtomo {

/// Mode as written in the config: frequencies in MHz, Gamma/2pi in Hz, and either
/// a temperature or an explicit occupation (n_th >= 0 wins).
struct ModeConfig {
    double freq_mhz = 0.0;
    double gamma_hz = 0.0;
    double temp_k = 0.0;
    double n_th = -1.0;
    double x_zpf_rel = 1.0;

    MechMode to_mode() const;
    bool operator==(const ModeConfig&) const = default;
};

struct CavityConfig {
    double g0_mhz = 25.0;
    double kappa_ghz = 20.4;
    double kappa_in_ghz = 0.0;
    double kappa_out_ghz = 0.0;
    double eta_in = 0.013;
    double eta_out = 0.35 * 0.013;
    double detuning0_mhz = 0.0;
    double phi_rad = pi / 2.0;

    CavitySetup to_setup() const;
    bool operator==(const CavityConfig&) const = default;
};

struct PulseConfig {
    double n_photons = 2e6;
    double n_lo = 1e8;
    double tau_pulse_ns = 20.0;
    double train_gap_ms = 30.0;

    PulseSetup to_setup() const;
    bool operator==(const PulseConfig&) const = default;
};

struct ScheduleConfig {
    std::vector<double> theta_pi;        ///< tomography angles in units of pi
    std::vector<int> decoherence_n;      ///< theta = 2 n pi scan points
    double second_theta_pi = 0.0;        ///< extra tomography pulse, 0 = off
    std::size_t accepted_per_angle = 2000;
    std::size_t max_trains_per_angle = 200000;
    std::size_t trains_per_point = 1000;  ///< decoherence scan, before post-selection
    double kick_omega = 0.0;              ///< conjugate displacement per measurement, units of sqrt(2) x_zpf

    bool operator==(const ScheduleConfig&) const = default;
};

struct ExperimentConfig {
    std::vector<ModeConfig> modes;
    CavityConfig cavity;
    PulseConfig pulse;
    ScheduleConfig schedule;
    std::size_t trains = 200000;
    std::uint64_t seed = 1;
    int threads = 0;  ///< 0 = hardware concurrency
    double threshold = 0.31;
    std::vector<double> sweep_thresholds;
    double offset_sd = 0.05;
    double detector_gain = 1.0;
    std::string conversion = "linear";
    std::string calibration = "truth";  ///< "truth" or a calibration JSON path
    std::string output_dir = "out";

    std::vector<MechMode> mech_modes() const;
    /// Throws ConfigError on inconsistent values.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Defaults reproduce the two-mode device at 3.2 K with the nine-angle schedule.
ExperimentConfig default_config();

ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_toml(const ExperimentConfig& config);

/// 64-bit FNV-1a of the canonical TOML serialization, as 16 hex digits.
/// threads and output_dir are left out.
std::string config_hash(const ExperimentConfig& config);

} // namespace pulsedtomo

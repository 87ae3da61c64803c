#pragma once

#include "pulsedtomo/calibrate.hpp"
#include "pulsedtomo/condition.hpp"
#include "pulsedtomo/config.hpp"
#include "pulsedtomo/tomography.hpp"

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace pulsedtomo {

inline constexpr int schema_version = 1;

std::string version_string();

/// Seed blocks keep the random streams of different commands apart.
enum SeedBlock : std::uint64_t {
    block_thermal = 1,
    block_tomo = 1000,
    block_decoherence = 2000,
    block_noise_floor = 3000,
    block_sweep = 4000,
};

/// Everything the simulation needs, derived once from the config.
struct Experiment {
    ExperimentConfig config;
    std::vector<MechMode> modes;
    CavitySetup cavity;
    PulseSetup pulse;
    DerivedScalars scalars;
    double scale_a = 1.0;  ///< calibrated detector units per H'
    std::vector<std::string> warnings;

    explicit Experiment(ExperimentConfig cfg);

    /// Transducer, conversion and schedule for one tomography angle (mode-1 phase).
    TrainSetup train_setup(double theta, bool coupled = true) const;
    /// Fresh thermal state + one sequence on stream (seed, stream_id(block, index)).
    TrainOutput simulate_train(const TrainSetup& setup, std::uint64_t block, std::uint64_t index) const;
    std::vector<ConditionalSample> simulate_batch(const TrainSetup& setup, std::uint64_t block, std::uint64_t first,
                                                  std::size_t count) const;
    /// Common sidecar fields: schema, config hash, seed, version, derived scalars.
    nlohmann::json sidecar() const;
};

struct ThermalResult {
    std::vector<double> samples;  ///< detector units, (v(0) - v(pi)) / 2
    BinnedHistogram histogram;
    CalibrationFit fit;
    double sigma_delta_truth = 0.0;
    double noise_sd = 0.0;  ///< of the difference sample, H' units
    double peak_left = 0.0;  ///< histogram maxima in detector units
    double peak_right = 0.0;
};

ThermalResult run_thermal(const Experiment& exp);

struct AngleWidths {
    double theta = 0.0;
    std::size_t n_trains = 0;
    std::size_t n_accepted = 0;  ///< both pairs accepted
    MarginalWidth none, post_selected, one_pulse, two_pulse;
    double analytic_two = 0.0;  ///< sqrt(full sequence + noise floor^2)
    double second_mode = 0.0;
    double noise_floor = 0.0;
};

struct TomoResult {
    std::vector<AngleWidths> angles;
    std::vector<std::string> kinds;  ///< none, post-selected, one-pulse, two-pulse
    std::vector<MarginalSet> marginals;
    std::vector<PhaseSpaceDensity> densities;
    std::vector<Contour> contours;
    std::vector<std::string> shortfalls;
    std::vector<std::string> warnings;  ///< skipped reconstructions
    double min_two_pulse_width = 0.0;
    double min_two_pulse_theta = 0.0;
    double mean_two_pulse_width = 0.0;
};

TomoResult run_tomo(const Experiment& exp);

struct DecoherenceRow {
    int n = 0;
    double theta = 0.0;
    double t = 0.0;
    std::size_t n_trains = 0;
    std::size_t n_accepted = 0;
    double variance = 0.0;
    double width = 0.0;
    double width_se = 0.0;
    double second_width = 0.0;  ///< extra tomography pulse, if scheduled
    double envelope = 0.0;
    double analytic_width = 0.0;
    double analytic_width_gamma0 = 0.0;
    double fit_width = 0.0;
};

struct DecoherenceResult {
    std::vector<DecoherenceRow> rows;
    DecoherenceFit fit;
    std::string fit_status = "ok";
    double gamma_decay_input = 0.0;
};

DecoherenceResult run_decoherence(const Experiment& exp);

struct NoiseFloorResult {
    std::size_t n_trains = 0;
    double theta = 0.0;
    double conditional_width = 0.0;
    double nonconditional_width = 0.0;
    double single_pulse_width = 0.0;
    double corrected_conditional = 0.0;
    double corrected_nonconditional = 0.0;
    double expected_imprecision = 0.0;
};

NoiseFloorResult run_noise_floor(const Experiment& exp);

struct SweepRow {
    double threshold = 0.0;
    double theta = 0.0;
    std::size_t n_trains = 0;
    std::size_t n_accepted = 0;
    double retention = 0.0;
    double pair_retention = 0.0;
    double pair_contamination = 0.0;
    double analytic_retention = 0.0;
    double analytic_wrong_fraction = 0.0;
    double width = 0.0;
};

std::vector<SweepRow> run_sweep(const Experiment& exp);

/// Command wrappers: run, write CSV + JSON sidecars under config.output_dir and
/// return the summary. A shortfall is written out before Shortfall is thrown.
nlohmann::json cmd_thermal(const Experiment& exp);
nlohmann::json cmd_tomo(const Experiment& exp);
nlohmann::json cmd_decoherence(const Experiment& exp);
nlohmann::json cmd_noise_floor(const Experiment& exp);
nlohmann::json cmd_sweep(const Experiment& exp);

} // namespace pulsedtomo

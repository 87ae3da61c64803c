#include "pulsedtomo/runner.hpp"

#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/parallel.hpp"
#include "pulsedtomo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#ifndef PULSEDTOMO_VERSION
#define PULSEDTOMO_VERSION "0.0.0"
#endif

namespace pulsedtomo {

namespace {

constexpr std::size_t tomo_batch = 4096;

std::filesystem::path output_dir(const Experiment& exp) {
    std::filesystem::path dir(exp.config.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

template <typename Writer>
void write_with_sidecar(const Experiment& exp, const std::filesystem::path& path, Writer&& writer,
                        nlohmann::json extra = nlohmann::json::object()) {
    {
        std::ofstream os(path);
        if (!os) throw Error("cannot write " + path.string());
        writer(os);
    }
    nlohmann::json side = exp.sidecar();
    side["file"] = path.filename().string();
    for (auto it = extra.begin(); it != extra.end(); ++it) side[it.key()] = it.value();
    std::ofstream js(path.string() + ".json");
    js << side.dump(2) << '\n';
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

nlohmann::json width_json(const MarginalWidth& w) {
    return {{"gaussian_sd", w.gaussian_sd},
            {"gaussian_sd_se", w.gaussian_sd_se},
            {"sample_sd", w.sample_sd},
            {"bootstrap_se", w.bootstrap_se},
            {"n", w.n}};
}

/// Width of a subset, or a zero record with the shortfall noted.
MarginalWidth width_or_shortfall(const std::vector<double>& values, std::uint64_t seed, const std::string& label,
                                 std::vector<std::string>& shortfalls) {
    try {
        return marginal_width(values, seed);
    } catch (const StatisticsError&) {
        shortfalls.push_back(label + ": only " + std::to_string(values.size()) + " samples");
        MarginalWidth w;
        w.n = values.size();
        return w;
    }
}

/// Symmetric equal-width histogram over +-5 sd, as a density.
std::pair<std::vector<double>, std::vector<double>> histogram_density(std::span<const double> values, std::size_t n) {
    const double half = 5.0 * std::max(stddev(values), 1e-9);
    const double tau = 2.0 * half / static_cast<double>(n - 1);
    std::vector<double> axis(n), density(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) axis[i] = -half + static_cast<double>(i) * tau;
    for (double v : values) {
        const double pos = std::round((v + half) / tau);
        if (pos >= 0.0 && pos < static_cast<double>(n)) density[static_cast<std::size_t>(pos)] += 1.0;
    }
    for (double& d : density) d /= static_cast<double>(values.size()) * tau;
    return {axis, density};
}

/// Linear-Gaussian picture of the preparation for mode 1 alone: thermal prior,
/// then the four preparation pulses as Y, Y, X, X measurements.
nlohmann::json gaussian_prediction(const Experiment& exp) {
    const double eta_ratio = exp.cavity.eta_out > 0.0 ? exp.cavity.eta_in / exp.cavity.eta_out : 0.0;
    GaussianState g = GaussianState::thermal(exp.modes.front().n_th);
    for (int q : {1, 1, 0, 0})
        g = gaussian_update(g, 0.0, exp.scalars.chi, eta_ratio, exp.config.schedule.kick_omega, q);
    return {{"sd_x", std::sqrt(g.cov(0, 0))},
            {"sd_y", std::sqrt(g.cov(1, 1))},
            {"mean_x", g.mean(0)},
            {"mean_y", g.mean(1)},
            {"uncertainty_product", uncertainty_product(exp.scalars.chi, eta_ratio)}};
}

std::string fmt_angle(double theta_pi) {
    std::ostringstream os;
    os.precision(6);
    os << theta_pi;
    return os.str();
}

} // namespace

std::string version_string() { return PULSEDTOMO_VERSION; }

Experiment::Experiment(ExperimentConfig cfg) : config(std::move(cfg)) {
    config.validate();
    modes = config.mech_modes();
    cavity = config.cavity.to_setup();
    pulse = config.pulse.to_setup();
    warnings = pulse.validate(modes);
    scalars = derive_scalars(modes, cavity, pulse);
    if (!(scalars.chi > 0.0)) throw ConfigError("measurement strength chi must be positive");
    if (config.calibration == "truth") {
        scale_a = config.detector_gain;
    } else {
        std::ifstream in(config.calibration);
        if (!in) throw ConfigError("cannot read calibration file " + config.calibration);
        try {
            scale_a = calibration_from_json(nlohmann::json::parse(in)).model.scale_a;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed calibration file: ") + e.what());
        }
        if (!(scale_a > 0.0)) throw ConfigError("calibration scale_a must be positive");
    }
}

TrainSetup Experiment::train_setup(double theta, bool coupled) const {
    TrainSetup s;
    s.modes = modes;
    s.transducer.cavity = cavity;
    s.transducer.chi = scalars.chi;
    s.transducer.coupled = coupled;
    s.conversion.kind = parse_conversion(config.conversion);
    s.conversion.beta = scalars.beta;
    s.conversion.scale_a = scale_a;
    s.schedule.theta = theta;
    s.schedule.second_theta = config.schedule.second_theta_pi * pi;
    s.detector_gain = config.detector_gain;
    s.validate();
    return s;
}

TrainOutput Experiment::simulate_train(const TrainSetup& setup, std::uint64_t block, std::uint64_t index) const {
    const std::uint64_t id = stream_id(block, index);
    RngStream rng(config.seed, id);
    // the train gap is long enough for full re-thermalization
    QuadratureState state = sample_thermal_state(modes, config.offset_sd, rng);
    return run_train(std::move(state), setup, id, rng);
}

std::vector<ConditionalSample> Experiment::simulate_batch(const TrainSetup& setup, std::uint64_t block,
                                                          std::uint64_t first, std::size_t count) const {
    return parallel_generate<ConditionalSample>(count, config.threads, [&](std::size_t i) {
        return simulate_train(setup, block, first + i).sample;
    });
}

nlohmann::json Experiment::sidecar() const {
    return {{"schema_version", schema_version},
            {"config_hash", config_hash(config)},
            {"seed", config.seed},
            {"version", version_string()},
            {"derived",
             {{"beta", scalars.beta},
              {"chi", scalars.chi},
              {"sigma_th", scalars.sigma_th},
              {"sigma_m", scalars.sigma_m},
              {"sigma_ba", scalars.sigma_ba}}}};
}

ThermalResult run_thermal(const Experiment& exp) {
    const std::size_t n = exp.config.trains;
    const double omega1 = exp.modes.front().omega;
    const double half_period = pi / omega1;
    Transducer tr{exp.cavity, exp.scalars.chi, true};
    const double gain = exp.config.detector_gain;
    const double sd = tr.noise_sd();

    ThermalResult res;
    res.samples = parallel_generate<double>(n, exp.config.threads, [&](std::size_t i) {
        RngStream rng(exp.config.seed, stream_id(block_thermal, i));
        QuadratureState s = sample_thermal_state(exp.modes, exp.config.offset_sd, rng);
        const double v0 = gain * (tr.response(displacement_at(s, exp.modes, 0.0)) + s.v_off + rng.normal(sd));
        s = evolve_dephase(std::move(s), exp.modes, half_period, rng);
        const double v1 =
            gain * (tr.response(displacement_at(s, exp.modes, half_period)) + s.v_off + rng.normal(sd));
        return 0.5 * (v0 - v1);
    });
    res.noise_sd = sd / std::sqrt(2.0);
    res.sigma_delta_truth = exp.scalars.beta * exp.scalars.sigma_th;
    res.histogram = BinnedHistogram::from_samples(res.samples, freedman_diaconis_edges(res.samples));

    const auto& h = res.histogram;
    std::size_t left = 0, right = h.size() - 1;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h.center(i) < 0.0 && h.counts[i] > h.counts[left]) left = i;
        if (h.center(i) >= 0.0 && (h.center(right) < 0.0 || h.counts[i] > h.counts[right])) right = i;
    }
    res.peak_left = h.center(left);
    res.peak_right = h.center(right);

    const CalibrationGuess guess = guess_calibration(h, res.noise_sd);
    res.fit = fit_calibration(h, guess);
    return res;
}

TomoResult run_tomo(const Experiment& exp) {
    const auto& cfg = exp.config;
    const double thr = cfg.threshold;
    const std::size_t target = cfg.schedule.accepted_per_angle;
    TomoResult res;
    res.kinds = {"none", "post-selected", "one-pulse", "two-pulse"};
    res.marginals.resize(4);

    const double sigma_m = exp.scalars.sigma_m;
    const double r = exp.modes.size() > 1 ? exp.modes[1].omega / exp.modes[0].omega : 1.0;
    const double var_q2 = exp.modes.size() > 1 ? exp.modes[1].quadrature_variance() : 0.0;

    for (std::size_t k = 0; k < cfg.schedule.theta_pi.size(); ++k) {
        const double theta = cfg.schedule.theta_pi[k] * pi;
        const TrainSetup setup = exp.train_setup(theta);
        std::vector<ConditionalSample> samples;
        std::size_t accepted = 0;
        while (accepted < target && samples.size() < cfg.schedule.max_trains_per_angle) {
            const std::size_t count = std::min(tomo_batch, cfg.schedule.max_trains_per_angle - samples.size());
            auto batch = exp.simulate_batch(setup, block_tomo + k, samples.size(), count);
            for (const auto& s : batch)
                if (is_accepted(s, QuadratureSet::both(), thr)) ++accepted;
            samples.insert(samples.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
        }
        if (accepted < target)
            res.shortfalls.push_back("theta=" + fmt_angle(cfg.schedule.theta_pi[k]) + "pi: " +
                                     std::to_string(accepted) + " of " + std::to_string(target) +
                                     " accepted after " + std::to_string(samples.size()) + " trains");

        std::vector<double> v_none, v_post, v_one, v_two;
        for (const auto& s : samples) {
            v_none.push_back(s.s_cond(Conditioning::None));
            const bool both = is_accepted(s, QuadratureSet::both(), thr);
            if (both) {
                v_post.push_back(s.s_cond(Conditioning::None));
                v_two.push_back(s.s_cond(Conditioning::TwoPulse));
            }
            if (is_accepted(s, QuadratureSet::for_conditioning(Conditioning::OnePulse), thr))
                v_one.push_back(s.s_cond(Conditioning::OnePulse));
        }
        AngleWidths w;
        w.theta = theta;
        w.n_trains = samples.size();
        w.n_accepted = accepted;
        const std::string label = "theta=" + fmt_angle(cfg.schedule.theta_pi[k]) + "pi ";
        const std::uint64_t bseed = cfg.seed ^ stream_id(block_tomo + k, 0);
        w.none = width_or_shortfall(v_none, bseed + 1, label + "none", res.shortfalls);
        w.post_selected = width_or_shortfall(v_post, bseed + 2, label + "post-selected", res.shortfalls);
        w.one_pulse = width_or_shortfall(v_one, bseed + 3, label + "one-pulse", res.shortfalls);
        w.two_pulse = width_or_shortfall(v_two, bseed + 4, label + "two-pulse", res.shortfalls);
        const double v2 = full_sequence_variance(theta, r, var_q2);
        w.second_mode = std::sqrt(v2);
        w.noise_floor = sigma_m * std::sqrt(noise_floor_variance_factor(Conditioning::TwoPulse, theta));
        w.analytic_two = std::sqrt(v2 + w.noise_floor * w.noise_floor);
        res.angles.push_back(w);

        res.marginals[0].add(theta, std::move(v_none));
        res.marginals[1].add(theta, std::move(v_post));
        res.marginals[2].add(theta, std::move(v_one));
        res.marginals[3].add(theta, std::move(v_two));
    }

    double sum = 0.0;
    std::size_t counted = 0;
    res.min_two_pulse_width = std::numeric_limits<double>::infinity();
    for (const auto& w : res.angles) {
        if (w.two_pulse.n < 100) continue;
        sum += w.two_pulse.gaussian_sd;
        ++counted;
        if (w.two_pulse.gaussian_sd < res.min_two_pulse_width) {
            res.min_two_pulse_width = w.two_pulse.gaussian_sd;
            res.min_two_pulse_theta = w.theta;
        }
    }
    res.mean_two_pulse_width = counted ? sum / static_cast<double>(counted) : 0.0;

    for (std::size_t k = 0; k < res.marginals.size(); ++k) {
        const auto& m = res.marginals[k];
        bool usable = true;
        for (const auto& s : m.samples)
            if (s.size() < 2) usable = false;
        if (usable) {
            try {
                res.densities.push_back(inverse_radon(m, GridSpec{}));
                res.contours.push_back(fwhm_contour(res.densities.back()));
                continue;
            } catch (const CoverageError& e) {
                res.warnings.push_back(res.kinds[k] + " density skipped: " + e.what());
            }
        } else {
            res.warnings.push_back(res.kinds[k] + " density skipped: a marginal has fewer than 2 samples");
        }
        res.densities.emplace_back();
        res.contours.emplace_back();
    }
    return res;
}

DecoherenceResult run_decoherence(const Experiment& exp) {
    const auto& cfg = exp.config;
    DecoherenceResult res;
    const MechMode& m1 = exp.modes.front();
    res.gamma_decay_input = m1.gamma_decay;
    const double sigma_m = exp.scalars.sigma_m;
    const std::size_t n_trains = cfg.schedule.trains_per_point;

    std::vector<DecoherencePoint> points;
    for (std::size_t k = 0; k < cfg.schedule.decoherence_n.size(); ++k) {
        const int n = cfg.schedule.decoherence_n[k];
        const double theta = two_pi * n;
        const TrainSetup setup = exp.train_setup(theta);
        const auto samples = exp.simulate_batch(setup, block_decoherence + k, 0, n_trains);
        std::vector<double> main, second;
        for (const auto& s : samples) {
            if (!is_accepted(s, QuadratureSet::both(), cfg.threshold)) continue;
            main.push_back(s.tomo.front().s_two);
            if (s.tomo.size() > 1) second.push_back(s.tomo[1].s_two);
        }
        DecoherenceRow row;
        row.n = n;
        row.theta = theta;
        row.t = theta / m1.omega;
        row.n_trains = samples.size();
        row.n_accepted = main.size();
        row.variance = variance(main);
        row.width = std::sqrt(row.variance);
        if (main.size() >= 2) row.width_se = bootstrap_stddev_se(main, 200, cfg.seed ^ stream_id(block_decoherence + k, 1));
        row.second_width = second.size() >= 2 ? stddev(second) : 0.0;
        row.envelope = decoherence_envelope(row.t, m1.gamma_decay, m1.n_th);
        row.analytic_width =
            std::sqrt(decoherence_variance(theta, Conditioning::TwoPulse, exp.modes, m1.gamma_decay, sigma_m));
        row.analytic_width_gamma0 =
            std::sqrt(decoherence_variance(theta, Conditioning::TwoPulse, exp.modes, 0.0, sigma_m));
        res.rows.push_back(row);
        if (main.size() >= 2) points.push_back({theta, row.variance, main.size()});
    }

    try {
        // neutral starting point, independent of the configured rate
        res.fit = fit_decoherence(points, exp.modes, sigma_m, two_pi * 100.0);
        for (auto& row : res.rows)
            row.fit_width = std::sqrt(decoherence_variance(row.theta, Conditioning::TwoPulse, exp.modes,
                                                           res.fit.gamma_decay, sigma_m, res.fit.prior_scale));
    } catch (const Error& e) {
        res.fit_status = e.what();
        res.fit.gamma_decay = std::numeric_limits<double>::quiet_NaN();
    }
    return res;
}

NoiseFloorResult run_noise_floor(const Experiment& exp) {
    NoiseFloorResult res;
    res.theta = two_pi;
    const TrainSetup setup = exp.train_setup(res.theta, false);
    const auto samples = exp.simulate_batch(setup, block_noise_floor, 0, exp.config.trains);
    std::vector<double> cond, noncond, single;
    for (const auto& s : samples) {
        cond.push_back(s.s_cond(Conditioning::TwoPulse));
        noncond.push_back(s.s_cond(Conditioning::None));
        // the pair difference removes the train offset; sd / sqrt(2) is one pulse
        single.push_back((s.prep[3] - s.prep[2]) / std::sqrt(2.0));
    }
    res.n_trains = samples.size();
    res.conditional_width = stddev(cond);
    res.nonconditional_width = stddev(noncond);
    res.single_pulse_width = stddev(single);
    res.corrected_conditional = res.conditional_width / std::sqrt(noise_correction("two-pulse"));
    res.corrected_nonconditional = res.nonconditional_width / std::sqrt(noise_correction("non-conditional"));
    res.expected_imprecision = exp.scalars.sigma_m;
    return res;
}

std::vector<SweepRow> run_sweep(const Experiment& exp) {
    const auto& cfg = exp.config;
    std::vector<double> thresholds = cfg.sweep_thresholds;
    if (thresholds.empty()) thresholds = {cfg.threshold};
    const std::vector<double> angles = {pi, 1.5 * pi, two_pi};
    std::vector<SweepRow> rows;
    for (std::size_t k = 0; k < angles.size(); ++k) {
        const TrainSetup setup = exp.train_setup(angles[k]);
        const auto samples = exp.simulate_batch(setup, block_sweep + k, 0, cfg.trains);
        for (double thr : thresholds) {
            const Selection sel = post_select(samples, thr, QuadratureSet::both());
            const BranchStatistics b = branch_statistics(thr, exp.scalars.beta, exp.scalars.sigma_th);
            SweepRow row;
            row.threshold = thr;
            row.theta = angles[k];
            row.n_trains = samples.size();
            row.n_accepted = sel.stats.n_accepted;
            row.retention = sel.stats.retention;
            row.pair_retention = sel.stats.pair_retention;
            row.pair_contamination = sel.stats.pair_contamination;
            row.analytic_retention = b.retention;
            row.analytic_wrong_fraction = b.wrong_fraction;
            std::vector<double> v;
            for (const auto& s : sel.accepted) v.push_back(s.s_cond(Conditioning::TwoPulse));
            row.width = v.size() >= 2 ? stddev(v) : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

nlohmann::json cmd_thermal(const Experiment& exp) {
    const auto dir = output_dir(exp);
    const ThermalResult res = run_thermal(exp);
    nlohmann::json fit = to_json(res.fit);
    write_with_sidecar(exp, dir / "thermal_histogram.csv",
                       [&](std::ostream& os) { write_histogram_csv(os, res.histogram, res.fit.model); },
                       {{"calibration", fit}});
    nlohmann::json summary = exp.sidecar();
    summary["command"] = "thermal";
    summary["calibration"] = fit;
    summary["sigma_delta_truth"] = res.sigma_delta_truth;
    summary["scale_a_truth"] = exp.config.detector_gain;
    summary["peak_left"] = res.peak_left;
    summary["peak_right"] = res.peak_right;
    summary["warnings"] = exp.warnings;
    write_json(dir / "calibration.json", fit);
    write_json(dir / "thermal.json", summary);
    return summary;
}

nlohmann::json cmd_tomo(const Experiment& exp) {
    const auto dir = output_dir(exp);
    const TomoResult res = run_tomo(exp);
    const double thr = exp.config.threshold;

    std::vector<AnalyticsRow> rows;
    for (const auto& w : res.angles)
        rows.push_back({w.theta, w.two_pulse.gaussian_sd, w.analytic_two, w.second_mode, w.noise_floor});
    write_with_sidecar(exp, dir / "tomo_analytics.csv", [&](std::ostream& os) { write_analytics_csv(os, rows); },
                       {{"conditioning", "two-pulse"}, {"threshold", thr}});

    write_with_sidecar(exp, dir / "tomo_widths.csv", [&](std::ostream& os) {
        os << "theta,kind,n,gaussian_sd,gaussian_sd_se,sample_sd,bootstrap_se\n";
        os.precision(12);
        for (const auto& w : res.angles) {
            const MarginalWidth* ws[] = {&w.none, &w.post_selected, &w.one_pulse, &w.two_pulse};
            for (std::size_t k = 0; k < 4; ++k)
                os << w.theta << ',' << res.kinds[k] << ',' << ws[k]->n << ',' << ws[k]->gaussian_sd << ','
                   << ws[k]->gaussian_sd_se << ',' << ws[k]->sample_sd << ',' << ws[k]->bootstrap_se << '\n';
        }
    });

    // the first trains of every angle, for inspection
    std::vector<PulseRecord> pulses;
    std::vector<ConditionalSample> conditional;
    for (std::size_t k = 0; k < exp.config.schedule.theta_pi.size(); ++k) {
        const TrainSetup setup = exp.train_setup(exp.config.schedule.theta_pi[k] * pi);
        for (std::uint64_t i = 0; i < 200; ++i) {
            auto out = exp.simulate_train(setup, block_tomo + k, i);
            pulses.insert(pulses.end(), out.pulses.begin(), out.pulses.end());
            conditional.push_back(std::move(out.sample));
        }
    }
    write_with_sidecar(exp, dir / "tomo_pulses.csv", [&](std::ostream& os) { write_pulse_csv(os, pulses); });
    write_with_sidecar(exp, dir / "tomo_conditional.csv", [&](std::ostream& os) {
        write_conditional_csv(os, conditional, Conditioning::TwoPulse, QuadratureSet::both(), thr);
    }, {{"conditioning", "two-pulse"}, {"threshold", thr}});

    nlohmann::json densities = nlohmann::json::object();
    for (std::size_t k = 0; k < res.kinds.size(); ++k) {
        const auto& m = res.marginals[k];
        for (std::size_t a = 0; a < m.angles.size(); ++a) {
            if (m.samples[a].size() < 2) continue;
            const auto [axis, density] = histogram_density(m.samples[a], 129);
            write_with_sidecar(exp, dir / ("marginal_" + res.kinds[k] + "_" + std::to_string(a) + ".csv"),
                               [&](std::ostream& os) { write_marginal_csv(os, axis, density); },
                               {{"theta", m.angles[a]}, {"kind", res.kinds[k]}, {"n", m.samples[a].size()}});
        }
        if (res.densities[k].values.empty()) continue;
        const nlohmann::json meta = density_metadata(res.densities[k], res.contours[k], m.angles);
        write_with_sidecar(exp, dir / ("density_" + res.kinds[k] + ".csv"),
                           [&](std::ostream& os) { write_density_csv(os, res.densities[k]); }, meta);
        densities[res.kinds[k]] = meta;
    }

    nlohmann::json summary = exp.sidecar();
    summary["command"] = "tomo";
    summary["threshold"] = thr;
    nlohmann::json angles = nlohmann::json::array();
    for (const auto& w : res.angles)
        angles.push_back({{"theta", w.theta},
                          {"n_trains", w.n_trains},
                          {"n_accepted", w.n_accepted},
                          {"none", width_json(w.none)},
                          {"post_selected", width_json(w.post_selected)},
                          {"one_pulse", width_json(w.one_pulse)},
                          {"two_pulse", width_json(w.two_pulse)},
                          {"analytic_two_pulse", w.analytic_two},
                          {"second_mode", w.second_mode},
                          {"noise_floor", w.noise_floor}});
    summary["angles"] = angles;
    summary["densities"] = densities;
    summary["min_two_pulse_width"] = res.min_two_pulse_width;
    summary["min_two_pulse_theta"] = res.min_two_pulse_theta;
    summary["mean_two_pulse_width"] = res.mean_two_pulse_width;
    summary["mean_width_temperature_k"] = effective_temperature(res.mean_two_pulse_width, exp.modes.front().omega);
    summary["gaussian_prediction"] = gaussian_prediction(exp);
    summary["shortfalls"] = res.shortfalls;
    std::vector<std::string> warnings = exp.warnings;
    warnings.insert(warnings.end(), res.warnings.begin(), res.warnings.end());
    summary["warnings"] = warnings;
    write_json(dir / "tomo.json", summary);
    if (!res.shortfalls.empty()) throw Shortfall("tomography shortfall: " + res.shortfalls.front());
    return summary;
}

nlohmann::json cmd_decoherence(const Experiment& exp) {
    const auto dir = output_dir(exp);
    const DecoherenceResult res = run_decoherence(exp);
    write_with_sidecar(exp, dir / "decoherence.csv", [&](std::ostream& os) {
        os << "n,theta,t_us,n_trains,n_accepted,mc_width,mc_width_se,second_tomo_width,envelope,analytic_width,"
              "analytic_width_gamma0,fit_width\n";
        os.precision(12);
        for (const auto& r : res.rows)
            os << r.n << ',' << r.theta << ',' << r.t * 1e6 << ',' << r.n_trains << ',' << r.n_accepted << ','
               << r.width << ',' << r.width_se << ',' << r.second_width << ',' << r.envelope << ','
               << r.analytic_width << ',' << r.analytic_width_gamma0 << ',' << r.fit_width << '\n';
    });
    nlohmann::json summary = exp.sidecar();
    summary["command"] = "decoherence";
    summary["gamma_hz_input"] = res.gamma_decay_input / two_pi;
    summary["gamma_hz_fit"] = res.fit.gamma_decay / two_pi;
    summary["gamma_hz_fit_se"] = res.fit.gamma_decay_se / two_pi;
    summary["prior_scale"] = res.fit.prior_scale;
    summary["fit_chi2"] = res.fit.chi2;
    summary["fit_dof"] = res.fit.dof;
    summary["fit_status"] = res.fit_status;
    summary["warnings"] = exp.warnings;
    write_json(dir / "decoherence.json", summary);
    return summary;
}

nlohmann::json cmd_noise_floor(const Experiment& exp) {
    const auto dir = output_dir(exp);
    const NoiseFloorResult res = run_noise_floor(exp);
    nlohmann::json summary = exp.sidecar();
    summary["command"] = "noise-floor";
    summary["n_trains"] = res.n_trains;
    summary["theta"] = res.theta;
    summary["conditional_width"] = res.conditional_width;
    summary["nonconditional_width"] = res.nonconditional_width;
    summary["single_pulse_width"] = res.single_pulse_width;
    summary["corrected_conditional"] = res.corrected_conditional;
    summary["corrected_nonconditional"] = res.corrected_nonconditional;
    summary["expected_imprecision"] = res.expected_imprecision;
    summary["ratio_conditional_nonconditional"] = res.conditional_width / res.nonconditional_width;
    write_json(dir / "noise_floor.json", summary);
    return summary;
}

nlohmann::json cmd_sweep(const Experiment& exp) {
    const auto dir = output_dir(exp);
    const auto rows = run_sweep(exp);
    write_with_sidecar(exp, dir / "sweep.csv", [&](std::ostream& os) {
        os << "threshold,theta,n_trains,n_accepted,retention,pair_retention,pair_contamination,"
              "analytic_retention,analytic_wrong_fraction,two_pulse_width\n";
        os.precision(12);
        for (const auto& r : rows)
            os << r.threshold << ',' << r.theta << ',' << r.n_trains << ',' << r.n_accepted << ',' << r.retention
               << ',' << r.pair_retention << ',' << r.pair_contamination << ',' << r.analytic_retention << ','
               << r.analytic_wrong_fraction << ',' << r.width << '\n';
    });
    nlohmann::json summary = exp.sidecar();
    summary["command"] = "sweep";
    summary["rows"] = rows.size();
    write_json(dir / "sweep.json", summary);
    return summary;
}

} // namespace pulsedtomo

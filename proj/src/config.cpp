#include "pulsedtomo/config.hpp"

#include "pulsedtomo/errors.hpp"

#include <toml.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace pulsedtomo {

namespace {

void reject_unknown(const toml::table& tbl, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, node] : tbl) {
        (void)node;
        if (!known.count(std::string(key.str())))
            throw ConfigError("unknown key '" + std::string(key.str()) + "' in " + where);
    }
}

double get_double(const toml::table& tbl, const char* key, double fallback) {
    const auto* node = tbl.get(key);
    if (!node) return fallback;
    if (auto v = node->value<double>()) return *v;
    throw ConfigError(std::string("key '") + key + "' must be a number");
}

std::int64_t get_int(const toml::table& tbl, const char* key, std::int64_t fallback) {
    const auto* node = tbl.get(key);
    if (!node) return fallback;
    if (!node->is_integer()) throw ConfigError(std::string("key '") + key + "' must be an integer");
    return *node->value<std::int64_t>();
}

std::size_t get_count(const toml::table& tbl, const char* key, std::size_t fallback) {
    const std::int64_t v = get_int(tbl, key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(std::string("key '") + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

std::string get_string(const toml::table& tbl, const char* key, const std::string& fallback) {
    const auto* node = tbl.get(key);
    if (!node) return fallback;
    if (auto v = node->value<std::string>()) return *v;
    throw ConfigError(std::string("key '") + key + "' must be a string");
}

template <typename T>
std::vector<T> get_array(const toml::table& tbl, const char* key, std::vector<T> fallback) {
    const auto* node = tbl.get(key);
    if (!node) return fallback;
    const auto* arr = node->as_array();
    if (!arr) throw ConfigError(std::string("key '") + key + "' must be an array");
    std::vector<T> out;
    for (const auto& el : *arr) {
        if constexpr (std::is_integral_v<T>) {
            if (!el.is_integer()) throw ConfigError(std::string("entries of '") + key + "' must be integers");
            out.push_back(static_cast<T>(*el.value<std::int64_t>()));
        } else {
            auto v = el.value<double>();
            if (!v) throw ConfigError(std::string("entries of '") + key + "' must be numbers");
            out.push_back(*v);
        }
    }
    return out;
}

const toml::table* subtable(const toml::table& root, const char* key) {
    const auto* node = root.get(key);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) throw ConfigError(std::string("'") + key + "' must be a table");
    return t;
}

template <typename T>
toml::array to_array(const std::vector<T>& v) {
    toml::array a;
    for (const auto& x : v) {
        if constexpr (std::is_integral_v<T>)
            a.push_back(static_cast<std::int64_t>(x));
        else
            a.push_back(x);
    }
    return a;
}

} // namespace

MechMode ModeConfig::to_mode() const {
    const double omega = two_pi * freq_mhz * 1e6;
    MechMode m;
    m.omega = omega;
    m.gamma_decay = two_pi * gamma_hz;
    m.n_th = n_th >= 0.0 ? n_th : thermal_occupation(temp_k, omega);
    m.x_zpf_rel = x_zpf_rel;
    return m;
}

CavitySetup CavityConfig::to_setup() const {
    CavitySetup c;
    c.g0 = two_pi * g0_mhz * 1e6;
    c.kappa = two_pi * kappa_ghz * 1e9;
    c.kappa_in = two_pi * kappa_in_ghz * 1e9;
    c.kappa_out = two_pi * kappa_out_ghz * 1e9;
    c.eta_in = eta_in;
    c.eta_out = eta_out;
    c.detuning0 = two_pi * detuning0_mhz * 1e6;
    c.phi = phi_rad;
    return c;
}

PulseSetup PulseConfig::to_setup() const {
    PulseSetup p;
    p.n_photons = n_photons;
    p.n_lo = n_lo;
    p.tau_pulse = tau_pulse_ns * 1e-9;
    p.train_gap = train_gap_ms * 1e-3;
    return p;
}

std::vector<MechMode> ExperimentConfig::mech_modes() const {
    std::vector<MechMode> out;
    for (const auto& m : modes) out.push_back(m.to_mode());
    return out;
}

void ExperimentConfig::validate() const {
    try {
        if (modes.empty()) throw ConfigError("at least one [[mode]] is required");
        for (const auto& m : modes) {
            if (!(m.freq_mhz > 0.0)) throw ConfigError("mode freq_mhz must be positive");
            if (!(m.temp_k >= 0.0)) throw ConfigError("mode temp_k must be non-negative");
            m.to_mode().validate();
        }
        const auto mm = mech_modes();
        cavity.to_setup().validate();
        pulse.to_setup().validate(mm);
        if (trains < 1) throw ConfigError("trains must be at least 1");
        if (schedule.theta_pi.empty()) throw ConfigError("schedule.theta_pi must not be empty");
        for (double t : schedule.theta_pi)
            if (!(t > 0.0)) throw ConfigError("tomography angles must be positive");
        for (int n : schedule.decoherence_n)
            if (n < 1) throw ConfigError("decoherence_n entries must be at least 1");
        if (schedule.second_theta_pi < 0.0) throw ConfigError("second_theta_pi must be non-negative");
        if (schedule.accepted_per_angle < 1 || schedule.max_trains_per_angle < schedule.accepted_per_angle)
            throw ConfigError("need 1 <= accepted_per_angle <= max_trains_per_angle");
        if (schedule.trains_per_point < 2) throw ConfigError("trains_per_point must be at least 2");
        if (!(threshold > 0.0 && threshold < 0.5)) throw ConfigError("threshold must lie in (0, 0.5)");
        for (double t : sweep_thresholds)
            if (!(t > 0.0 && t < 0.5)) throw ConfigError("sweep thresholds must lie in (0, 0.5)");
        if (!(offset_sd >= 0.0)) throw ConfigError("offset_sd must be non-negative");
        if (!std::isfinite(schedule.kick_omega)) throw ConfigError("kick_omega must be finite");
        if (!(detector_gain > 0.0)) throw ConfigError("detector_gain must be positive");
        parse_conversion(conversion);
        if (seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
            throw ConfigError("seed must fit in a signed 64-bit integer");
        if (threads < 0) throw ConfigError("threads must be non-negative");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    ModeConfig m1;
    m1.freq_mhz = 3.1081;
    m1.gamma_hz = 400.0;
    m1.temp_k = 3.2;
    ModeConfig m2 = m1;
    m2.freq_mhz = 3.2280;
    c.modes = {m1, m2};
    for (int k = 0; k <= 8; ++k) c.schedule.theta_pi.push_back(1.0 + 0.125 * k);
    return c;
}

ExperimentConfig parse_config(const std::string& toml_text) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(os.str());
    }
    reject_unknown(root,
                   {"mode", "cavity", "pulse", "schedule", "trains", "seed", "threads", "threshold",
                    "sweep_thresholds", "offset_sd", "detector_gain", "conversion", "calibration", "output_dir"},
                   "top level");

    ExperimentConfig c = default_config();
    if (const auto* node = root.get("mode")) {
        const auto* arr = node->as_array();
        if (!arr) throw ConfigError("'mode' must be an array of tables ([[mode]])");
        c.modes.clear();
        for (const auto& el : *arr) {
            const auto* t = el.as_table();
            if (!t) throw ConfigError("'mode' entries must be tables");
            reject_unknown(*t, {"freq_mhz", "gamma_hz", "temp_k", "n_th", "x_zpf_rel"}, "[[mode]]");
            ModeConfig m;
            m.freq_mhz = get_double(*t, "freq_mhz", 0.0);
            m.gamma_hz = get_double(*t, "gamma_hz", 0.0);
            m.temp_k = get_double(*t, "temp_k", 0.0);
            m.n_th = get_double(*t, "n_th", -1.0);
            m.x_zpf_rel = get_double(*t, "x_zpf_rel", 1.0);
            c.modes.push_back(m);
        }
    }
    if (const auto* t = subtable(root, "cavity")) {
        reject_unknown(*t,
                       {"g0_mhz", "kappa_ghz", "kappa_in_ghz", "kappa_out_ghz", "eta_in", "eta_out",
                        "detuning0_mhz", "phi_rad"},
                       "[cavity]");
        auto& cv = c.cavity;
        cv.g0_mhz = get_double(*t, "g0_mhz", cv.g0_mhz);
        cv.kappa_ghz = get_double(*t, "kappa_ghz", cv.kappa_ghz);
        cv.kappa_in_ghz = get_double(*t, "kappa_in_ghz", cv.kappa_in_ghz);
        cv.kappa_out_ghz = get_double(*t, "kappa_out_ghz", cv.kappa_out_ghz);
        cv.eta_in = get_double(*t, "eta_in", cv.eta_in);
        cv.eta_out = get_double(*t, "eta_out", cv.eta_out);
        cv.detuning0_mhz = get_double(*t, "detuning0_mhz", cv.detuning0_mhz);
        cv.phi_rad = get_double(*t, "phi_rad", cv.phi_rad);
    }
    if (const auto* t = subtable(root, "pulse")) {
        reject_unknown(*t, {"n_photons", "n_lo", "tau_pulse_ns", "train_gap_ms"}, "[pulse]");
        auto& p = c.pulse;
        p.n_photons = get_double(*t, "n_photons", p.n_photons);
        p.n_lo = get_double(*t, "n_lo", p.n_lo);
        p.tau_pulse_ns = get_double(*t, "tau_pulse_ns", p.tau_pulse_ns);
        p.train_gap_ms = get_double(*t, "train_gap_ms", p.train_gap_ms);
    }
    if (const auto* t = subtable(root, "schedule")) {
        reject_unknown(*t,
                       {"theta_pi", "decoherence_n", "second_theta_pi", "accepted_per_angle",
                        "max_trains_per_angle", "trains_per_point", "kick_omega"},
                       "[schedule]");
        auto& s = c.schedule;
        s.theta_pi = get_array<double>(*t, "theta_pi", s.theta_pi);
        s.decoherence_n = get_array<int>(*t, "decoherence_n", s.decoherence_n);
        s.second_theta_pi = get_double(*t, "second_theta_pi", s.second_theta_pi);
        s.accepted_per_angle = get_count(*t, "accepted_per_angle", s.accepted_per_angle);
        s.max_trains_per_angle = get_count(*t, "max_trains_per_angle", s.max_trains_per_angle);
        s.trains_per_point = get_count(*t, "trains_per_point", s.trains_per_point);
        s.kick_omega = get_double(*t, "kick_omega", s.kick_omega);
    }
    c.trains = get_count(root, "trains", c.trains);
    const std::int64_t seed = get_int(root, "seed", static_cast<std::int64_t>(c.seed));
    if (seed < 0) throw ConfigError("seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.threads = static_cast<int>(get_int(root, "threads", c.threads));
    c.threshold = get_double(root, "threshold", c.threshold);
    c.sweep_thresholds = get_array<double>(root, "sweep_thresholds", c.sweep_thresholds);
    c.offset_sd = get_double(root, "offset_sd", c.offset_sd);
    c.detector_gain = get_double(root, "detector_gain", c.detector_gain);
    c.conversion = get_string(root, "conversion", c.conversion);
    c.calibration = get_string(root, "calibration", c.calibration);
    c.output_dir = get_string(root, "output_dir", c.output_dir);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

std::string to_toml(const ExperimentConfig& c) {
    toml::table root;
    root.insert("trains", static_cast<std::int64_t>(c.trains));
    root.insert("seed", static_cast<std::int64_t>(c.seed));
    root.insert("threads", static_cast<std::int64_t>(c.threads));
    root.insert("threshold", c.threshold);
    root.insert("sweep_thresholds", to_array(c.sweep_thresholds));
    root.insert("offset_sd", c.offset_sd);
    root.insert("detector_gain", c.detector_gain);
    root.insert("conversion", c.conversion);
    root.insert("calibration", c.calibration);
    root.insert("output_dir", c.output_dir);

    toml::array modes;
    for (const auto& m : c.modes) {
        toml::table t;
        t.insert("freq_mhz", m.freq_mhz);
        t.insert("gamma_hz", m.gamma_hz);
        t.insert("temp_k", m.temp_k);
        t.insert("n_th", m.n_th);
        t.insert("x_zpf_rel", m.x_zpf_rel);
        modes.push_back(std::move(t));
    }
    root.insert("mode", std::move(modes));

    toml::table cav;
    cav.insert("g0_mhz", c.cavity.g0_mhz);
    cav.insert("kappa_ghz", c.cavity.kappa_ghz);
    cav.insert("kappa_in_ghz", c.cavity.kappa_in_ghz);
    cav.insert("kappa_out_ghz", c.cavity.kappa_out_ghz);
    cav.insert("eta_in", c.cavity.eta_in);
    cav.insert("eta_out", c.cavity.eta_out);
    cav.insert("detuning0_mhz", c.cavity.detuning0_mhz);
    cav.insert("phi_rad", c.cavity.phi_rad);
    root.insert("cavity", std::move(cav));

    toml::table pul;
    pul.insert("n_photons", c.pulse.n_photons);
    pul.insert("n_lo", c.pulse.n_lo);
    pul.insert("tau_pulse_ns", c.pulse.tau_pulse_ns);
    pul.insert("train_gap_ms", c.pulse.train_gap_ms);
    root.insert("pulse", std::move(pul));

    toml::table sch;
    sch.insert("theta_pi", to_array(c.schedule.theta_pi));
    sch.insert("decoherence_n", to_array(c.schedule.decoherence_n));
    sch.insert("second_theta_pi", c.schedule.second_theta_pi);
    sch.insert("accepted_per_angle", static_cast<std::int64_t>(c.schedule.accepted_per_angle));
    sch.insert("max_trains_per_angle", static_cast<std::int64_t>(c.schedule.max_trains_per_angle));
    sch.insert("trains_per_point", static_cast<std::int64_t>(c.schedule.trains_per_point));
    sch.insert("kick_omega", c.schedule.kick_omega);
    root.insert("schedule", std::move(sch));

    std::ostringstream os;
    os << root << '\n';
    return os.str();
}

std::string config_hash(const ExperimentConfig& config) {
    // where and how fast a run executes does not change its results
    ExperimentConfig c = config;
    c.threads = 0;
    c.output_dir.clear();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_toml(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace pulsedtomo

#include "pulsedtomo/condition.hpp"

#include "pulsedtomo/calibrate.hpp"
#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace pulsedtomo {

Conditioning parse_conditioning(std::string_view name) {
    if (name == "none") return Conditioning::None;
    if (name == "one-pulse") return Conditioning::OnePulse;
    if (name == "two-pulse") return Conditioning::TwoPulse;
    throw InvalidParameter("unknown conditioning '" + std::string(name) + "'");
}

std::string to_string(Conditioning c) {
    switch (c) {
    case Conditioning::None: return "none";
    case Conditioning::OnePulse: return "one-pulse";
    case Conditioning::TwoPulse: return "two-pulse";
    }
    return "?";
}

void PulseSchedule::validate() const {
    if (!(theta > 0.0)) throw InvalidParameter("tomography angle must be positive");
    if (!(second_theta >= 0.0)) throw InvalidParameter("second tomography angle must be non-negative");
}

std::vector<double> PulseSchedule::angles() const {
    std::vector<double> a(preparation_angles.begin(), preparation_angles.end());
    if (has_second() && second_theta < theta) a.push_back(second_theta);
    a.push_back(theta);
    if (has_second() && second_theta >= theta) a.push_back(second_theta);
    return a;
}

double Conversion::to_displacement(double h_norm, double offset) const {
    if (!(beta > 0.0)) throw InvalidParameter("conversion needs a positive beta");
    if (kind == ConversionKind::Linear) return h_norm / beta;
    // Saturated samples map onto the branch point.
    const double h = std::clamp(h_norm - offset, -0.5, 0.5);
    return invert_transduction(h).minus / beta;
}

ConversionKind parse_conversion(std::string_view name) {
    if (name == "linear") return ConversionKind::Linear;
    if (name == "branch-inverse") return ConversionKind::BranchInverse;
    throw InvalidParameter("unknown conversion '" + std::string(name) + "'");
}

double TomographyValue::s_cond(Conditioning c) const {
    switch (c) {
    case Conditioning::None: return s_none;
    case Conditioning::OnePulse: return s_one;
    case Conditioning::TwoPulse: return s_two;
    }
    return s_two;
}

void TrainSetup::validate() const {
    if (modes.empty()) throw InvalidParameter("at least one mechanical mode is required");
    for (const auto& m : modes) m.validate();
    schedule.validate();
    if (!(detector_gain > 0.0)) throw InvalidParameter("detector gain must be positive");
    if (!(conversion.scale_a > 0.0)) throw InvalidParameter("conversion scale must be positive");
}

TrainOutput run_train(QuadratureState state, const TrainSetup& setup, std::uint64_t train_id, RngStream& rng) {
    if (state.modes.size() != setup.modes.size())
        throw InvalidParameter("state and mode list differ in size");
    const double omega1 = setup.modes.front().omega;
    const double beta = setup.transducer.beta();
    const double noise_sd = setup.transducer.noise_sd();
    const std::vector<double> angles = setup.schedule.angles();

    TrainOutput out;
    out.pulses.reserve(angles.size());
    std::vector<bool> wrong(angles.size());
    double t_prev = angles.front() / omega1;
    for (std::size_t k = 0; k < angles.size(); ++k) {
        const double t = angles[k] / omega1;
        if (t > t_prev) state = evolve_dephase(std::move(state), setup.modes, t - t_prev, rng);
        t_prev = t;
        const double x = displacement_at(state, setup.modes, t);
        const double h = setup.transducer.response(x) + state.v_off + rng.normal(noise_sd);
        wrong[k] = setup.transducer.coupled && std::abs(beta * x) > 1.0;
        PulseRecord rec;
        rec.train_id = train_id;
        rec.pulse_index = static_cast<int>(k);
        rec.t = t;
        rec.theta = angles[k];
        // detector units divided by the calibrated scale
        rec.h_norm = setup.detector_gain * h / setup.conversion.scale_a;
        out.pulses.push_back(rec);
    }

    ConditionalSample& s = out.sample;
    s.train_id = train_id;
    double off = 0.0;
    for (int k = 0; k < 4; ++k) off += out.pulses[k].h_norm;
    off /= 4.0;
    s.offset = off;
    double mean4 = 0.0;
    for (int k = 0; k < 4; ++k) {
        s.prep[k] = setup.conversion.to_displacement(out.pulses[k].h_norm, off);
        s.h_centered[k] = out.pulses[k].h_norm - off;
        s.wrong_branch[k] = wrong[k];
        mean4 += s.prep[k];
    }
    mean4 /= 4.0;
    s.x_hat = (s.prep[3] - s.prep[2]) / 2.0;
    s.y_hat = (s.prep[1] - s.prep[0]) / 2.0;

    auto tomo_value = [&](double theta) {
        const auto it = std::find(angles.begin() + 4, angles.end(), theta);
        const auto& rec = out.pulses[static_cast<std::size_t>(it - angles.begin())];
        TomographyValue v;
        v.theta = theta;
        v.raw = setup.conversion.to_displacement(rec.h_norm, off);
        v.s_none = v.raw - mean4;
        v.s_one = v.s_none - s.x_hat * std::cos(theta);
        v.s_two = v.s_one - s.y_hat * std::sin(theta);
        return v;
    };
    s.tomo.push_back(tomo_value(setup.schedule.theta));
    if (setup.schedule.has_second()) s.tomo.push_back(tomo_value(setup.schedule.second_theta));
    return out;
}

QuadratureSet QuadratureSet::for_conditioning(Conditioning c) {
    switch (c) {
    case Conditioning::None: return none();
    case Conditioning::OnePulse: return {true, false};
    case Conditioning::TwoPulse: return both();
    }
    return both();
}

bool pair_accepted(const ConditionalSample& s, bool x_pair, double threshold) {
    const int a = x_pair ? 2 : 0;
    return std::abs(s.h_centered[a]) < threshold && std::abs(s.h_centered[a + 1]) < threshold;
}

bool is_accepted(const ConditionalSample& s, QuadratureSet required, double threshold) {
    return (!required.x || pair_accepted(s, true, threshold)) && (!required.y || pair_accepted(s, false, threshold));
}

Selection post_select(std::span<const ConditionalSample> samples, double threshold, QuadratureSet required) {
    if (!(threshold > 0.0)) throw InvalidParameter("post-selection threshold must be positive");
    Selection sel;
    SelectionStats& st = sel.stats;
    st.n_total = samples.size();
    std::size_t pair_seen = 0, pair_kept = 0, pair_wrong = 0;
    for (const auto& s : samples) {
        bool wrong = false;
        for (int pair = 0; pair < 2; ++pair) {
            const bool is_x = pair == 1;
            const int a = is_x ? 2 : 0;
            const bool ok = pair_accepted(s, is_x, threshold);
            const bool w = s.wrong_branch[a] || s.wrong_branch[a + 1];
            ++pair_seen;
            if (ok) {
                ++pair_kept;
                if (w) ++pair_wrong;
            }
            if ((is_x ? required.x : required.y) && w) wrong = true;
        }
        if (is_accepted(s, required, threshold)) {
            sel.accepted.push_back(s);
            if (wrong) ++st.wrong_branch;
        }
    }
    st.n_accepted = sel.accepted.size();
    st.empty = st.n_accepted == 0;
    if (st.n_total > 0) st.retention = static_cast<double>(st.n_accepted) / static_cast<double>(st.n_total);
    if (st.n_accepted > 0)
        st.contamination = static_cast<double>(st.wrong_branch) / static_cast<double>(st.n_accepted);
    if (pair_seen > 0) st.pair_retention = static_cast<double>(pair_kept) / static_cast<double>(pair_seen);
    if (pair_kept > 0) st.pair_contamination = static_cast<double>(pair_wrong) / static_cast<double>(pair_kept);
    return sel;
}

BranchStatistics branch_statistics(double threshold, double beta, double sigma_th) {
    if (!(threshold > 0.0 && threshold < 0.5)) throw InvalidParameter("threshold must lie in (0, 0.5)");
    if (!(beta > 0.0) || !(sigma_th > 0.0)) throw InvalidParameter("beta and sigma_th must be positive");
    const BranchPair d = invert_transduction(threshold);
    BranchStatistics b;
    b.x_lo = d.minus / beta;
    b.x_hi = d.plus / beta;
    const double inner = std::erf(b.x_lo / (sigma_th * std::sqrt(2.0)));
    const double outer = std::erfc(b.x_hi / (sigma_th * std::sqrt(2.0)));
    b.retention = inner + outer;
    b.wrong_fraction = outer / b.retention;
    return b;
}

double noise_correction(std::string_view kind) {
    if (kind == "two-pulse") return 7.0 / 4.0;
    if (kind == "non-conditional" || kind == "none") return 5.0 / 4.0;
    throw InvalidParameter("unknown noise-correction kind '" + std::string(kind) + "'");
}

std::array<double, 5> sequence_coefficients(Conditioning c, double theta) {
    const double cx = c == Conditioning::None ? 0.0 : std::cos(theta) / 2.0;
    const double sy = c == Conditioning::TwoPulse ? std::sin(theta) / 2.0 : 0.0;
    return {sy - 0.25, -sy - 0.25, cx - 0.25, -cx - 0.25, 1.0};
}

double noise_floor_variance_factor(Conditioning c, double theta) {
    double f = 0.0;
    for (double w : sequence_coefficients(c, theta)) f += w * w;
    return f;
}

double analytic_variance(VarianceKind kind, double theta, double t, std::span<const ModeTerm> modes) {
    if (!(t >= 0.0)) throw InvalidParameter("time must be non-negative");
    double v = 0.0;
    const double c1 = std::cos(theta);
    const double s1 = std::sin(theta);
    for (const auto& m : modes) {
        const double e = std::exp(-m.gamma * t);
        const double cr = std::cos(m.r * theta);
        const double sr = std::sin(m.r * theta);
        double f = 0.0;
        switch (kind) {
        case VarianceKind::Difference:
            f = 2.0 - 2.0 * e * cr;
            break;
        case VarianceKind::OnePulse:
            f = 1.0 + c1 * c1 - 2.0 * e * c1 * cr;
            break;
        case VarianceKind::TwoPulse: {
            const double ch = std::cos(m.r * pi / 2.0);
            const double sh = std::sin(m.r * pi / 2.0);
            f = 2.0 + 2.0 * ch * s1 * c1 - 2.0 * e * (c1 * cr + ch * s1 * cr + sh * s1 * sr);
            break;
        }
        case VarianceKind::TwoPulseApprox:
            f = 2.0 - 2.0 * e * (c1 * cr + s1 * sr);
            break;
        }
        v += f * m.var_q;
    }
    return v;
}

double full_sequence_variance(double theta, double r, double var_q2) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double b1 = 2.0 * c + (1.0 - 2.0 * c) * std::cos(pi * r) - 4.0 * std::cos(theta * r) +
                      (2.0 * s + 1.0) * std::cos(1.5 * pi * r) + (1.0 - 2.0 * s) * std::cos(2.5 * pi * r) + 1.0;
    const double b2 = (2.0 * s + 1.0) * std::sin(1.5 * pi * r) + (1.0 - 2.0 * s) * std::sin(2.5 * pi * r) +
                      4.0 * std::sin(theta * r) + (1.0 - 2.0 * c) * std::sin(pi * r);
    return (b1 * b1 + b2 * b2) / 16.0 * var_q2;
}

double sequence_variance(std::span<const double> angles, std::span<const double> coeffs,
                         std::span<const MechMode> modes, double sigma_m) {
    if (angles.size() != coeffs.size()) throw InvalidParameter("one coefficient per pulse is required");
    if (modes.empty()) throw InvalidParameter("at least one mechanical mode is required");
    const double omega1 = modes.front().omega;
    double v = 0.0;
    for (const auto& m : modes) {
        double acc = 0.0;
        for (std::size_t k = 0; k < angles.size(); ++k)
            for (std::size_t l = 0; l < angles.size(); ++l) {
                const double dt = (angles[k] - angles[l]) / omega1;
                acc += coeffs[k] * coeffs[l] * std::exp(-m.dephasing_rate() * std::abs(dt)) * std::cos(m.omega * dt);
            }
        v += acc * m.quadrature_variance();
    }
    double w2 = 0.0;
    for (double c : coeffs) w2 += c * c;
    return v + w2 * sigma_m * sigma_m;
}

double decoherence_envelope(double t, double gamma_decay, double n_th) {
    if (!(t >= 0.0)) throw InvalidParameter("time must be non-negative");
    return std::sqrt(-8.0 * n_th * std::expm1(-t * gamma_decay / 2.0));
}

double decoherence_variance(double theta, Conditioning c, std::span<const MechMode> modes, double gamma_decay,
                            double sigma_m, double prior_scale) {
    if (modes.empty()) throw InvalidParameter("at least one mechanical mode is required");
    const auto coeffs = sequence_coefficients(c, theta);
    const double omega1 = modes.front().omega;
    const double gamma = gamma_decay / 2.0;
    const double t = theta / omega1;
    const double decay = std::exp(-gamma * t);
    double v = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        double ac = 0.0, as = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            const double tk = preparation_angles[k] / omega1;
            ac += coeffs[k] * std::cos(modes[i].omega * tk);
            as += coeffs[k] * std::sin(modes[i].omega * tk);
        }
        ac += coeffs[4] * decay * std::cos(modes[i].omega * t);
        as += coeffs[4] * decay * std::sin(modes[i].omega * t);
        const double var_q = modes[i].quadrature_variance();
        const double prior = var_q * (ac * ac + as * as);
        const double innovation = -var_q * std::expm1(-2.0 * gamma * t);
        v += (i == 0 ? 1.0 : prior_scale) * prior + innovation;
    }
    return v + noise_floor_variance_factor(c, theta) * sigma_m * sigma_m;
}

DecoherenceFit fit_decoherence(std::span<const DecoherencePoint> points, std::span<const MechMode> modes,
                               double sigma_m, double gamma_guess) {
    if (points.size() < 3) throw StatisticsError("decoherence fit needs at least three points");
    if (!(gamma_guess > 0.0)) throw InvalidParameter("gamma guess must be positive");
    for (const auto& p : points)
        if (p.n < 2) throw StatisticsError("decoherence point with fewer than two samples");

    ResidualFn residuals = [&](std::span<const double> q, std::span<double> r) {
        const double g = std::exp(q[0]);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double m = decoherence_variance(points[i].theta, Conditioning::TwoPulse, modes, g, sigma_m, q[1]);
            const double se = m * std::sqrt(2.0 / static_cast<double>(points[i].n));
            r[i] = (points[i].variance - m) / se;
        }
    };
    const LsqResult res = least_squares(residuals, points.size(), {std::log(gamma_guess), 1.0});
    if (!res.converged)
        throw FitFailure("decoherence fit did not converge", "status=" + res.status);
    DecoherenceFit fit;
    fit.gamma_decay = std::exp(res.params[0]);
    fit.gamma_decay_se = fit.gamma_decay * res.std_errors[0];
    fit.prior_scale = res.params[1];
    fit.chi2 = res.chi2;
    fit.dof = res.dof;
    return fit;
}

GaussianState GaussianState::thermal(double n_th) {
    if (!(n_th >= 0.0)) throw InvalidParameter("thermal occupation must be non-negative");
    GaussianState g;
    g.cov = Eigen::Matrix2d::Identity() * (2.0 * n_th);
    return g;
}

GaussianState GaussianState::vacuum() {
    GaussianState g;
    g.cov = Eigen::Matrix2d::Identity();
    return g;
}

bool GaussianState::is_psd(double tol) const {
    if (std::abs(cov(0, 1) - cov(1, 0)) > tol * std::max(1.0, cov.cwiseAbs().maxCoeff())) return false;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    return es.eigenvalues().minCoeff() >= -tol * std::max(1.0, cov.cwiseAbs().maxCoeff());
}

GaussianState gaussian_update(const GaussianState& prior, double measured, double chi, double eta_ratio,
                              double kick, int quadrature) {
    if (!(chi > 0.0)) throw InvalidParameter("chi must be positive");
    if (quadrature != 0 && quadrature != 1) throw InvalidParameter("quadrature index must be 0 or 1");
    const double sm = sigma_m(chi);
    const double sba = sigma_ba(chi, eta_ratio);
    const int other = 1 - quadrature;

    Eigen::RowVector2d h = Eigen::RowVector2d::Zero();
    h(quadrature) = 1.0;
    const double innovation_var = (h * prior.cov * h.transpose())(0, 0) + sm * sm;
    const Eigen::Vector2d gain = prior.cov * h.transpose() / innovation_var;
    const Eigen::Matrix2d a = Eigen::Matrix2d::Identity() - gain * h;

    GaussianState post;
    post.mean = prior.mean + gain * (measured - prior.mean(quadrature));
    // Joseph form stays symmetric PSD under rounding
    post.cov = a * prior.cov * a.transpose() + gain * (sm * sm) * gain.transpose();
    post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
    post.cov(other, other) += sba * sba;
    post.mean(other) += kick * std::sqrt(2.0);
    return post;
}

double uncertainty_product(double chi, double eta_ratio) {
    const double sm = sigma_m(chi);
    return std::sqrt(sm * (sm + sigma_ba(chi, eta_ratio)));
}

void write_conditional_csv(std::ostream& os, std::span<const ConditionalSample> samples, Conditioning c,
                           QuadratureSet required, double threshold) {
    os << "train_id,theta,s_cond_xzpf,X_hat,Y_hat,accepted\n";
    os.precision(12);
    for (const auto& s : samples)
        for (const auto& v : s.tomo)
            os << s.train_id << ',' << v.theta << ',' << v.s_cond(c) << ',' << s.x_hat << ',' << s.y_hat << ','
               << (is_accepted(s, required, threshold) ? 1 : 0) << '\n';
}

void write_analytics_csv(std::ostream& os, std::span<const AnalyticsRow> rows) {
    os << "theta,mc_width,analytic_width,second_mode_width,noise_floor\n";
    os.precision(12);
    for (const auto& r : rows)
        os << r.theta << ',' << r.mc_width << ',' << r.analytic_width << ',' << r.second_mode_width << ','
           << r.noise_floor << '\n';
}

} // namespace pulsedtomo

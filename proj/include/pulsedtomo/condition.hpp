#pragma once

#include "pulsedtomo/mechsim.hpp"
#include "pulsedtomo/params.hpp"
#include "pulsedtomo/rng.hpp"
#include "pulsedtomo/transduce.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pulsedtomo {

enum class Conditioning { None, OnePulse, TwoPulse };

Conditioning parse_conditioning(std::string_view name);
std::string to_string(Conditioning c);

/// Preparation pulses at fixed mode-1 phases, Y pair first, then X pair.
inline constexpr std::array<double, 4> preparation_angles = {-2.5 * pi, -1.5 * pi, -pi, 0.0};

struct PulseSchedule {
    double theta = two_pi;      ///< tomography angle, mode-1 phase
    double second_theta = 0.0;  ///< optional extra tomography pulse, 0 = off

    bool has_second() const { return second_theta > 0.0; }
    void validate() const;
    /// All pulse angles in time order.
    std::vector<double> angles() const;
};

/// Maps a calibrated H' to displacement in x_zpf units.
enum class ConversionKind { Linear, BranchInverse };

struct Conversion {
    ConversionKind kind = ConversionKind::Linear;
    double beta = 0.0;
    double scale_a = 1.0;  ///< detector units per H'

    /// `offset` is the train offset estimate in H' units; the linear map ignores it
    /// (the sequence algebra cancels it), the branch inverse needs it removed first.
    double to_displacement(double h_norm, double offset) const;
};

ConversionKind parse_conversion(std::string_view name);

struct TomographyValue {
    double theta = 0.0;
    double raw = 0.0;  ///< converted tomography pulse, x_zpf
    double s_none = 0.0;
    double s_one = 0.0;
    double s_two = 0.0;

    double s_cond(Conditioning c) const;
};

struct ConditionalSample {
    std::uint64_t train_id = 0;
    std::array<double, 4> prep{};       ///< converted preparation pulses, x_zpf
    std::array<double, 4> h_centered{}; ///< preparation H' minus the offset estimate
    std::array<bool, 4> wrong_branch{}; ///< simulation truth: |beta x| > 1 at the pulse
    double offset = 0.0;                ///< (P0+P1+P2+P3)/4 in H' units
    double x_hat = 0.0;
    double y_hat = 0.0;
    std::vector<TomographyValue> tomo;  ///< primary angle first

    double s_cond(Conditioning c) const { return tomo.front().s_cond(c); }
};

struct TrainSetup {
    std::vector<MechMode> modes;
    Transducer transducer;
    Conversion conversion;
    PulseSchedule schedule;
    double detector_gain = 1.0;  ///< true A used to synthesize detector units
    void validate() const;
};

struct TrainOutput {
    std::vector<PulseRecord> pulses;
    ConditionalSample sample;
};

/// Runs one preparation + tomography sequence. `state` is the mechanical state at
/// the time of the first preparation pulse; modes advance at their own omega and
/// dephase over the physical gaps.
TrainOutput run_train(QuadratureState state, const TrainSetup& setup, std::uint64_t train_id, RngStream& rng);

/// Which preparation pairs must pass the threshold.
struct QuadratureSet {
    bool x = false;
    bool y = false;
    static QuadratureSet none() { return {}; }
    static QuadratureSet both() { return {true, true}; }
    static QuadratureSet for_conditioning(Conditioning c);
};

bool pair_accepted(const ConditionalSample& s, bool x_pair, double threshold);
bool is_accepted(const ConditionalSample& s, QuadratureSet required, double threshold);

struct SelectionStats {
    std::size_t n_total = 0;
    std::size_t n_accepted = 0;
    double retention = 0.0;
    std::size_t wrong_branch = 0;     ///< accepted trains with a required pulse on the outer branch
    double contamination = 0.0;
    double pair_retention = 0.0;      ///< per quadrature pair, pooled over X and Y
    double pair_contamination = 0.0;
    bool empty = false;
};

struct Selection {
    std::vector<ConditionalSample> accepted;
    SelectionStats stats;
};

Selection post_select(std::span<const ConditionalSample> samples, double threshold, QuadratureSet required);

/// Noiseless single-pulse picture of the threshold: |x| < x_lo is kept on the
/// linear branch, |x| > x_hi re-enters from the outer branch.
struct BranchStatistics {
    double x_lo = 0.0;
    double x_hi = 0.0;
    double retention = 0.0;      ///< per pulse, Gaussian x with sd sigma_th
    double wrong_fraction = 0.0; ///< outer-branch share of the retained pulses
};

BranchStatistics branch_statistics(double threshold, double beta, double sigma_th);

/// Variance divisor for measured noise-floor widths: "two-pulse" -> 7/4, "non-conditional" -> 5/4.
double noise_correction(std::string_view kind);

/// Shot-noise variance of s_cond in units of sigma_m^2 (sum of squared sequence weights).
double noise_floor_variance_factor(Conditioning c, double theta);

/// Weights of (P0, P1, P2, P3, P_theta) in s_cond.
std::array<double, 5> sequence_coefficients(Conditioning c, double theta);

/// One mode in the closed-form variances: frequency ratio to mode 1, dephasing
/// rate gamma = Gamma/2 and quadrature variance.
struct ModeTerm {
    double r = 1.0;
    double gamma = 0.0;
    double var_q = 0.0;
};

enum class VarianceKind { Difference, OnePulse, TwoPulse, TwoPulseApprox };

/// Closed forms for x(theta) - x(0), x(theta) - cos(theta) x(0) and
/// x(theta) - cos(theta) x(0) - sin(theta) x(pi/2), summed over modes. The
/// preparation values are read from the state at time 0 and t is the time to
/// the tomography pulse.
double analytic_variance(VarianceKind kind, double theta, double t, std::span<const ModeTerm> modes);

/// Second-mode contribution for the full five-pulse sequence without dephasing.
double full_sequence_variance(double theta, double r, double var_q2);

/// Variance of sum_k c_k x(t_k) + shot noise from the stationary covariance kernel
/// Var(Q_i) exp(-gamma_i |dt|) cos(omega_i dt). Angles are mode-1 phases.
double sequence_variance(std::span<const double> angles, std::span<const double> coeffs,
                         std::span<const MechMode> modes, double sigma_m);

/// sqrt(8 n_th (1 - exp(-t Gamma / 2)))
double decoherence_envelope(double t, double gamma_decay, double n_th);

/// Conditional variance model used to fit the decay rate: preparation-state part
/// (frozen during the preparation, decaying as exp(-gamma t) into the tomography
/// pulse), fresh thermal innovation, and shot noise. `prior_scale` multiplies the
/// prior part of modes other than mode 1, absorbing the narrowing caused by
/// post-selection on the preparation pulses.
double decoherence_variance(double theta, Conditioning c, std::span<const MechMode> modes, double gamma_decay,
                            double sigma_m, double prior_scale = 1.0);

struct DecoherencePoint {
    double theta = 0.0;
    double variance = 0.0;
    std::size_t n = 0;
};

struct DecoherenceFit {
    double gamma_decay = 0.0;
    double gamma_decay_se = 0.0;
    double prior_scale = 1.0;
    double chi2 = 0.0;
    int dof = 0;
};

/// Weighted least squares of (Gamma, prior_scale), variance errors Var sqrt(2/n).
DecoherenceFit fit_decoherence(std::span<const DecoherencePoint> points, std::span<const MechMode> modes,
                               double sigma_m, double gamma_guess);

struct GaussianState {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();

    /// Var(X) = Var(Y) = 2 n_th, the classical thermal convention used throughout.
    static GaussianState thermal(double n_th);
    /// Minimum-uncertainty state, Var = x_zpf^2 per quadrature.
    static GaussianState vacuum();
    bool is_psd(double tol = 1e-9) const;
};

/// Measurement of quadrature `quadrature` (0 = X, 1 = Y) with imprecision
/// x_zpf/chi; the conjugate quadrature gains sigma_ba^2 and is displaced by
/// kick * sqrt(2).
GaussianState gaussian_update(const GaussianState& prior, double measured, double chi, double eta_ratio,
                              double kick = 0.0, int quadrature = 0);

/// sqrt(sigma_m (sigma_m + sigma_ba)) in x_zpf units.
double uncertainty_product(double chi, double eta_ratio);

/// Columns: train_id, theta, s_cond_xzpf, X_hat, Y_hat, accepted.
void write_conditional_csv(std::ostream& os, std::span<const ConditionalSample> samples, Conditioning c,
                           QuadratureSet required, double threshold);

struct AnalyticsRow {
    double theta = 0.0;
    double mc_width = 0.0;
    double analytic_width = 0.0;
    double second_mode_width = 0.0;
    double noise_floor = 0.0;
};

void write_analytics_csv(std::ostream& os, std::span<const AnalyticsRow> rows);

} // namespace pulsedtomo

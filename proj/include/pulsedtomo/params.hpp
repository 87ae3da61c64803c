#pragma once

#include <span>
#include <string>
#include <vector>

namespace pulsedtomo {

// CODATA 2018
inline constexpr double k_boltzmann = 1.380649000e-23;   // J/K
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

/// One mechanical mode. Displacements are tracked in units of its x_zpf.
struct MechMode {
    double omega = 0.0;        ///< rad/s
    double gamma_decay = 0.0;  ///< energy decay rate Gamma, rad/s
    double n_th = 0.0;         ///< mean thermal phonon number
    double x_zpf_rel = 1.0;

    static MechMode from_temperature(double omega, double gamma_decay, double temperature);

    double dephasing_rate() const { return 0.5 * gamma_decay; }
    /// 2 n_th in units of the reference x_zpf (mode quadratures are scaled by x_zpf_rel).
    double quadrature_variance() const { return 2.0 * n_th * x_zpf_rel * x_zpf_rel; }
    double period() const;
    void validate() const;
};

struct CavitySetup {
    double g0 = 0.0;         ///< rad/s
    double kappa = 0.0;      ///< rad/s
    double kappa_in = 0.0;   ///< rad/s, only enters the symbolic amplitude prefactor
    double kappa_out = 0.0;  ///< rad/s
    double eta_in = 0.0;
    double eta_out = 0.0;
    double detuning0 = 0.0;  ///< rad/s
    double phi = pi / 2.0;   ///< homodyne phase

    double beta() const;
    void validate() const;
};

struct PulseSetup {
    double n_photons = 0.0;
    double n_lo = 0.0;
    double tau_pulse = 0.0;  ///< s
    double train_gap = 0.0;  ///< s

    /// Throws on invalid values; returns human-readable warnings (e.g. pulse
    /// longer than 5% of a mechanical period).
    std::vector<std::string> validate(std::span<const MechMode> modes) const;
};

double derive_beta(const CavitySetup& cavity);
double derive_chi(const CavitySetup& cavity, const PulseSetup& pulse);

/// Single-pulse displacement imprecision x_zpf/chi.
double sigma_m(double chi);
/// Backaction width sqrt(eta_in/eta_out) * chi.
double sigma_ba(double chi, double eta_ratio);

double thermal_occupation(double temperature, double omega);
/// Inverse of the single-mode mapping width = sqrt(2 n_th): T = width^2 hbar omega / (2 k_B).
double effective_temperature(double width, double omega);

/// sqrt(sum 2 n_th,i x_zpf_rel,i^2) in x_zpf units.
double thermal_width(std::span<const MechMode> modes);

struct DerivedScalars {
    double beta = 0.0;
    double chi = 0.0;
    double sigma_th = 0.0;
    double sigma_m = 0.0;
    double sigma_ba = 0.0;
};

DerivedScalars derive_scalars(std::span<const MechMode> modes, const CavitySetup& cavity,
                              const PulseSetup& pulse);

} // namespace pulsedtomo

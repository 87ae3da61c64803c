#include "pulsedtomo/params.hpp"

#include "pulsedtomo/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pulsedtomo {

MechMode MechMode::from_temperature(double omega, double gamma_decay, double temperature) {
    MechMode m;
    m.omega = omega;
    m.gamma_decay = gamma_decay;
    m.n_th = thermal_occupation(temperature, omega);
    return m;
}

double MechMode::period() const { return two_pi / omega; }

void MechMode::validate() const {
    if (!(omega > 0.0)) throw InvalidParameter("mechanical omega must be positive");
    if (!(gamma_decay >= 0.0)) throw InvalidParameter("mechanical gamma_decay must be non-negative");
    if (!(n_th >= 0.0)) throw InvalidParameter("thermal occupation must be non-negative");
    if (!(x_zpf_rel > 0.0)) throw InvalidParameter("x_zpf_rel must be positive");
}

double CavitySetup::beta() const { return derive_beta(*this); }

void CavitySetup::validate() const {
    if (!(kappa > 0.0)) throw InvalidParameter("cavity kappa must be positive");
    if (!(eta_in >= 0.0 && eta_in <= 1.0)) throw InvalidParameter("eta_in must lie in [0, 1]");
    if (!(eta_out >= 0.0 && eta_out <= 1.0)) throw InvalidParameter("eta_out must lie in [0, 1]");
}

std::vector<std::string> PulseSetup::validate(std::span<const MechMode> modes) const {
    if (!(n_photons > 0.0)) throw InvalidParameter("n_photons must be positive");
    if (!(n_lo > 0.0)) throw InvalidParameter("n_lo must be positive");
    if (!(tau_pulse >= 0.0)) throw InvalidParameter("tau_pulse must be non-negative");
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const double period = modes[i].period();
        if (tau_pulse > 0.05 * period) {
            std::ostringstream os;
            os << "pulse duration " << tau_pulse << " s exceeds 5% of the period of mode " << i
               << " (" << period << " s); snapshot assumption is marginal";
            warnings.push_back(os.str());
        }
    }
    return warnings;
}

double derive_beta(const CavitySetup& cavity) {
    if (!(cavity.kappa > 0.0)) throw InvalidParameter("kappa must be positive");
    return 2.0 * cavity.g0 / cavity.kappa;
}

double derive_chi(const CavitySetup& cavity, const PulseSetup& pulse) {
    if (!(pulse.n_photons > 0.0)) throw InvalidParameter("n_photons must be positive");
    cavity.validate();
    return 8.0 * std::sqrt(cavity.eta_in * cavity.eta_out * pulse.n_photons) * cavity.g0 / cavity.kappa;
}

double sigma_m(double chi) {
    if (!(chi > 0.0)) throw InvalidParameter("chi must be positive");
    return 1.0 / chi;
}

double sigma_ba(double chi, double eta_ratio) {
    if (!(eta_ratio >= 0.0)) throw InvalidParameter("eta ratio must be non-negative");
    return std::sqrt(eta_ratio) * chi;
}

double thermal_occupation(double temperature, double omega) {
    if (!(omega > 0.0)) throw InvalidParameter("omega must be positive");
    if (!(temperature >= 0.0)) throw InvalidParameter("temperature must be non-negative");
    return k_boltzmann * temperature / (hbar * omega);
}

double effective_temperature(double width, double omega) {
    if (!(omega > 0.0)) throw InvalidParameter("omega must be positive");
    if (!(width >= 0.0)) throw InvalidParameter("width must be non-negative");
    return width * width * hbar * omega / (2.0 * k_boltzmann);
}

double thermal_width(std::span<const MechMode> modes) {
    if (modes.empty()) throw InvalidParameter("thermal_width needs at least one mode");
    double var = 0.0;
    for (const auto& m : modes) {
        if (!(m.n_th >= 0.0)) throw InvalidParameter("thermal occupation must be non-negative");
        var += m.quadrature_variance();
    }
    return std::sqrt(var);
}

DerivedScalars derive_scalars(std::span<const MechMode> modes, const CavitySetup& cavity,
                              const PulseSetup& pulse) {
    DerivedScalars d;
    d.beta = derive_beta(cavity);
    d.chi = derive_chi(cavity, pulse);
    d.sigma_th = thermal_width(modes);
    d.sigma_m = d.chi > 0.0 ? 1.0 / d.chi : std::numeric_limits<double>::infinity();
    d.sigma_ba = cavity.eta_out > 0.0 ? sigma_ba(d.chi, cavity.eta_in / cavity.eta_out) : 0.0;
    return d;
}

} // namespace pulsedtomo

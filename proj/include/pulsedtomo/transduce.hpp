#pragma once

#include "pulsedtomo/params.hpp"
#include "pulsedtomo/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>

namespace pulsedtomo {

/// One integrated homodyne pulse, normalized to H' = H / A.
struct PulseRecord {
    std::uint64_t train_id = 0;
    int pulse_index = 0;
    double t = 0.0;      ///< pulse center, s (0 at the last preparation pulse)
    double theta = 0.0;  ///< omega_1 t
    double h_norm = 0.0;
};

/// Normalized homodyne response for arbitrary detuning and LO phase:
/// [cos(phi) + u sin(phi)] / (1 + u^2) with u = 2 (Delta0 + g0 x_n) / kappa.
double homodyne_full(double x_n, const CavitySetup& cavity);

/// beta x / (beta^2 x^2 + 1)
double homodyne_eq1(double x_n, double beta);

/// Noise model of a pulsed measurement. Shot noise is additive in H' units with
/// sd beta/chi, i.e. a displacement-equivalent imprecision of x_zpf/chi in the
/// linear regime. With coupled == false the mechanics does not shift the cavity
/// (off-resonant reference).
struct Transducer {
    CavitySetup cavity;
    double chi = 0.0;
    bool coupled = true;

    double beta() const { return cavity.beta(); }
    double noise_sd() const;
    double response(double x_n) const;
};

/// Snapshot measurement of a frozen displacement; returns the noisy H'.
double measure_pulse(double x_n, const Transducer& transducer, RngStream& rng);

/// Integrated balanced-detector output in units where the shot-noise sd is sqrt(N_lo):
/// sqrt(N_lo) * chi * H' / beta (equal to sqrt(N_lo) chi x_n in the linear regime).
double integrated_homodyne(double h_norm, const Transducer& transducer, double n_lo);

void write_pulse_csv(std::ostream& os, std::span<const PulseRecord> records);

} // namespace pulsedtomo

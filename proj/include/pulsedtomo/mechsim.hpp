#pragma once

#include "pulsedtomo/params.hpp"
#include "pulsedtomo/rng.hpp"

#include <span>
#include <vector>

namespace pulsedtomo {

struct Quadrature {
    double x = 0.0;
    double y = 0.0;
};

/// Quadrature amplitudes of every mode (x_zpf units), the train offset
/// (normalized homodyne units) and the time of the last update.
struct QuadratureState {
    std::vector<Quadrature> modes;
    double v_off = 0.0;
    double epoch = 0.0;
};

QuadratureState sample_thermal_state(std::span<const MechMode> modes, double offset_sd, RngStream& rng);

/// sum_i X_i cos(theta_i) + Y_i sin(theta_i)
double displacement(const QuadratureState& state, std::span<const double> angles);

/// Displacement at physical time t, with theta_i = omega_i t.
double displacement_at(const QuadratureState& state, std::span<const MechMode> modes, double t);

/// Ornstein-Uhlenbeck step on each quadrature with rate gamma_i = Gamma_i / 2.
/// The stationary variance 2 n_th,i is preserved and Cov[X(t), X(0)] = exp(-gamma t) Var X.
QuadratureState evolve_dephase(QuadratureState state, std::span<const MechMode> modes, double dt,
                               RngStream& rng);

} // namespace pulsedtomo

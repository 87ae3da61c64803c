#include "pulsedtomo/mechsim.hpp"

#include "pulsedtomo/errors.hpp"

#include <cmath>

namespace pulsedtomo {

QuadratureState sample_thermal_state(std::span<const MechMode> modes, double offset_sd, RngStream& rng) {
    if (modes.empty()) throw InvalidParameter("at least one mechanical mode is required");
    if (!(offset_sd >= 0.0)) throw InvalidParameter("offset_sd must be non-negative");
    QuadratureState s;
    s.modes.reserve(modes.size());
    for (const auto& m : modes) {
        m.validate();
        const double sd = std::sqrt(m.quadrature_variance());
        Quadrature q;
        q.x = rng.normal(sd);
        q.y = rng.normal(sd);
        s.modes.push_back(q);
    }
    s.v_off = rng.normal(offset_sd);
    return s;
}

double displacement(const QuadratureState& state, std::span<const double> angles) {
    if (angles.size() != state.modes.size())
        throw InvalidParameter("one angle per mode is required");
    double x = 0.0;
    for (std::size_t i = 0; i < angles.size(); ++i)
        x += state.modes[i].x * std::cos(angles[i]) + state.modes[i].y * std::sin(angles[i]);
    return x;
}

double displacement_at(const QuadratureState& state, std::span<const MechMode> modes, double t) {
    if (modes.size() != state.modes.size())
        throw InvalidParameter("state and mode list differ in size");
    double x = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const double a = modes[i].omega * t;
        x += state.modes[i].x * std::cos(a) + state.modes[i].y * std::sin(a);
    }
    return x;
}

QuadratureState evolve_dephase(QuadratureState state, std::span<const MechMode> modes, double dt,
                               RngStream& rng) {
    if (!(dt >= 0.0)) throw InvalidParameter("dephasing step must be non-negative");
    if (modes.size() != state.modes.size())
        throw InvalidParameter("state and mode list differ in size");
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const double rate = modes[i].dephasing_rate();
        if (rate == 0.0) continue;
        const double decay = std::exp(-rate * dt);
        // 1 - exp(-2 gamma dt)
        const double innov = std::sqrt(modes[i].quadrature_variance() * -std::expm1(-2.0 * rate * dt));
        auto& q = state.modes[i];
        q.x = decay * q.x + innov * rng.normal();
        q.y = decay * q.y + innov * rng.normal();
    }
    state.epoch += dt;
    return state;
}

} // namespace pulsedtomo

#include "pulsedtomo/transduce.hpp"

#include "pulsedtomo/errors.hpp"

#include <cmath>
#include <ostream>

namespace pulsedtomo {

double homodyne_full(double x_n, const CavitySetup& cavity) {
    const double u = 2.0 * (cavity.detuning0 + cavity.g0 * x_n) / cavity.kappa;
    return (std::cos(cavity.phi) + u * std::sin(cavity.phi)) / (1.0 + u * u);
}

double homodyne_eq1(double x_n, double beta) {
    const double d = beta * x_n;
    if (!std::isfinite(d)) return 0.0;
    return d / (d * d + 1.0);
}

double Transducer::noise_sd() const {
    if (!(chi > 0.0)) throw InvalidParameter("chi must be positive");
    return beta() / chi;
}

double Transducer::response(double x_n) const {
    return homodyne_full(coupled ? x_n : 0.0, cavity);
}

double measure_pulse(double x_n, const Transducer& transducer, RngStream& rng) {
    const double sd = transducer.noise_sd();
    return transducer.response(x_n) + rng.normal(sd);
}

double integrated_homodyne(double h_norm, const Transducer& transducer, double n_lo) {
    if (!(n_lo > 0.0)) throw InvalidParameter("n_lo must be positive");
    return std::sqrt(n_lo) * transducer.chi * h_norm / transducer.beta();
}

void write_pulse_csv(std::ostream& os, std::span<const PulseRecord> records) {
    os << "train_id,pulse_index,t,theta,h_norm\n";
    os.precision(17);
    for (const auto& r : records)
        os << r.train_id << ',' << r.pulse_index << ',' << r.t << ',' << r.theta << ',' << r.h_norm << '\n';
}

} // namespace pulsedtomo

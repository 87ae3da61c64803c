#pragma once

#include <iosfwd>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

namespace pulsedtomo {

/// Both preimages of H' = D / (D^2 + 1). `plus` is +-infinity at H' = 0.
struct BranchPair {
    double minus = 0.0;  ///< |D| <= 1, the linear branch
    double plus = 0.0;   ///< |D| >= 1
};

/// Throws NoRealSolution for |H'| > 0.5.
BranchPair invert_transduction(double h_prime);

/// |dD/dH'| on both branches: |D| / (|H'| sqrt(1 - 4 H'^2)).
BranchPair branch_jacobian(double h_prime);

/// Density of H' when D = beta x_n is N(0, sigma_delta^2), summed over both
/// branches. Zero outside [-0.5, 0.5], +infinity at exactly +-0.5.
double thermal_pdf(double h_prime, double sigma_delta);

/// Thermal histogram model in detector units: v = A (H'(D) + noise), noise ~ N(0, noise_sd^2) in H' units.
struct HistogramModel {
    double sigma_delta = 0.0;
    double scale_a = 1.0;
    double noise_sd = 0.0;

    void validate() const;
    /// Convolved density at v (detector units).
    double density(double v) const;
    /// Probability of v in [lo, hi).
    double bin_mass(double lo, double hi) const;
};

/// thermal_pdf convolved with N(0, noise_sd^2), in H' units, on `grid`. The
/// grid must cover +-(0.5 + 5 noise_sd); scale_a is ignored.
std::vector<double> convolve_noise(const HistogramModel& model, std::span<const double> grid);

struct BinnedHistogram {
    std::vector<double> edges;
    std::vector<double> counts;
    double total_n = 0.0;

    static BinnedHistogram from_samples(std::span<const double> samples, std::vector<double> edges);

    std::size_t size() const { return counts.size(); }
    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    /// counts / (total_n * width)
    double density(std::size_t i) const;
    void validate() const;
};

/// Equal-width edges spanning the sample with the Freedman-Diaconis width 2 IQR n^(-1/3).
std::vector<double> freedman_diaconis_edges(std::span<const double> samples);

/// Variance factor (6 - 2 cos(r pi)) / 8 of the half-period difference (P(0) - P(pi)) / 2
/// relative to random sampling, for two modes of equal quadrature variance.
double half_period_variance_factor(double r);

struct CalibrationGuess {
    double scale_a = 1.0;
    double sigma_delta = 1.0;
    double noise_sd = 0.0;  ///< held fixed during the fit
};

/// Starting point from the histogram: A from the outermost maxima (peaks sit at +-A/2).
CalibrationGuess guess_calibration(const BinnedHistogram& hist, double noise_sd, double sigma_delta = 1.0);

struct CalibrationFit {
    HistogramModel model;
    double scale_a_se = 0.0;
    double sigma_delta_se = 0.0;
    double residual_chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    std::size_t n_samples = 0;
    std::vector<std::string> warnings;

    /// x_n = v / (A beta) in the linear regime.
    double to_displacement(double v, double beta) const { return v / (model.scale_a * beta); }
};

/// Weighted least squares of (scale_a, sigma_delta) against the binned density,
/// with Poisson weights. Throws FitFailure if the optimizer does not converge.
CalibrationFit fit_calibration(const BinnedHistogram& hist, const CalibrationGuess& guess, int max_iterations = 200);

nlohmann::json to_json(const CalibrationFit& fit);
CalibrationFit calibration_from_json(const nlohmann::json& j);

/// Columns: bin_center, density, model_density.
void write_histogram_csv(std::ostream& os, const BinnedHistogram& hist, const HistogramModel& model);

} // namespace pulsedtomo

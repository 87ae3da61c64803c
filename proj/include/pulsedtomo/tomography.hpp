#pragma once

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

namespace pulsedtomo {

/// Conditional samples grouped by tomography angle (mode-1 phase).
struct MarginalSet {
    std::vector<double> angles;
    std::vector<std::vector<double>> samples;

    void add(double angle, std::vector<double> values);
    std::vector<std::size_t> counts() const;
    void validate() const;
};

struct MarginalWidth {
    double gaussian_sd = 0.0;  ///< primary estimate, Gaussian fit to the binned sample
    double gaussian_sd_se = 0.0;
    double sample_sd = 0.0;
    double bootstrap_se = 0.0;  ///< of the sample sd
    std::size_t n = 0;
};

/// Needs at least 100 samples; a constant sample has width 0.
MarginalWidth marginal_width(std::span<const double> samples, std::uint64_t seed = 1);

/// Least-squares Gaussian fit (mean, sd) to a sampled density on an equally spaced axis.
std::pair<double, double> gaussian_fit_density(std::span<const double> axis, std::span<const double> density);

/// Marginal densities at angles in [0, pi) on one equally spaced axis.
struct Projections {
    std::vector<double> angles;
    std::vector<double> axis;
    std::vector<std::vector<double>> densities;
};

struct GridSpec {
    double half_width = 0.0;  ///< x_zpf; 0 picks 5 times the widest marginal sd
    std::size_t n = 129;      ///< points per axis, odd so the origin is a node
    bool hann = true;
    /// Filter band edge as a fraction of Nyquist. 0 lets inverse_radon choose it so
    /// that the Hann window blurs by blur_fraction of the narrowest marginal sd
    /// (Gaussian-equivalent blur tau / (sqrt(2) cutoff)); elsewhere 0 means 1.
    double cutoff = 0.0;
    double blur_fraction = 0.2;

    double step() const { return 2.0 * half_width / static_cast<double>(n - 1); }
};

struct PhaseSpaceDensity {
    std::vector<double> axis;    ///< shared by x and p
    std::vector<double> values;  ///< row-major, values[ip * n + ix]
    double step = 0.0;
    double scale = 1.0;  ///< factor applied to reach unit integral

    std::size_t size() const { return axis.size(); }
    double at(std::size_t ix, std::size_t ip) const { return values[ip * axis.size() + ix]; }
    double integral() const;
};

/// Folds the angles into [0, pi) (theta and theta + pi are mirror images),
/// merges duplicates and bins every marginal on a common axis with the grid step.
Projections bin_marginals(const MarginalSet& marginals, const GridSpec& grid);

/// Ram-Lak filtered back-projection with linear interpolation. Angles must lie in [0, pi).
PhaseSpaceDensity filtered_back_projection(const Projections& proj, const GridSpec& grid, bool normalize = true);

/// Throws CoverageError when the angles span less than pi.
PhaseSpaceDensity inverse_radon(const MarginalSet& marginals, GridSpec grid);

/// Marginal of the density along x cos(angle) + p sin(angle), sampled on `axis`.
std::vector<double> forward_project(const PhaseSpaceDensity& density, double angle, std::span<const double> axis);

struct Point2 {
    double x = 0.0;
    double p = 0.0;
};

struct Contour {
    double level = 0.0;
    double peak = 0.0;  ///< fitted peak height; level = peak / 2
    std::vector<Point2> polyline;  ///< the largest closed half-maximum contour
    std::size_t n_contours = 0;
    double area = 0.0;
    double mean_fwhm = 0.0;  ///< equivalent-area diameter
    double fwhm_major = 0.0;
    double fwhm_minor = 0.0;
    double axis_ratio = 1.0;  ///< major / minor
    std::vector<std::string> warnings;
};

/// Half-maximum level set by marching squares.
Contour fwhm_contour(const PhaseSpaceDensity& density);

/// Columns: x, p, value.
void write_density_csv(std::ostream& os, const PhaseSpaceDensity& density);
/// Columns: s_xzpf, density.
void write_marginal_csv(std::ostream& os, std::span<const double> axis, std::span<const double> density);
nlohmann::json density_metadata(const PhaseSpaceDensity& density, const Contour& contour,
                                std::span<const double> angles);

} // namespace pulsedtomo

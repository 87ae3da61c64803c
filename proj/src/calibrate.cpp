#include "pulsedtomo/calibrate.hpp"

#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/lsq.hpp"
#include "pulsedtomo/params.hpp"
#include "pulsedtomo/stats.hpp"
#include "pulsedtomo/transduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace pulsedtomo {

namespace {

constexpr double inv_sqrt_two_pi = 0.39894228040143267794;
constexpr double inv_sqrt_two = 0.70710678118654752440;

double gauss_pdf(double z) { return inv_sqrt_two_pi * std::exp(-0.5 * z * z); }

/// P(zlo <= Z < zhi) for a standard normal, accurate in both tails.
double gauss_interval(double zlo, double zhi) {
    if (zlo >= 0.0) return 0.5 * (std::erfc(zlo * inv_sqrt_two) - std::erfc(zhi * inv_sqrt_two));
    if (zhi <= 0.0) return 0.5 * (std::erfc(-zhi * inv_sqrt_two) - std::erfc(-zlo * inv_sqrt_two));
    return 1.0 - 0.5 * std::erfc(-zlo * inv_sqrt_two) - 0.5 * std::erfc(zhi * inv_sqrt_two);
}

/// Nodes in D = beta x_n with weights that already include the N(0, sigma^2)
/// density (composite Simpson), and the noiseless response H'(D) at each node.
struct DeltaNodes {
    std::vector<double> h;
    std::vector<double> weight;
};

DeltaNodes delta_nodes(double sigma, double noise_sd) {
    DeltaNodes nodes;
    if (sigma < 1e-12) {
        nodes.h = {0.0};
        nodes.weight = {1.0};
        return nodes;
    }
    const double half_range = 9.0 * sigma;
    // |dH'/dD| <= 1, so this step resolves the noise kernel everywhere
    double step = std::min(sigma / 40.0, noise_sd / 8.0);
    auto n = static_cast<std::size_t>(std::ceil(2.0 * half_range / step));
    n = std::clamp<std::size_t>(n + (n % 2), 200, 400000);
    step = 2.0 * half_range / static_cast<double>(n);
    nodes.h.resize(n + 1);
    nodes.weight.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double d = -half_range + step * static_cast<double>(i);
        const double simpson = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        nodes.h[i] = homodyne_eq1(d, 1.0);
        nodes.weight[i] = simpson * step / 3.0 * gauss_pdf(d / sigma) / sigma;
    }
    return nodes;
}

double nodes_density(const DeltaNodes& nodes, double y, double noise_sd) {
    double p = 0.0;
    for (std::size_t j = 0; j < nodes.h.size(); ++j)
        p += nodes.weight[j] * gauss_pdf((y - nodes.h[j]) / noise_sd);
    return p / noise_sd;
}

double nodes_mass(const DeltaNodes& nodes, double ylo, double yhi, double noise_sd) {
    double m = 0.0;
    for (std::size_t j = 0; j < nodes.h.size(); ++j)
        m += nodes.weight[j] * gauss_interval((ylo - nodes.h[j]) / noise_sd, (yhi - nodes.h[j]) / noise_sd);
    return m;
}

} // namespace

BranchPair invert_transduction(double h_prime) {
    if (std::abs(h_prime) > 0.5)
        throw NoRealSolution("|H'| > 0.5 lies outside the range of the transduction function");
    if (h_prime == 0.0) return {0.0, std::numeric_limits<double>::infinity()};
    const double s = std::sqrt(std::max(0.0, 1.0 - 4.0 * h_prime * h_prime));
    // (1 - s) / (2H') rewritten without cancellation; the roots multiply to 1
    const double minus = 2.0 * h_prime / (1.0 + s);
    return {minus, 1.0 / minus};
}

BranchPair branch_jacobian(double h_prime) {
    if (std::abs(h_prime) >= 0.5)
        throw NoRealSolution("branch Jacobian diverges for |H'| >= 0.5");
    const double s = std::sqrt(1.0 - 4.0 * h_prime * h_prime);
    const double minus = 2.0 / ((1.0 + s) * s);
    if (h_prime == 0.0) return {minus, std::numeric_limits<double>::infinity()};
    const double plus = (1.0 + s) / (2.0 * h_prime * h_prime * s);
    return {minus, plus};
}

double thermal_pdf(double h_prime, double sigma_delta) {
    if (!(sigma_delta > 0.0)) throw InvalidParameter("sigma_delta must be positive");
    const double a = std::abs(h_prime);
    if (a > 0.5) return 0.0;
    if (a == 0.5) return std::numeric_limits<double>::infinity();
    const BranchPair d = invert_transduction(h_prime);
    const BranchPair j = branch_jacobian(h_prime);
    double p = gauss_pdf(d.minus / sigma_delta) / sigma_delta * j.minus;
    if (h_prime != 0.0) p += gauss_pdf(d.plus / sigma_delta) / sigma_delta * j.plus;
    return p;
}

void HistogramModel::validate() const {
    if (!(sigma_delta >= 0.0)) throw InvalidParameter("sigma_delta must be non-negative");
    if (!(scale_a > 0.0)) throw InvalidParameter("scale_a must be positive");
    if (!(noise_sd > 0.0)) throw InvalidParameter("noise_sd must be positive");
}

double HistogramModel::density(double v) const {
    validate();
    const DeltaNodes nodes = delta_nodes(sigma_delta, noise_sd);
    return nodes_density(nodes, v / scale_a, noise_sd) / scale_a;
}

double HistogramModel::bin_mass(double lo, double hi) const {
    validate();
    const DeltaNodes nodes = delta_nodes(sigma_delta, noise_sd);
    return nodes_mass(nodes, lo / scale_a, hi / scale_a, noise_sd);
}

std::vector<double> convolve_noise(const HistogramModel& model, std::span<const double> grid) {
    model.validate();
    const double reach = 0.5 + 5.0 * model.noise_sd;
    if (grid.empty() || grid.front() > -reach || grid.back() < reach) {
        std::ostringstream os;
        os << "convolution grid must cover +-" << reach << " in H' units";
        throw CoverageError(os.str());
    }
    const DeltaNodes nodes = delta_nodes(model.sigma_delta, model.noise_sd);
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = nodes_density(nodes, grid[i], model.noise_sd);
    return out;
}

BinnedHistogram BinnedHistogram::from_samples(std::span<const double> samples, std::vector<double> edges) {
    BinnedHistogram h;
    h.edges = std::move(edges);
    if (h.edges.size() < 2) throw InvalidParameter("histogram needs at least one bin");
    h.counts.assign(h.edges.size() - 1, 0.0);
    for (double x : samples) {
        if (x < h.edges.front() || x >= h.edges.back()) continue;
        auto it = std::upper_bound(h.edges.begin(), h.edges.end(), x);
        h.counts[static_cast<std::size_t>(it - h.edges.begin()) - 1] += 1.0;
    }
    h.total_n = static_cast<double>(samples.size());
    h.validate();
    return h;
}

double BinnedHistogram::density(std::size_t i) const { return counts[i] / (total_n * width(i)); }

void BinnedHistogram::validate() const {
    if (edges.size() != counts.size() + 1) throw InvalidParameter("edges must have one more entry than counts");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        if (!(edges[i + 1] > edges[i])) throw InvalidParameter("histogram edges must be strictly increasing");
    for (double c : counts)
        if (c < 0.0) throw InvalidParameter("histogram counts must be non-negative");
    if (!(total_n > 0.0)) throw InvalidParameter("histogram is empty");
}

std::vector<double> freedman_diaconis_edges(std::span<const double> samples) {
    if (samples.size() < 4) throw StatisticsError("too few samples for Freedman-Diaconis binning");
    const double iqr = quantile(samples, 0.75) - quantile(samples, 0.25);
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) throw StatisticsError("degenerate sample: all values equal");
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(samples.size()));
    if (!(width > 0.0)) width = (hi - lo) / 10.0;
    const auto n = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil((hi - lo) / width)), 1, 100000);
    width = (hi - lo) / static_cast<double>(n);
    std::vector<double> edges(n + 1);
    for (std::size_t i = 0; i <= n; ++i) edges[i] = lo + width * static_cast<double>(i);
    edges.back() = std::nextafter(hi, std::numeric_limits<double>::infinity());
    return edges;
}

double half_period_variance_factor(double r) { return (6.0 - 2.0 * std::cos(r * pi)) / 8.0; }

CalibrationGuess guess_calibration(const BinnedHistogram& hist, double noise_sd, double sigma_delta) {
    hist.validate();
    CalibrationGuess g;
    g.noise_sd = noise_sd;
    g.sigma_delta = sigma_delta;
    std::size_t center = 0;
    while (center + 1 < hist.size() && hist.center(center + 1) <= 0.0) ++center;
    std::size_t left = 0;
    for (std::size_t i = 0; i <= center; ++i)
        if (hist.counts[i] > hist.counts[left]) left = i;
    std::size_t right = hist.size() - 1;
    for (std::size_t i = center; i < hist.size(); ++i)
        if (hist.counts[i] > hist.counts[right]) right = i;
    const double span = hist.center(right) - hist.center(left);
    const double central = hist.counts[center];
    const bool double_peaked = span > 4.0 * hist.width(center) && hist.counts[left] > 1.2 * central &&
                               hist.counts[right] > 1.2 * central;
    if (double_peaked) {
        g.scale_a = span;
    } else {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < hist.size(); ++i) {
            m1 += hist.counts[i] * hist.center(i);
            m2 += hist.counts[i] * hist.center(i) * hist.center(i);
        }
        const double n = std::max(1.0, std::accumulate(hist.counts.begin(), hist.counts.end(), 0.0));
        const double sd = std::sqrt(std::max(0.0, m2 / n - (m1 / n) * (m1 / n)));
        g.scale_a = sd / std::hypot(noise_sd, 0.5 * sigma_delta);
    }
    return g;
}

CalibrationFit fit_calibration(const BinnedHistogram& hist, const CalibrationGuess& guess, int max_iterations) {
    hist.validate();
    if (!(guess.noise_sd > 0.0)) throw InvalidParameter("calibration fit needs a positive noise_sd");
    if (!(guess.scale_a > 0.0) || !(guess.sigma_delta > 0.0))
        throw InvalidParameter("calibration guesses must be positive");

    const std::size_t n_bins = hist.size();
    const double n_total = hist.total_n;
    const double noise_sd = guess.noise_sd;
    ResidualFn residuals = [&](std::span<const double> p, std::span<double> r) {
        const double scale_a = p[0];
        const double sigma = std::exp(p[1]);
        if (!(scale_a > 0.0)) {
            std::fill(r.begin(), r.end(), std::numeric_limits<double>::quiet_NaN());
            return;
        }
        const DeltaNodes nodes = delta_nodes(sigma, noise_sd);
        for (std::size_t i = 0; i < n_bins; ++i) {
            const double m = nodes_mass(nodes, hist.edges[i] / scale_a, hist.edges[i + 1] / scale_a, noise_sd);
            r[i] = (hist.counts[i] - n_total * m) / std::sqrt(std::max(hist.counts[i], 1.0));
        }
    };

    LsqOptions opts;
    opts.max_iterations = max_iterations;
    opts.xtol = 1e-9;
    opts.gtol = 1e-9;
    const LsqResult res = least_squares(residuals, n_bins, {guess.scale_a, std::log(guess.sigma_delta)}, opts);

    std::ostringstream diag;
    diag << "status=" << res.status << " iterations=" << res.iterations << " chi2=" << res.chi2
         << " scale_a=" << res.params[0] << " sigma_delta=" << std::exp(res.params[1]);
    // with sigma_delta -> 0 only the product of scale and width is constrained, so the
    // optimizer drifts along a flat valley; report that case instead of failing
    const bool degenerate = std::exp(res.params[1]) < 0.2 && res.params[0] > 0.0;
    if (!res.converged && !degenerate) throw FitFailure("calibration fit did not converge", diag.str());

    CalibrationFit fit;
    fit.model.scale_a = res.params[0];
    fit.model.sigma_delta = std::exp(res.params[1]);
    fit.model.noise_sd = noise_sd;
    fit.scale_a_se = res.std_errors[0];
    fit.sigma_delta_se = fit.model.sigma_delta * res.std_errors[1];
    fit.residual_chi2 = res.chi2;
    fit.dof = res.dof;
    fit.iterations = res.iterations;
    fit.n_samples = static_cast<std::size_t>(n_total);
    if (!res.converged) fit.warnings.push_back("calibration fit stopped without converging: " + diag.str());
    if (fit.model.sigma_delta < 0.2)
        fit.warnings.push_back("degenerate single-peak histogram (sigma_delta << 1): the +-A/2 peaks that fix the "
                               "scale are absent, so scale_a rests on the noise width alone");
    return fit;
}

nlohmann::json to_json(const CalibrationFit& fit) {
    return nlohmann::json{{"scale_a", fit.model.scale_a},
                          {"sigma_delta", fit.model.sigma_delta},
                          {"noise_sd", fit.model.noise_sd},
                          {"residual_chi2", fit.residual_chi2},
                          {"n_samples", fit.n_samples},
                          {"dof", fit.dof},
                          {"iterations", fit.iterations},
                          {"scale_a_se", fit.scale_a_se},
                          {"sigma_delta_se", fit.sigma_delta_se},
                          {"warnings", fit.warnings}};
}

CalibrationFit calibration_from_json(const nlohmann::json& j) {
    CalibrationFit fit;
    fit.model.scale_a = j.at("scale_a").get<double>();
    fit.model.sigma_delta = j.at("sigma_delta").get<double>();
    fit.model.noise_sd = j.at("noise_sd").get<double>();
    fit.residual_chi2 = j.value("residual_chi2", 0.0);
    fit.n_samples = j.value("n_samples", std::size_t{0});
    fit.dof = j.value("dof", 0);
    fit.iterations = j.value("iterations", 0);
    fit.scale_a_se = j.value("scale_a_se", 0.0);
    fit.sigma_delta_se = j.value("sigma_delta_se", 0.0);
    fit.warnings = j.value("warnings", std::vector<std::string>{});
    return fit;
}

void write_histogram_csv(std::ostream& os, const BinnedHistogram& hist, const HistogramModel& model) {
    model.validate();
    const DeltaNodes nodes = delta_nodes(model.sigma_delta, model.noise_sd);
    os << "bin_center,density,model_density\n";
    os.precision(12);
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double m = nodes_mass(nodes, hist.edges[i] / model.scale_a, hist.edges[i + 1] / model.scale_a,
                                    model.noise_sd);
        os << hist.center(i) << ',' << hist.density(i) << ',' << m / hist.width(i) << '\n';
    }
}

} // namespace pulsedtomo

#include "pulsedtomo/tomography.hpp"

#include "pulsedtomo/calibrate.hpp"
#include "pulsedtomo/errors.hpp"
#include "pulsedtomo/lsq.hpp"
#include "pulsedtomo/params.hpp"
#include "pulsedtomo/stats.hpp"

#include <Eigen/Dense>
#include <fftw3.h>

#include <array>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>

namespace pulsedtomo {

namespace {

constexpr double angle_tol = 1e-9;

/// theta -> (angle in [0, pi), mirror flag)
std::pair<double, bool> fold_angle(double theta) {
    double a = std::fmod(theta, two_pi);
    if (a < 0.0) a += two_pi;
    bool flip = false;
    if (a >= pi - angle_tol) {
        a -= pi;
        flip = true;
    }
    if (a >= pi - angle_tol) {
        a -= pi;
        flip = !flip;
    }
    if (a < 0.0) a = 0.0;
    return {a, flip};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double interp(std::span<const double> values, double pos) {
    if (pos < 0.0) return 0.0;
    const auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= values.size()) return i0 + 1 == values.size() && pos == static_cast<double>(i0) ? values[i0] : 0.0;
    const double f = pos - static_cast<double>(i0);
    return (1.0 - f) * values[i0] + f * values[i0 + 1];
}

// FFTW planning is not thread-safe.
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

/// Convolves each projection with the band-limited ramp kernel of Kak and Slaney,
/// h(0) = 1/(4 tau^2), h(n odd) = -1/(n pi tau)^2, optionally Hann-apodized.
std::vector<std::vector<double>> ramp_filter(const std::vector<std::vector<double>>& proj, double tau, bool hann,
                                             double cutoff) {
    if (proj.empty()) return {};
    const std::size_t m = proj.front().size();
    std::size_t len = 64;
    while (len < 2 * m) len *= 2;
    const std::size_t nc = len / 2 + 1;

    std::vector<double> real(len);
    std::vector<fftw_complex> spec(nc);
    fftw_plan fwd, bwd;
    {
        std::lock_guard lock(fftw_mutex());
        fwd = fftw_plan_dft_r2c_1d(static_cast<int>(len), real.data(), spec.data(), FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_1d(static_cast<int>(len), spec.data(), real.data(), FFTW_ESTIMATE);
    }

    std::fill(real.begin(), real.end(), 0.0);
    for (std::size_t k = 0; k <= len / 2; ++k) {
        double h = 0.0;
        if (k == 0)
            h = 1.0 / (4.0 * tau * tau);
        else if (k % 2 == 1)
            h = -1.0 / (static_cast<double>(k * k) * pi * pi * tau * tau);
        real[k] = h;
        if (k > 0 && k < len / 2) real[len - k] = h;
    }
    fftw_execute(fwd);
    std::vector<double> kernel(nc);
    for (std::size_t f = 0; f < nc; ++f) {
        double w = spec[f][0];
        const double rel = static_cast<double>(f) / (static_cast<double>(nc - 1) * cutoff);
        if (rel > 1.0)
            w = 0.0;
        else if (hann)
            w *= 0.5 * (1.0 + std::cos(pi * rel));
        kernel[f] = w;
    }

    std::vector<std::vector<double>> out;
    out.reserve(proj.size());
    for (const auto& p : proj) {
        std::fill(real.begin(), real.end(), 0.0);
        std::copy(p.begin(), p.end(), real.begin());
        fftw_execute(fwd);
        for (std::size_t f = 0; f < nc; ++f) {
            spec[f][0] *= kernel[f];
            spec[f][1] *= kernel[f];
        }
        fftw_execute(bwd);
        std::vector<double> q(m);
        // c2r is unnormalized; tau is the quadrature step of the convolution sum
        for (std::size_t k = 0; k < m; ++k) q[k] = real[k] * tau / static_cast<double>(len);
        out.push_back(std::move(q));
    }
    {
        std::lock_guard lock(fftw_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    return out;
}

/// Angular quadrature weights on the half circle, sum = pi.
std::vector<double> angular_weights(std::span<const double> sorted_angles) {
    const std::size_t k = sorted_angles.size();
    std::vector<double> w(k);
    if (k == 1) {
        w[0] = pi;
        return w;
    }
    for (std::size_t j = 0; j < k; ++j) {
        const double next = j + 1 < k ? sorted_angles[j + 1] : sorted_angles[0] + pi;
        const double prev = j > 0 ? sorted_angles[j - 1] : sorted_angles[k - 1] - pi;
        w[j] = 0.5 * (next - prev);
    }
    return w;
}

double bilinear(const PhaseSpaceDensity& d, double x, double p) {
    const std::size_t n = d.size();
    const double fx = (x - d.axis.front()) / d.step;
    const double fp = (p - d.axis.front()) / d.step;
    if (fx < 0.0 || fp < 0.0) return 0.0;
    const auto ix = static_cast<std::size_t>(fx);
    const auto ip = static_cast<std::size_t>(fp);
    if (ix + 1 >= n || ip + 1 >= n) return 0.0;
    const double tx = fx - static_cast<double>(ix);
    const double tp = fp - static_cast<double>(ip);
    return (1 - tx) * (1 - tp) * d.at(ix, ip) + tx * (1 - tp) * d.at(ix + 1, ip) + (1 - tx) * tp * d.at(ix, ip + 1) +
           tx * tp * d.at(ix + 1, ip + 1);
}

/// Peak height from a least-squares quadratic in log density over the grid nodes
/// above 60% of the maximum, near the maximum. The grid maximum alone is biased
/// upwards by reconstruction noise. Falls back to the maximum if the fit is not
/// a plausible concave cap.
double peak_estimate(const PhaseSpaceDensity& d, std::size_t arg) {
    const std::size_t n = d.size();
    const double vmax = d.values[arg];
    const auto ip0 = static_cast<std::ptrdiff_t>(arg / n);
    const auto ix0 = static_cast<std::ptrdiff_t>(arg % n);
    const std::ptrdiff_t reach = static_cast<std::ptrdiff_t>(n) / 4;
    std::vector<std::array<double, 6>> rows;
    std::vector<double> rhs;
    for (std::ptrdiff_t ip = std::max<std::ptrdiff_t>(0, ip0 - reach);
         ip <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, ip0 + reach); ++ip)
        for (std::ptrdiff_t ix = std::max<std::ptrdiff_t>(0, ix0 - reach);
             ix <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, ix0 + reach); ++ix) {
            const double v = d.at(static_cast<std::size_t>(ix), static_cast<std::size_t>(ip));
            if (v < 0.6 * vmax) continue;
            const double x = static_cast<double>(ix - ix0);
            const double p = static_cast<double>(ip - ip0);
            rows.push_back({1.0, x, p, x * x, x * p, p * p});
            rhs.push_back(std::log(v / vmax));
        }
    if (rows.size() < 12) return vmax;
    Eigen::MatrixXd a(rows.size(), 6);
    Eigen::VectorXd b(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < 6; ++c) a(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
        b(static_cast<Eigen::Index>(r)) = rhs[r];
    }
    const Eigen::VectorXd q = a.colPivHouseholderQr().solve(b);
    Eigen::Matrix2d h;
    h << 2.0 * q(3), q(4), q(4), 2.0 * q(5);
    if (!(h.determinant() > 0.0 && h(0, 0) < 0.0)) return vmax;
    const Eigen::Vector2d g(q(1), q(2));
    const Eigen::Vector2d top = -h.ldlt().solve(g);
    if (top.norm() > static_cast<double>(reach)) return vmax;
    const double peak = vmax * std::exp(q(0) + 0.5 * g.dot(top));
    return peak > 0.5 * vmax && peak < 1.5 * vmax ? peak : vmax;
}

} // namespace

void MarginalSet::add(double angle, std::vector<double> values) {
    angles.push_back(angle);
    samples.push_back(std::move(values));
}

std::vector<std::size_t> MarginalSet::counts() const {
    std::vector<std::size_t> c;
    for (const auto& s : samples) c.push_back(s.size());
    return c;
}

void MarginalSet::validate() const {
    if (angles.size() != samples.size()) throw InvalidParameter("one sample list per angle is required");
    std::vector<double> folded;
    for (double a : angles) folded.push_back(fold_angle(a).first);
    std::sort(folded.begin(), folded.end());
    const auto distinct =
        std::unique(folded.begin(), folded.end(), [](double a, double b) { return std::abs(a - b) < angle_tol; });
    if (distinct - folded.begin() < 3) throw CoverageError("reconstruction needs at least three distinct angles");
    for (const auto& s : samples)
        if (s.empty()) throw StatisticsError("empty marginal");
}

MarginalWidth marginal_width(std::span<const double> samples, std::uint64_t seed) {
    if (samples.size() < 100) throw StatisticsError("marginal width needs at least 100 samples");
    MarginalWidth w;
    w.n = samples.size();
    w.sample_sd = stddev(samples);
    if (w.sample_sd == 0.0) return w;
    w.bootstrap_se = bootstrap_stddev_se(samples, 200, seed);

    const BinnedHistogram hist = BinnedHistogram::from_samples(samples, freedman_diaconis_edges(samples));
    const double n = hist.total_n;
    ResidualFn residuals = [&](std::span<const double> q, std::span<double> r) {
        const double mu = q[0];
        const double sd = std::exp(q[1]);
        for (std::size_t i = 0; i < hist.size(); ++i) {
            const double mass = normal_cdf((hist.edges[i + 1] - mu) / sd) - normal_cdf((hist.edges[i] - mu) / sd);
            r[i] = (hist.counts[i] - n * mass) / std::sqrt(std::max(hist.counts[i], 1.0));
        }
    };
    if (hist.size() < 3) {
        w.gaussian_sd = w.sample_sd;
        w.gaussian_sd_se = w.bootstrap_se;
        return w;
    }
    const LsqResult res = least_squares(residuals, hist.size(), {mean(samples), std::log(w.sample_sd)});
    if (!res.converged) throw FitFailure("Gaussian marginal fit did not converge", "status=" + res.status);
    w.gaussian_sd = std::exp(res.params[1]);
    w.gaussian_sd_se = w.gaussian_sd * res.std_errors[1];
    return w;
}

std::pair<double, double> gaussian_fit_density(std::span<const double> axis, std::span<const double> density) {
    if (axis.size() != density.size() || axis.size() < 4) throw InvalidParameter("axis and density must match");
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < axis.size(); ++i) {
        const double d = std::max(density[i], 0.0);
        m0 += d;
        m1 += d * axis[i];
        m2 += d * axis[i] * axis[i];
    }
    if (!(m0 > 0.0)) throw StatisticsError("density has no positive mass");
    const double mu0 = m1 / m0;
    const double sd0 = std::sqrt(std::max(m2 / m0 - mu0 * mu0, 1e-300));
    const double step = axis[1] - axis[0];
    ResidualFn residuals = [&](std::span<const double> q, std::span<double> r) {
        const double sd = std::exp(q[1]);
        for (std::size_t i = 0; i < axis.size(); ++i) {
            const double z = (axis[i] - q[0]) / sd;
            r[i] = density[i] - q[2] * std::exp(-0.5 * z * z) / (std::sqrt(two_pi) * sd);
        }
    };
    const LsqResult res = least_squares(residuals, axis.size(), {mu0, std::log(sd0), m0 * step});
    if (!res.converged) throw FitFailure("Gaussian density fit did not converge", "status=" + res.status);
    return {res.params[0], std::exp(res.params[1])};
}

double PhaseSpaceDensity::integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * step * step;
}

Projections bin_marginals(const MarginalSet& marginals, const GridSpec& grid) {
    marginals.validate();
    if (grid.n < 3 || grid.n % 2 == 0) throw InvalidParameter("grid size must be odd and at least 3");
    if (!(grid.half_width > 0.0)) throw InvalidParameter("grid half width must be positive");

    // pool mirrored and repeated angles
    std::map<double, std::vector<double>> pooled;
    for (std::size_t k = 0; k < marginals.angles.size(); ++k) {
        auto [a, flip] = fold_angle(marginals.angles[k]);
        auto it = std::find_if(pooled.begin(), pooled.end(),
                               [&](const auto& kv) { return std::abs(kv.first - a) < angle_tol; });
        if (it == pooled.end()) it = pooled.emplace(a, std::vector<double>{}).first;
        for (double v : marginals.samples[k]) it->second.push_back(flip ? -v : v);
    }

    const double tau = grid.step();
    const auto half = static_cast<std::size_t>(std::ceil(grid.half_width * std::sqrt(2.0) / tau));
    const std::size_t m = 2 * half + 1;
    Projections proj;
    proj.axis.resize(m);
    for (std::size_t k = 0; k < m; ++k) proj.axis[k] = (static_cast<double>(k) - static_cast<double>(half)) * tau;
    for (const auto& [a, values] : pooled) {
        std::vector<double> dens(m, 0.0);
        for (double v : values) {
            const double pos = std::round(v / tau) + static_cast<double>(half);
            if (pos < 0.0 || pos >= static_cast<double>(m)) continue;
            dens[static_cast<std::size_t>(pos)] += 1.0;
        }
        for (double& d : dens) d /= static_cast<double>(values.size()) * tau;
        proj.angles.push_back(a);
        proj.densities.push_back(std::move(dens));
    }
    return proj;
}

PhaseSpaceDensity filtered_back_projection(const Projections& proj, const GridSpec& grid, bool normalize) {
    if (proj.angles.size() != proj.densities.size() || proj.angles.empty())
        throw InvalidParameter("one density per projection angle is required");
    if (proj.axis.size() < 2) throw InvalidParameter("projection axis too short");
    for (double a : proj.angles)
        if (a < 0.0 || a >= pi) throw InvalidParameter("projection angles must lie in [0, pi)");
    for (const auto& d : proj.densities)
        if (d.size() != proj.axis.size()) throw InvalidParameter("projection length differs from axis");
    if (!std::is_sorted(proj.angles.begin(), proj.angles.end()))
        throw InvalidParameter("projection angles must be sorted");

    const double tau = proj.axis[1] - proj.axis[0];
    const auto filtered = ramp_filter(proj.densities, tau, grid.hann, grid.cutoff > 0.0 ? std::min(grid.cutoff, 1.0) : 1.0);
    const auto weights = angular_weights(proj.angles);

    PhaseSpaceDensity out;
    out.step = grid.step();
    out.axis.resize(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) out.axis[i] = -grid.half_width + out.step * static_cast<double>(i);
    out.values.assign(grid.n * grid.n, 0.0);
    const double s0 = proj.axis.front();
    for (std::size_t j = 0; j < proj.angles.size(); ++j) {
        const double c = std::cos(proj.angles[j]);
        const double s = std::sin(proj.angles[j]);
        for (std::size_t ip = 0; ip < grid.n; ++ip)
            for (std::size_t ix = 0; ix < grid.n; ++ix) {
                const double u = out.axis[ix] * c + out.axis[ip] * s;
                out.values[ip * grid.n + ix] += weights[j] * interp(filtered[j], (u - s0) / tau);
            }
    }
    if (normalize) {
        const double total = out.integral();
        if (!(total > 0.0)) throw StatisticsError("reconstructed density has non-positive integral");
        out.scale = 1.0 / total;
        for (double& v : out.values) v *= out.scale;
    }
    return out;
}

PhaseSpaceDensity inverse_radon(const MarginalSet& marginals, GridSpec grid) {
    marginals.validate();
    const auto [lo, hi] = std::minmax_element(marginals.angles.begin(), marginals.angles.end());
    if (*hi - *lo < pi - angle_tol) throw CoverageError("tomography angles must span at least pi");
    double widest = 0.0;
    double narrowest = std::numeric_limits<double>::infinity();
    for (const auto& s : marginals.samples) {
        const double sd = stddev(s);
        widest = std::max(widest, sd);
        narrowest = std::min(narrowest, sd);
    }
    if (grid.half_width <= 0.0) grid.half_width = widest > 0.0 ? 5.0 * widest : 1.0;
    if (grid.cutoff <= 0.0) {
        const double blur = grid.blur_fraction * narrowest;
        grid.cutoff = blur > 0.0 ? std::min(1.0, grid.step() / (std::sqrt(2.0) * blur)) : 1.0;
    }
    return filtered_back_projection(bin_marginals(marginals, grid), grid);
}

std::vector<double> forward_project(const PhaseSpaceDensity& density, double angle, std::span<const double> axis) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double reach = std::abs(density.axis.front()) * std::sqrt(2.0);
    const auto nt = static_cast<std::size_t>(std::ceil(2.0 * reach / density.step));
    const double dt = 2.0 * reach / static_cast<double>(nt);
    std::vector<double> out(axis.size(), 0.0);
    for (std::size_t k = 0; k < axis.size(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i <= nt; ++i) {
            const double t = -reach + dt * static_cast<double>(i);
            acc += bilinear(density, axis[k] * c - t * s, axis[k] * s + t * c);
        }
        out[k] = acc * dt;
    }
    return out;
}

Contour fwhm_contour(const PhaseSpaceDensity& density) {
    const std::size_t n = density.size();
    if (n < 3 || density.values.size() != n * n) throw InvalidParameter("density grid is malformed");
    const auto imax = std::max_element(density.values.begin(), density.values.end());
    const double vmax = *imax;
    if (!(vmax > 0.0)) throw StatisticsError("density has no positive maximum");
    Contour out;
    out.peak = peak_estimate(density, static_cast<std::size_t>(imax - density.values.begin()));
    out.level = 0.5 * out.peak;
    const double level = out.level;
    auto v = [&](std::size_t i, std::size_t j) { return density.values[i * n + j]; };  // i = p row, j = x column

    // Edge keys: 2 * node for the edge to the right of node, 2 * node + 1 for the edge above it.
    auto edge_point = [&](std::size_t key) {
        const std::size_t node = key / 2;
        const std::size_t i = node / n;
        const std::size_t j = node % n;
        const bool up = key % 2 == 1;
        const std::size_t i2 = up ? i + 1 : i;
        const std::size_t j2 = up ? j : j + 1;
        const double a = v(i, j);
        const double b = v(i2, j2);
        const double t = (level - a) / (b - a);
        return Point2{density.axis[j] + t * (density.axis[j2] - density.axis[j]),
                      density.axis[i] + t * (density.axis[i2] - density.axis[i])};
    };

    std::vector<std::pair<std::size_t, std::size_t>> segments;
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t j = 0; j + 1 < n; ++j) {
            const bool c0 = v(i, j) > level, c1 = v(i, j + 1) > level, c2 = v(i + 1, j + 1) > level,
                       c3 = v(i + 1, j) > level;
            const std::size_t e0 = 2 * (i * n + j);            // bottom
            const std::size_t e1 = 2 * (i * n + j + 1) + 1;    // right
            const std::size_t e2 = 2 * ((i + 1) * n + j);      // top
            const std::size_t e3 = 2 * (i * n + j) + 1;        // left
            const int code = c0 | (c1 << 1) | (c2 << 2) | (c3 << 3);
            const bool center = 0.25 * (v(i, j) + v(i, j + 1) + v(i + 1, j + 1) + v(i + 1, j)) > level;
            switch (code) {
            case 0: case 15: break;
            case 1: case 14: segments.emplace_back(e3, e0); break;
            case 2: case 13: segments.emplace_back(e0, e1); break;
            case 3: case 12: segments.emplace_back(e3, e1); break;
            case 4: case 11: segments.emplace_back(e1, e2); break;
            case 6: case 9: segments.emplace_back(e0, e2); break;
            case 7: case 8: segments.emplace_back(e3, e2); break;
            case 5:
                if (center) { segments.emplace_back(e0, e1); segments.emplace_back(e2, e3); }
                else { segments.emplace_back(e3, e0); segments.emplace_back(e1, e2); }
                break;
            case 10:
                if (center) { segments.emplace_back(e3, e0); segments.emplace_back(e1, e2); }
                else { segments.emplace_back(e0, e1); segments.emplace_back(e2, e3); }
                break;
            }
        }

    std::map<std::size_t, std::vector<std::size_t>> by_edge;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        by_edge[segments[s].first].push_back(s);
        by_edge[segments[s].second].push_back(s);
    }
    std::vector<bool> used(segments.size(), false);
    struct Line {
        std::vector<std::size_t> keys;
        bool closed = false;
    };
    std::vector<Line> lines;
    auto other_end = [&](std::size_t seg, std::size_t key) {
        return segments[seg].first == key ? segments[seg].second : segments[seg].first;
    };
    auto next_segment = [&](std::size_t key) -> std::ptrdiff_t {
        for (std::size_t s : by_edge[key])
            if (!used[s]) return static_cast<std::ptrdiff_t>(s);
        return -1;
    };
    for (std::size_t s0 = 0; s0 < segments.size(); ++s0) {
        if (used[s0]) continue;
        used[s0] = true;
        std::vector<std::size_t> fwd{segments[s0].first, segments[s0].second};
        for (std::ptrdiff_t s = next_segment(fwd.back()); s >= 0; s = next_segment(fwd.back())) {
            used[static_cast<std::size_t>(s)] = true;
            fwd.push_back(other_end(static_cast<std::size_t>(s), fwd.back()));
        }
        Line line;
        if (fwd.back() == fwd.front()) {
            fwd.pop_back();
            line.closed = true;
        } else {
            std::vector<std::size_t> back{fwd.front()};
            for (std::ptrdiff_t s = next_segment(back.back()); s >= 0; s = next_segment(back.back())) {
                used[static_cast<std::size_t>(s)] = true;
                back.push_back(other_end(static_cast<std::size_t>(s), back.back()));
            }
            std::reverse(back.begin(), back.end());
            back.pop_back();
            back.insert(back.end(), fwd.begin(), fwd.end());
            fwd = std::move(back);
        }
        line.keys = std::move(fwd);
        lines.push_back(std::move(line));
    }
    out.n_contours = lines.size();
    if (lines.empty()) {
        out.warnings.push_back("no half-maximum contour found");
        return out;
    }

    // Region moments by Green's theorem over the polygon.
    struct Moments {
        double area = 0.0, cx = 0.0, cp = 0.0, ixx = 0.0, ipp = 0.0, ixp = 0.0;
    };
    auto moments = [](const std::vector<Point2>& poly) {
        Moments m;
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const Point2& a = poly[k];
            const Point2& b = poly[(k + 1) % poly.size()];
            const double cr = a.x * b.p - b.x * a.p;
            m.area += cr;
            m.cx += (a.x + b.x) * cr;
            m.cp += (a.p + b.p) * cr;
            m.ixx += (a.x * a.x + a.x * b.x + b.x * b.x) * cr;
            m.ipp += (a.p * a.p + a.p * b.p + b.p * b.p) * cr;
            m.ixp += (a.x * b.p + 2 * a.x * a.p + 2 * b.x * b.p + b.x * a.p) * cr;
        }
        m.area /= 2.0;
        m.cx /= 6.0;
        m.cp /= 6.0;
        m.ixx /= 12.0;
        m.ipp /= 12.0;
        m.ixp /= 24.0;
        return m;
    };

    std::size_t best = 0;
    double best_area = -1.0;
    std::vector<double> areas;
    std::vector<std::vector<Point2>> polys;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        std::vector<Point2> poly;
        for (std::size_t key : lines[k].keys) poly.push_back(edge_point(key));
        const double a = std::abs(moments(poly).area);
        areas.push_back(a);
        polys.push_back(std::move(poly));
        if (a > best_area) {
            best_area = a;
            best = k;
        }
    }
    std::size_t significant = 0;
    for (std::size_t k = 0; k < lines.size(); ++k)
        if (lines[k].closed && areas[k] > 0.01 * best_area) ++significant;
    if (significant > 1) out.warnings.push_back("multi-modal density: several half-maximum contours, largest used");
    if (!lines[best].closed) out.warnings.push_back("half-maximum contour touches the grid boundary");

    out.polyline = polys[best];
    Moments m = moments(out.polyline);
    if (m.area < 0.0) {
        // orientation only flips signs
        m.area = -m.area; m.cx = -m.cx; m.cp = -m.cp; m.ixx = -m.ixx; m.ipp = -m.ipp; m.ixp = -m.ixp;
    }
    out.area = m.area;
    out.mean_fwhm = 2.0 * std::sqrt(m.area / pi);
    if (m.area > 0.0) {
        const double mx = m.cx / m.area;
        const double mp = m.cp / m.area;
        const double sxx = m.ixx / m.area - mx * mx;
        const double spp = m.ipp / m.area - mp * mp;
        const double sxp = m.ixp / m.area - mx * mp;
        const double tr = 0.5 * (sxx + spp);
        const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - spp) * (sxx - spp) + sxp * sxp));
        const double l1 = tr + disc;
        const double l2 = std::max(tr - disc, 0.0);
        // an ellipse with semi-axis a has second moment a^2 / 4 along it
        out.fwhm_major = 4.0 * std::sqrt(l1);
        out.fwhm_minor = 4.0 * std::sqrt(l2);
        out.axis_ratio = l2 > 0.0 ? std::sqrt(l1 / l2) : std::numeric_limits<double>::infinity();
    }
    return out;
}

void write_density_csv(std::ostream& os, const PhaseSpaceDensity& density) {
    os << "x,p,value\n";
    os.precision(12);
    for (std::size_t ip = 0; ip < density.size(); ++ip)
        for (std::size_t ix = 0; ix < density.size(); ++ix)
            os << density.axis[ix] << ',' << density.axis[ip] << ',' << density.at(ix, ip) << '\n';
}

void write_marginal_csv(std::ostream& os, std::span<const double> axis, std::span<const double> density) {
    os << "s_xzpf,density\n";
    os.precision(12);
    for (std::size_t k = 0; k < axis.size(); ++k) os << axis[k] << ',' << density[k] << '\n';
}

nlohmann::json density_metadata(const PhaseSpaceDensity& density, const Contour& contour,
                                std::span<const double> angles) {
    return nlohmann::json{{"grid_step", density.step},
                          {"grid_n", density.size()},
                          {"half_width", density.axis.empty() ? 0.0 : -density.axis.front()},
                          {"normalization_scale", density.scale},
                          {"angles", std::vector<double>(angles.begin(), angles.end())},
                          {"fwhm", contour.mean_fwhm},
                          {"fwhm_major", contour.fwhm_major},
                          {"fwhm_minor", contour.fwhm_minor},
                          {"axis_ratio", contour.axis_ratio},
                          {"peak", contour.peak},
                          {"level", contour.level},
                          {"warnings", contour.warnings}};
}

} // namespace pulsedtomo

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pulsedtomo {

using ResidualFn = std::function<void(std::span<const double> params, std::span<double> residuals)>;

struct LsqOptions {
    int max_iterations = 200;
    double xtol = 1e-10;
    double gtol = 1e-10;
    double ftol = 0.0;
};

struct LsqResult {
    std::vector<double> params;
    std::vector<double> std_errors;  ///< sqrt(diag((J^T J)^-1)), unscaled
    double chi2 = 0.0;
    int iterations = 0;
    int dof = 0;
    bool converged = false;
    std::string status;
};

/// Levenberg-Marquardt (GSL trust-region driver, finite-difference Jacobian).
LsqResult least_squares(const ResidualFn& residuals, std::size_t n_residuals, std::vector<double> initial,
                        const LsqOptions& options = {});

} // namespace pulsedtomo

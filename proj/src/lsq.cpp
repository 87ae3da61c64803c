#include "pulsedtomo/lsq.hpp"

#include "pulsedtomo/errors.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_matrix.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_vector.h>

#include <cmath>
#include <limits>
#include <memory>

namespace pulsedtomo {

namespace {

struct Payload {
    const ResidualFn* fn;
    std::size_t n_params;
    std::size_t n_residuals;
};

int eval_f(const gsl_vector* x, void* data, gsl_vector* f) {
    auto* p = static_cast<Payload*>(data);
    std::vector<double> params(p->n_params);
    for (std::size_t i = 0; i < p->n_params; ++i) params[i] = gsl_vector_get(x, i);
    std::vector<double> r(p->n_residuals);
    (*p->fn)(params, r);
    for (std::size_t i = 0; i < p->n_residuals; ++i) {
        if (!std::isfinite(r[i])) return GSL_EDOM;
        gsl_vector_set(f, i, r[i]);
    }
    return GSL_SUCCESS;
}

struct WorkspaceDeleter {
    void operator()(gsl_multifit_nlinear_workspace* w) const { gsl_multifit_nlinear_free(w); }
};
struct MatrixDeleter {
    void operator()(gsl_matrix* m) const { gsl_matrix_free(m); }
};

} // namespace

LsqResult least_squares(const ResidualFn& residuals, std::size_t n_residuals, std::vector<double> initial,
                        const LsqOptions& options) {
    const std::size_t n_params = initial.size();
    if (n_params == 0 || n_residuals < n_params)
        throw InvalidParameter("least_squares needs at least as many residuals as parameters");

    static const bool handler_off = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)handler_off;

    Payload payload{&residuals, n_params, n_residuals};
    gsl_multifit_nlinear_fdf fdf{};
    fdf.f = eval_f;
    fdf.df = nullptr;
    fdf.fvv = nullptr;
    fdf.n = n_residuals;
    fdf.p = n_params;
    fdf.params = &payload;

    gsl_multifit_nlinear_parameters fparams = gsl_multifit_nlinear_default_parameters();
    std::unique_ptr<gsl_multifit_nlinear_workspace, WorkspaceDeleter> w(
        gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &fparams, n_residuals, n_params));

    gsl_vector_view x0 = gsl_vector_view_array(initial.data(), n_params);
    LsqResult out;
    out.dof = static_cast<int>(n_residuals - n_params);
    int status = gsl_multifit_nlinear_init(&x0.vector, &fdf, w.get());
    if (status != GSL_SUCCESS) {
        out.params = initial;
        out.status = std::string("initial evaluation failed: ") + gsl_strerror(status);
        return out;
    }
    int info = 0;
    status = gsl_multifit_nlinear_driver(static_cast<std::size_t>(options.max_iterations), options.xtol,
                                         options.gtol, options.ftol, nullptr, nullptr, &info, w.get());
    out.iterations = static_cast<int>(gsl_multifit_nlinear_niter(w.get()));
    // ENOPROG: the trust region cannot shrink further, i.e. the minimum is reached to FD accuracy
    out.converged = status == GSL_SUCCESS || (status == GSL_ENOPROG && gsl_multifit_nlinear_niter(w.get()) > 0);
    out.status = gsl_strerror(status);

    const gsl_vector* x = gsl_multifit_nlinear_position(w.get());
    out.params.resize(n_params);
    for (std::size_t i = 0; i < n_params; ++i) out.params[i] = gsl_vector_get(x, i);

    const gsl_vector* f = gsl_multifit_nlinear_residual(w.get());
    double chi2 = 0.0;
    gsl_blas_ddot(f, f, &chi2);
    out.chi2 = chi2;

    std::unique_ptr<gsl_matrix, MatrixDeleter> covar(gsl_matrix_alloc(n_params, n_params));
    const gsl_matrix* jac = gsl_multifit_nlinear_jac(w.get());
    out.std_errors.assign(n_params, std::numeric_limits<double>::quiet_NaN());
    if (gsl_multifit_nlinear_covar(jac, 0.0, covar.get()) == GSL_SUCCESS) {
        for (std::size_t i = 0; i < n_params; ++i)
            out.std_errors[i] = std::sqrt(gsl_matrix_get(covar.get(), i, i));
    }
    return out;
}

} // namespace pulsedtomo

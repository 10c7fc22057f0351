#include "gwkit/global_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "gwkit/errors.hpp"
#include "gwkit/stats.hpp"

using namespace arma;

namespace gwkit {

mat design_matrix(const SpatialDataset& ds, const Formula& formula) {
    if (formula.response != ds.response_name() && !ds.has_column(formula.response))
        throw SchemaError("no column named '" + formula.response + "' for the response");
    mat X(ds.n(), formula.predictors.size() + 1);
    X.col(0).ones();
    for (std::size_t k = 0; k < formula.predictors.size(); ++k)
        X.col(k + 1) = ds.column(formula.predictors[k]);
    return X;
}

std::vector<std::string> term_names(const Formula& formula) {
    std::vector<std::string> names{"intercept"};
    names.insert(names.end(), formula.predictors.begin(), formula.predictors.end());
    return names;
}

double aicc(double rss, std::size_t n, double tr_s) {
    double nd = static_cast<double>(n);
    if (tr_s >= nd - 2.0) {
        std::ostringstream msg;
        msg << "effective parameters tr(S) = " << tr_s << " leave no degrees of freedom at n = "
            << n << "; the model is saturated";
        throw SaturatedModelError(msg.str());
    }
    return nd * std::log(rss / nd) + nd * std::log(2.0 * datum::pi) +
           nd * (nd + tr_s) / (nd - 2.0 - tr_s);
}

namespace {

// Names the columns involved in an exact linear dependency, via the null
// space of the design.
std::string dependent_columns(const mat& X, const std::vector<std::string>& terms) {
    mat U, V;
    vec s;
    if (!svd(U, s, V, X)) return "(unidentified)";
    double tol = std::max(X.n_rows, X.n_cols) * datum::eps * s.max();
    std::string out;
    for (uword j = 0; j < s.n_elem; ++j) {
        if (s(j) > tol) continue;
        double vmax = abs(V.col(j)).max();
        for (uword k = 0; k < V.n_rows; ++k) {
            if (std::fabs(V(k, j)) > 0.01 * vmax) {
                if (!out.empty()) out += ", ";
                out += terms[k];
            }
        }
    }
    return out.empty() ? "(unidentified)" : out;
}

} // namespace

GlobalFit fit_ols(const SpatialDataset& ds, const Formula& formula) {
    mat X = design_matrix(ds, formula);
    vec y = ds.column(formula.response);
    uword n = X.n_rows, p = X.n_cols;
    if (n < p + 1)
        throw InsufficientDataError("need more observations than design columns for least squares");

    vec s = svd(X);
    double tol = std::max(n, p) * datum::eps * s.max();
    if (s.min() <= tol)
        throw CollinearityError("design matrix is rank deficient; dependent columns: " +
                                dependent_columns(X, term_names(formula)));

    GlobalFit fit;
    fit.model = "ols";
    fit.terms = term_names(formula);

    mat xtx_inv = inv_sympd(X.t() * X);
    fit.beta = xtx_inv * (X.t() * y);
    fit.fitted = X * fit.beta;
    fit.residuals = y - fit.fitted;
    fit.rss = dot(fit.residuals, fit.residuals);

    double df = static_cast<double>(n - p);
    fit.sigma2 = fit.rss / df;
    fit.se = sqrt(fit.sigma2 * xtx_inv.diag());
    fit.tvalues = fit.beta / fit.se;
    fit.pvalues.set_size(p);
    for (uword k = 0; k < p; ++k) fit.pvalues(k) = t_pvalue(fit.tvalues(k), df);

    double tss = accu(square(y - mean(y)));
    fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;

    if (fit.rss <= 1e-12 * std::max(tss, 1.0)) {
        fit.degenerate = true;
        fit.warnings.push_back("residual sum of squares is numerically zero; "
                               "the fit is degenerate and inference is meaningless");
    }

    if (p > 1 && fit.sigma2 > 0.0) {
        double m = static_cast<double>(p - 1);
        fit.f_statistic = ((tss - fit.rss) / m) / fit.sigma2;
        fit.f_pvalue = f_pvalue(fit.f_statistic, m, df);
    }

    if (n > p + 2) {
        fit.aicc = aicc(fit.rss, n, static_cast<double>(p));
    } else {
        fit.aicc = std::numeric_limits<double>::infinity();
        fit.warnings.push_back("too few observations for the corrected AIC");
    }
    return fit;
}

// --- spatially autocorrelated errors ----------------------------------------

namespace {

struct RemlWorkspace {
    const mat* X = nullptr;
    const vec* y = nullptr;
    const mat* H = nullptr;   // pairwise distances
    double df = 0.0;          // n - p
    bool fix_range = false;
    bool fix_nugget = false;
    double range = 0.0;
    double nugget = 0.0;
};

struct RemlEval {
    bool ok = false;
    double loglik = -std::numeric_limits<double>::infinity();
    vec beta;
    mat xrx_inv;
    double sigma2_reml = 0.0;
};

// Profiled REML log-likelihood of the correlation model
// (1 - nu) exp(-H / phi) + nu I, with the Gaussian constant included.
RemlEval reml_eval(const RemlWorkspace& ws, double phi, double nu) {
    const mat& X = *ws.X;
    const vec& y = *ws.y;
    uword n = X.n_rows, p = X.n_cols;

    RemlEval ev;
    if (phi <= 0.0 || nu < 0.0 || nu > 1.0) return ev;

    mat R = (1.0 - nu) * exp(-(*ws.H) / phi);
    R.diag() += nu;

    mat L;
    if (!chol(L, R, "lower")) {
        R.diag() += 1e-10;  // unit diagonal, so this is 1e-10 * mean(diag)
        if (!chol(L, R, "lower")) return ev;
    }

    mat A = solve(trimatl(L), X);
    vec a = solve(trimatl(L), y);
    mat AtA = A.t() * A;

    vec beta;
    if (!solve(beta, AtA, A.t() * a, solve_opts::no_approx)) return ev;
    vec r = a - A * beta;
    double quad = dot(r, r);
    if (!(quad > 0.0)) return ev;

    double log_det_r = 2.0 * accu(log(L.diag()));
    double log_det_xrx;
    double sign;
    if (!log_det(log_det_xrx, sign, AtA) || sign <= 0.0) return ev;

    double sigma2 = quad / ws.df;
    ev.ok = true;
    ev.loglik = -0.5 * (log_det_r + log_det_xrx + ws.df * std::log(sigma2) +
                        ws.df * (1.0 + std::log(2.0 * datum::pi)));
    ev.beta = beta;
    ev.sigma2_reml = sigma2;
    if (!inv_sympd(ev.xrx_inv, AtA)) ev.ok = false;
    return ev;
}

double logit(double v) { return std::log(v / (1.0 - v)); }
double inv_logit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// GSL simplex objective over (log phi [, logit nu]).
double reml_objective(const gsl_vector* v, void* params) {
    const auto& ws = *static_cast<const RemlWorkspace*>(params);
    std::size_t idx = 0;
    double phi = ws.fix_range ? ws.range : std::exp(gsl_vector_get(v, idx++));
    double nu = ws.fix_nugget ? ws.nugget : inv_logit(gsl_vector_get(v, idx++));
    RemlEval ev = reml_eval(ws, phi, nu);
    return ev.ok ? -ev.loglik : std::numeric_limits<double>::max();
}

} // namespace

GlobalFit fit_sam(const SpatialDataset& ds, const Formula& formula,
                  const DistanceMatrix& dm, const SamOptions& options) {
    mat X = design_matrix(ds, formula);
    vec y = ds.column(formula.response);
    uword n = X.n_rows, p = X.n_cols;
    if (n != dm.n()) throw ContractError("distance matrix size differs from the dataset");
    if (n < p + 3) throw InsufficientDataError("too few observations for the error model");

    vec s = svd(X);
    if (s.min() <= std::max(n, p) * datum::eps * s.max())
        throw CollinearityError("design matrix is rank deficient; dependent columns: " +
                                dependent_columns(X, term_names(formula)));

    mat H(n, n);
    for (uword i = 0; i < n; ++i) H.col(i) = dm.row(i);

    RemlWorkspace ws;
    ws.X = &X;
    ws.y = &y;
    ws.H = &H;
    ws.df = static_cast<double>(n - p);
    if (options.fixed_range) {
        ws.fix_range = true;
        ws.range = *options.fixed_range;
        if (ws.range <= 0.0) throw ContractError("fixed range must be positive");
    }
    if (options.fixed_nugget) {
        ws.fix_nugget = true;
        ws.nugget = *options.fixed_nugget;
        if (ws.nugget < 0.0 || ws.nugget > 1.0)
            throw ContractError("fixed nugget proportion must lie in [0, 1]");
    } else if (!options.nugget) {
        ws.fix_nugget = true;
        ws.nugget = 0.0;
    }

    // Coarse grid first: log-spaced ranges against nugget proportions.
    double lo = options.range_bounds ? options.range_bounds->first : dm.min_positive_distance();
    double hi = options.range_bounds ? options.range_bounds->second : 2.0 * dm.max_pair_distance();
    if (lo <= 0.0 || hi <= lo)
        throw DegenerateInputError("distances admit no usable correlation range grid");

    std::vector<double> phis;
    if (ws.fix_range) {
        phis.push_back(ws.range);
    } else {
        std::size_t cells = std::max<std::size_t>(options.range_grid, 2);
        for (std::size_t i = 0; i < cells; ++i) {
            double t = static_cast<double>(i) / static_cast<double>(cells - 1);
            phis.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
        }
    }
    std::vector<double> nus;
    if (ws.fix_nugget) {
        nus.push_back(ws.nugget);
    } else {
        for (double v = 0.0; v < 1.0 - options.nugget_grid_step / 2; v += options.nugget_grid_step)
            nus.push_back(v);
    }

    double best_phi = phis.front(), best_nu = nus.front();
    double best_loglik = -std::numeric_limits<double>::infinity();
    for (double phi : phis) {
        for (double nu : nus) {
            RemlEval ev = reml_eval(ws, phi, nu);
            if (ev.ok && ev.loglik > best_loglik) {
                best_loglik = ev.loglik;
                best_phi = phi;
                best_nu = nu;
            }
        }
    }
    if (!std::isfinite(best_loglik))
        throw NonConvergenceError("restricted likelihood could not be evaluated anywhere "
                                  "on the parameter grid");

    // Simplex refinement from the best cell, on unconstrained coordinates.
    std::size_t dim = (ws.fix_range ? 0 : 1) + (ws.fix_nugget ? 0 : 1);
    if (dim > 0) {
        gsl_vector* start = gsl_vector_alloc(dim);
        gsl_vector* step = gsl_vector_alloc(dim);
        std::size_t idx = 0;
        if (!ws.fix_range) {
            gsl_vector_set(start, idx, std::log(best_phi));
            gsl_vector_set(step, idx, 0.5);
            ++idx;
        }
        if (!ws.fix_nugget) {
            double nu0 = std::clamp(best_nu, 0.01, 0.99);
            gsl_vector_set(start, idx, logit(nu0));
            gsl_vector_set(step, idx, 0.5);
        }

        gsl_multimin_function fn;
        fn.n = dim;
        fn.f = &reml_objective;
        fn.params = &ws;

        gsl_multimin_fminimizer* opt =
            gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
        gsl_multimin_fminimizer_set(opt, &fn, start, step);

        int status = GSL_CONTINUE;
        for (std::size_t iter = 0; iter < options.max_iter && status == GSL_CONTINUE; ++iter) {
            if (gsl_multimin_fminimizer_iterate(opt) != 0) break;
            status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(opt), options.rel_tol);
        }

        if (-opt->fval > best_loglik) {
            std::size_t j = 0;
            if (!ws.fix_range) best_phi = std::exp(gsl_vector_get(opt->x, j++));
            if (!ws.fix_nugget) best_nu = inv_logit(gsl_vector_get(opt->x, j));
            best_loglik = -opt->fval;
        }

        gsl_multimin_fminimizer_free(opt);
        gsl_vector_free(start);
        gsl_vector_free(step);
    }

    RemlEval ev = reml_eval(ws, best_phi, best_nu);
    if (!ev.ok) throw NonConvergenceError("restricted likelihood optimum is not evaluable");

    GlobalFit fit;
    fit.model = "sam";
    fit.terms = term_names(formula);
    fit.beta = ev.beta;
    fit.fitted = X * fit.beta;
    fit.residuals = y - fit.fitted;
    fit.rss = dot(fit.residuals, fit.residuals);

    double df = ws.df;
    fit.sigma2 = fit.rss / df;
    fit.se = sqrt(ev.sigma2_reml * ev.xrx_inv.diag());
    fit.tvalues = fit.beta / fit.se;
    fit.pvalues.set_size(p);
    for (uword k = 0; k < p; ++k) fit.pvalues(k) = t_pvalue(fit.tvalues(k), df);

    double tss = accu(square(y - mean(y)));
    fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;

    // Two covariance parameters on top of the mean terms.
    fit.aicc = aicc(fit.rss, n, static_cast<double>(p) + 2.0);

    SamParams params;
    params.partial_sill = ev.sigma2_reml * (1.0 - best_nu);
    params.range = best_phi;
    params.nugget_prop = best_nu;
    params.reml_loglik = best_loglik;
    fit.sam = params;
    return fit;
}

} // namespace gwkit

#include "gwkit/mixed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "gwkit/errors.hpp"
#include "gwkit/stats.hpp"

using namespace arma;

namespace gwkit {

namespace {

uvec term_indices(const std::vector<std::string>& all, const std::vector<std::string>& wanted) {
    uvec idx(wanted.size());
    for (std::size_t k = 0; k < wanted.size(); ++k) {
        auto it = std::find(all.begin(), all.end(), wanted[k]);
        if (it == all.end())
            throw ContractError("unknown term '" + wanted[k] + "' in the global/local split");
        idx(k) = static_cast<uword>(it - all.begin());
    }
    return idx;
}

} // namespace

MxGwrFit fit_mxgwr(const SpatialDataset& ds, const Formula& formula, const DistanceMatrix& dm,
                   const TermSplit& split, const KernelSpec& spec) {
    mat X = design_matrix(ds, formula);
    vec y = ds.column(formula.response);
    uword n = X.n_rows, p = X.n_cols;
    if (n != dm.n()) throw ContractError("distance matrix size differs from the dataset");
    if (n > kHatMaterializeLimit)
        throw ContractError("mixed calibration tracks the full hat matrix and is limited to " +
                            std::to_string(kHatMaterializeLimit) + " observations");

    auto terms = term_names(formula);
    if (split.global_terms.size() + split.local_terms.size() != terms.size())
        throw ContractError("global and local terms must cover every design term exactly once");
    uvec gi = term_indices(terms, split.global_terms);
    uvec li = term_indices(terms, split.local_terms);
    {
        uvec both = join_cols(gi, li);
        if (uvec(unique(both)).n_elem != terms.size())
            throw ContractError("global and local terms must cover every design term exactly once");
    }

    mat XA = X.cols(gi);   // n x a
    mat XB = X.cols(li);   // n x q
    uword a = XA.n_cols, q = XB.n_cols;

    // Smoother of the local terms alone; zero when everything is global.
    mat SB(n, n, fill::zeros);
    if (q > 0) {
        std::atomic<bool> failed{false};
        std::string error;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            uword i = static_cast<uword>(ii);
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                vec w = weights_for_location(i, dm, spec);
                LocalFit lf = local_fit(XB, y, w, i);
                SB.row(i) = lf.hat_row;
            } catch (const Error& e) {
#pragma omp critical
                {
                    if (!failed.exchange(true)) error = e.what();
                }
            }
        }
        if (failed.load()) throw LocalSingularityError(error);
    }

    mat GB = -SB;
    GB.diag() += 1.0;

    // Global coefficients from least squares on the smoother-residualized
    // columns; M is their full linear map from y.
    mat M(a, n, fill::zeros);
    if (a > 0) {
        mat XAt = GB * XA;
        mat AtA = XAt.t() * XAt;
        mat AtA_inv;
        if (!inv_sympd(AtA_inv, AtA))
            throw CollinearityError("residualized global columns are collinear");
        M = AtA_inv * XAt.t() * GB;
    }

    MxGwrFit fit;
    fit.global_terms = split.global_terms;
    fit.local_terms = split.local_terms;
    fit.spec = spec;
    fit.beta_global = M * y;

    vec adjusted = y - XA * fit.beta_global;
    mat G = -(XA * M);
    G.diag() += 1.0;   // I - XA M, the map from y to the adjusted response

    fit.beta_local.set_size(n, q);
    mat local_var(n, q, fill::zeros);
    vec fitted_local(n, fill::zeros);
    if (q > 0) {
        std::atomic<bool> failed{false};
        std::string error;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
            uword i = static_cast<uword>(ii);
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                vec w = weights_for_location(i, dm, spec);
                LocalFit lf = local_fit(XB, adjusted, w, i);
                fit.beta_local.row(i) = lf.beta.t();
                fitted_local(i) = as_scalar(XB.row(i) * lf.beta);
                mat bg = lf.ci * G;  // the surface's exact dependence on y
                local_var.row(i) = sum(bg % bg, 1).t();
            } catch (const Error& e) {
#pragma omp critical
                {
                    if (!failed.exchange(true)) error = e.what();
                }
            }
        }
        if (failed.load()) throw LocalSingularityError(error);
    }

    fit.fitted = XA * fit.beta_global + fitted_local;
    fit.residuals = y - fit.fitted;
    fit.rss = dot(fit.residuals, fit.residuals);

    mat S = XA * M + SB * G;
    fit.tr_s = trace(S);
    fit.tr_sts = accu(square(S));
    fit.enp = 2.0 * fit.tr_s - fit.tr_sts;
    fit.resid_df = static_cast<double>(n) - fit.enp;
    if (fit.resid_df <= 0.0)
        throw SaturatedModelError("effective parameters exceed the observation count");
    fit.sigma2 = fit.rss / fit.resid_df;

    if (a > 0) {
        fit.se_global = sqrt(fit.sigma2 * sum(M % M, 1));
        fit.t_global = fit.beta_global / fit.se_global;
        fit.p_global.set_size(a);
        for (uword k = 0; k < a; ++k)
            fit.p_global(k) = t_pvalue(fit.t_global(k), fit.resid_df);
    }
    if (q > 0) {
        fit.se_local = sqrt(fit.sigma2 * local_var);
        fit.t_local = fit.beta_local / fit.se_local;
        fit.p_local.set_size(n, q);
        for (uword i = 0; i < n; ++i)
            for (uword k = 0; k < q; ++k)
                fit.p_local(i, k) = t_pvalue(fit.t_local(i, k), fit.resid_df);
    }

    double tss = accu(square(y - mean(y)));
    fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;
    fit.aicc = aicc(fit.rss, n, fit.tr_s);
    return fit;
}

} // namespace gwkit

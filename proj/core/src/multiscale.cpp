#include "gwkit/multiscale.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "engine.hpp"
#include "gwkit/errors.hpp"
#include "gwkit/stats.hpp"

using namespace arma;

namespace gwkit {

namespace {

// Univariate smoother for one term: row i of S maps a working response to
// its locally weighted projection onto column x at location i. C carries the
// same rows before the x_i scaling, which is what the coefficient and its
// standard error need.
void term_smoother(const vec& x, const DistanceMatrix& dm, const KernelSpec& spec,
                   mat& S, mat& C, const std::string& term) {
    uword n = x.n_elem;
    std::atomic<bool> failed{false};
    std::string error;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        uword i = static_cast<uword>(ii);
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            vec w = weights_for_location(i, dm, spec);
            vec wx = w % x;
            double denom = dot(wx, x);
            if (!(denom > 0.0)) {
                std::ostringstream msg;
                msg << "term '" << term << "', location " << i
                    << ": weighted column has no variation inside the window";
                throw LocalSingularityError(msg.str());
            }
            C.row(i) = wx.t() / denom;
            S.row(i) = x(i) * C.row(i);
        } catch (const Error& e) {
#pragma omp critical
            {
                if (!failed.exchange(true)) error = e.what();
            }
        }
    }
    if (failed.load()) throw LocalSingularityError(error);
}

struct BackfitResult {
    std::vector<Bandwidth> bandwidths;
    mat component;   // n x p
    mat beta;        // n x p
    mat s_total;     // n x n
    cube r_terms;    // n x n x p
    std::vector<MsGwrFit::SweepRecord> trace;
    std::vector<std::string> warnings;
    bool converged = false;
};

BackfitResult backfit(const mat& X, const vec& y, const DistanceMatrix& dm,
                      const std::vector<std::string>& terms,
                      std::vector<Bandwidth> bandwidths, bool tune,
                      const MsGwrOptions& options) {
    uword n = X.n_rows, p = X.n_cols;

    BackfitResult out;
    out.bandwidths = std::move(bandwidths);

    // Start from the least squares fit: components and their exact linear
    // maps from y, so the running hat matrix is correct from sweep zero.
    mat xtx_inv;
    if (!inv_sympd(xtx_inv, X.t() * X))
        throw CollinearityError("design matrix is singular; backfitting cannot start");
    mat proj = xtx_inv * X.t();  // p x n
    vec beta0 = proj * y;

    out.component.set_size(n, p);
    out.beta.set_size(n, p);
    out.r_terms.set_size(n, n, p);
    for (uword k = 0; k < p; ++k) {
        out.component.col(k) = X.col(k) * beta0(k);
        out.beta.col(k).fill(beta0(k));
        out.r_terms.slice(k) = X.col(k) * proj.row(k);
    }
    out.s_total = X * proj;

    std::vector<bool> frozen(p, !tune);
    mat S(n, n), C(n, n), T(n, n);

    double rss_prev = datum::inf;
    for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        for (uword k = 0; k < p; ++k) {
            vec resid = y - sum(out.component, 1);
            vec eps = resid + out.component.col(k);

            if (!frozen[k]) {
                BandwidthSearchResult search = detail::optimize_bandwidth_matrix(
                    X.col(k), eps, dm, options.kernel, options.form,
                    BandwidthCriterion::Aicc, std::nullopt, std::nullopt);
                double prev = out.bandwidths[k].value;
                double next = search.chosen.value;
                bool stable = options.form == BandwidthForm::Fixed
                                  ? std::fabs(next - prev) < 0.01 * std::max(prev, 1e-12)
                                  : std::fabs(next - prev) < 1.0;
                out.bandwidths[k] = search.chosen;
                if (options.freeze_stable_bandwidths && sweep > 1 && stable) frozen[k] = true;
            }

            KernelSpec spec{options.kernel, out.bandwidths[k]};
            term_smoother(X.col(k), dm, spec, S, C, terms[k]);

            out.beta.col(k) = C * eps;
            out.component.col(k) = X.col(k) % out.beta.col(k);

            // The component is S applied to the current partial residual, a
            // linear map of y; keep the per-term and total maps in step.
            T = out.r_terms.slice(k) - out.s_total;
            T.diag() += 1.0;
            mat r_new = S * T;
            out.s_total += r_new - out.r_terms.slice(k);
            out.r_terms.slice(k) = std::move(r_new);
        }

        vec resid = y - sum(out.component, 1);
        double rss = dot(resid, resid);

        MsGwrFit::SweepRecord record;
        record.sweep = sweep;
        record.rss = rss;
        for (const auto& bw : out.bandwidths) record.bandwidths.push_back(bw.value);
        out.trace.push_back(std::move(record));

        if (std::isfinite(rss_prev) &&
            std::fabs(rss_prev - rss) / std::max(rss_prev, 1e-300) < options.soc_tol) {
            out.converged = true;
            break;
        }
        rss_prev = rss;
    }

    // A stalled backfit is still a usable fit: report it with the evidence
    // (tail of the RSS trace) rather than aborting the caller.
    if (!out.converged) {
        std::ostringstream msg;
        msg << "backfitting did not settle within " << options.max_sweeps
            << " sweeps (relative RSS change tolerance " << options.soc_tol << "); rss trace:";
        std::size_t from = out.trace.size() > 5 ? out.trace.size() - 5 : 0;
        for (std::size_t s = from; s < out.trace.size(); ++s)
            msg << " " << out.trace[s].rss;
        out.warnings.push_back(msg.str());
    }
    return out;
}

MsGwrFit finalize(const mat& X, const vec& y, const DistanceMatrix& dm,
                  const std::vector<std::string>& terms, const MsGwrOptions& options,
                  BackfitResult&& bf) {
    uword n = X.n_rows, p = X.n_cols;

    MsGwrFit fit;
    fit.terms = terms;
    fit.kernel = options.kernel;
    fit.bandwidths = bf.bandwidths;
    fit.component = std::move(bf.component);
    fit.beta = std::move(bf.beta);
    fit.fitted = sum(fit.component, 1);
    fit.residuals = y - fit.fitted;
    fit.rss = dot(fit.residuals, fit.residuals);
    fit.trace = std::move(bf.trace);
    fit.converged = bf.converged;
    fit.warnings = std::move(bf.warnings);

    fit.tr_s = trace(bf.s_total);
    fit.tr_sts = accu(square(bf.s_total));
    fit.enp = 2.0 * fit.tr_s - fit.tr_sts;
    fit.resid_df = static_cast<double>(n) - fit.enp;
    if (fit.resid_df <= 0.0)
        throw SaturatedModelError("effective parameters exceed the observation count");
    fit.sigma2 = fit.rss / fit.resid_df;

    // Each coefficient surface is a linear map of y: the local projection of
    // the term's partial residual, everything else held at its final state.
    fit.se.set_size(n, p);
    mat S(n, n), C(n, n), T(n, n);
    for (uword k = 0; k < p; ++k) {
        KernelSpec spec{options.kernel, fit.bandwidths[k]};
        term_smoother(X.col(k), dm, spec, S, C, terms[k]);
        T = bf.r_terms.slice(k) - bf.s_total;
        T.diag() += 1.0;
        mat B = C * T;
        fit.se.col(k) = sqrt(fit.sigma2 * sum(B % B, 1));
    }
    fit.tvalues = fit.beta / fit.se;
    fit.pvalues.set_size(n, p);
    for (uword i = 0; i < n; ++i)
        for (uword k = 0; k < p; ++k)
            fit.pvalues(i, k) = t_pvalue(fit.tvalues(i, k), fit.resid_df);

    double tss = accu(square(y - mean(y)));
    fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 1.0;
    fit.aicc = aicc(fit.rss, n, fit.tr_s);
    return fit;
}

std::vector<Bandwidth> starting_bandwidths(const DistanceMatrix& dm, uword p,
                                           const MsGwrOptions& options) {
    // Tuning re-picks these on the first sweep; they only seed the freeze
    // comparison, so the widest window is a safe start.
    Bandwidth start = options.form == BandwidthForm::Fixed
                          ? Bandwidth::fixed(dm.max_pair_distance())
                          : Bandwidth::adaptive(static_cast<double>(dm.n()));
    return std::vector<Bandwidth>(p, start);
}

} // namespace

MsGwrFit fit_msgwr(const SpatialDataset& ds, const Formula& formula, const DistanceMatrix& dm,
                   const MsGwrOptions& options) {
    mat X = design_matrix(ds, formula);
    vec y = ds.column(formula.response);
    uword n = X.n_rows, p = X.n_cols;
    if (n != dm.n()) throw ContractError("distance matrix size differs from the dataset");
    if (n > kHatMaterializeLimit)
        throw ContractError("multiscale calibration tracks full hat matrices and is limited to " +
                            std::to_string(kHatMaterializeLimit) + " observations");
    auto terms = term_names(formula);

    if (!options.center_for_bandwidths) {
        BackfitResult bf =
            backfit(X, y, dm, terms, starting_bandwidths(dm, p, options), true, options);
        return finalize(X, y, dm, terms, options, std::move(bf));
    }

    // Stage one tunes the bandwidths on centred columns (intercept aside);
    // stage two re-runs the backfit on the raw data with them pinned.
    mat Xc = X;
    for (uword k = 1; k < p; ++k) Xc.col(k) -= mean(Xc.col(k));
    vec yc = y - mean(y);
    BackfitResult tuned =
        backfit(Xc, yc, dm, terms, starting_bandwidths(dm, p, options), true, options);

    BackfitResult bf = backfit(X, y, dm, terms, tuned.bandwidths, false, options);
    for (auto& w : tuned.warnings) bf.warnings.push_back("tuning stage: " + std::move(w));
    MsGwrFit fit = finalize(X, y, dm, terms, options, std::move(bf));
    fit.warnings.push_back("bandwidths tuned on centred data, surfaces fit on raw data");
    return fit;
}

MsGwrFit msgwr_fixed_bandwidths(const SpatialDataset& ds, const Formula& formula,
                                const DistanceMatrix& dm,
                                const std::vector<Bandwidth>& bandwidths,
                                const MsGwrOptions& options) {
    mat X = design_matrix(ds, formula);
    vec y = ds.column(formula.response);
    uword n = X.n_rows, p = X.n_cols;
    if (n != dm.n()) throw ContractError("distance matrix size differs from the dataset");
    if (bandwidths.size() != p)
        throw ContractError("need one bandwidth per term (" + std::to_string(p) + "), got " +
                            std::to_string(bandwidths.size()));
    if (n > kHatMaterializeLimit)
        throw ContractError("multiscale calibration tracks full hat matrices and is limited to " +
                            std::to_string(kHatMaterializeLimit) + " observations");
    auto terms = term_names(formula);
    BackfitResult bf = backfit(X, y, dm, terms, bandwidths, false, options);
    return finalize(X, y, dm, terms, options, std::move(bf));
}

} // namespace gwkit

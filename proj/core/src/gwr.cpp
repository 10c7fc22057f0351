#include "gwkit/gwr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "engine.hpp"
#include "gwkit/errors.hpp"
#include "gwkit/stats.hpp"

using namespace arma;

namespace gwkit {

LocalFit local_fit(const mat& X, const vec& y, const vec& w, std::size_t i) {
    if (w.n_elem != X.n_rows || y.n_elem != X.n_rows)
        throw ContractError("local_fit: dimension mismatch");
    uword p = X.n_cols;
    if (accu(w > 0.0) < p + 1) {
        std::ostringstream msg;
        msg << "location " << i << ": only " << accu(w > 0.0)
            << " observations carry positive weight, need at least " << p + 1;
        throw LocalSingularityError(msg.str());
    }
    mat xtw = trans(X.each_col() % w);
    mat xtwx_inv;
    if (!inv_sympd(xtwx_inv, xtw * X)) {
        std::ostringstream msg;
        msg << "location " << i << ": weighted normal equations are singular";
        throw LocalSingularityError(msg.str());
    }
    LocalFit lf;
    lf.ci = xtwx_inv * xtw;
    lf.beta = lf.ci * y;
    lf.hat_row = X.row(i) * lf.ci;
    return lf;
}

namespace {

// One calibration pass. `full` keeps coefficient surfaces, standard error
// ingredients and (within the materialization limit) the whole hat matrix;
// bandwidth searches only need the residuals and the two traces.
struct GwrPass {
    mat beta;
    mat cc_diag;   // rowwise diag(ci ci'), for standard errors
    vec fitted;
    vec hat_diag;
    vec hat_sq;    // per-location ||s_i||^2
    mat hat;
    bool ok = true;
    std::string error;
};

GwrPass gwr_pass(const mat& X, const vec& y, const DistanceMatrix& dm,
                 const KernelSpec& spec, bool full, bool materialize_hat,
                 bool throw_on_singular) {
    uword n = X.n_rows, p = X.n_cols;
    GwrPass pass;
    pass.fitted.set_size(n);
    pass.hat_diag.set_size(n);
    pass.hat_sq.set_size(n);
    if (full) {
        pass.beta.set_size(n, p);
        pass.cc_diag.set_size(n, p);
    }
    if (full && materialize_hat) pass.hat.set_size(n, n);

    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        uword i = static_cast<uword>(ii);
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            vec w = weights_for_location(i, dm, spec);
            LocalFit lf = local_fit(X, y, w, i);
            pass.fitted(i) = as_scalar(lf.hat_row * y);
            pass.hat_diag(i) = lf.hat_row(i);
            pass.hat_sq(i) = dot(lf.hat_row, lf.hat_row);
            if (full) {
                pass.beta.row(i) = lf.beta.t();
                pass.cc_diag.row(i) = sum(lf.ci % lf.ci, 1).t();
                if (materialize_hat) pass.hat.row(i) = lf.hat_row;
            }
        } catch (const Error& e) {
#pragma omp critical
            {
                if (!failed.exchange(true)) pass.error = e.what();
            }
        }
    }
    pass.ok = !failed.load();
    if (!pass.ok && throw_on_singular) throw LocalSingularityError(pass.error);
    return pass;
}

constexpr double kGolden = 0.6180339887498949;

} // namespace

namespace detail {

double aicc_score_matrix(const mat& X, const vec& y, const DistanceMatrix& dm,
                         const KernelSpec& spec) {
    GwrPass pass = gwr_pass(X, y, dm, spec, false, false, false);
    if (!pass.ok) return std::numeric_limits<double>::infinity();
    vec resid = y - pass.fitted;
    double rss = dot(resid, resid);
    double tr_s = accu(pass.hat_diag);
    double n = static_cast<double>(y.n_elem);
    if (tr_s >= n - 2.0 || rss <= 0.0) return std::numeric_limits<double>::infinity();
    return n * std::log(rss / n) + n * std::log(2.0 * datum::pi) +
           n * (n + tr_s) / (n - 2.0 - tr_s);
}

double cv_score_matrix(const mat& X, const vec& y, const DistanceMatrix& dm,
                       const KernelSpec& spec) {
    uword n = X.n_rows, p = X.n_cols;
    vec errors(n, fill::zeros);
    std::atomic<bool> singular{false};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        uword i = static_cast<uword>(ii);
        if (singular.load(std::memory_order_relaxed)) continue;
        vec w = weights_for_location(i, dm, spec);
        w(i) = 0.0;  // hold the calibration point out
        if (accu(w > 0.0) < p + 1) {
            singular.store(true);
            continue;
        }
        mat xtw = trans(X.each_col() % w);
        mat xtwx_inv;
        if (!inv_sympd(xtwx_inv, xtw * X)) {
            singular.store(true);
            continue;
        }
        double pred = as_scalar(X.row(i) * (xtwx_inv * (xtw * y)));
        errors(i) = (y(i) - pred) * (y(i) - pred);
    }
    if (singular.load()) return std::numeric_limits<double>::infinity();
    return accu(errors);
}

BandwidthSearchResult optimize_bandwidth_matrix(const mat& X, const vec& y,
                                                const DistanceMatrix& dm, KernelType kernel,
                                                BandwidthForm form, BandwidthCriterion criterion,
                                                std::optional<double> lower_opt,
                                                std::optional<double> upper_opt) {
    uword n = X.n_rows, p = X.n_cols;
    if (n != dm.n()) throw ContractError("distance matrix size differs from the data");

    std::map<double, double> evaluated;
    auto eval = [&](double bw_value) {
        auto it = evaluated.find(bw_value);
        if (it != evaluated.end()) return it->second;
        KernelSpec spec{kernel, {form, bw_value}};
        double score = criterion == BandwidthCriterion::Aicc
                           ? aicc_score_matrix(X, y, dm, spec)
                           : cv_score_matrix(X, y, dm, spec);
        evaluated[bw_value] = score;
        return score;
    };

    double lower, upper;
    if (form == BandwidthForm::Fixed) {
        if (lower_opt) {
            lower = *lower_opt;
        } else {
            // Smallest window that still holds 2p neighbours at the sparsest
            // location, nudged inside the strict kernel boundary.
            double d = 0.0;
            for (uword i = 0; i < n; ++i)
                d = std::max(d, dm.kth_nearest_distance(i, std::min<std::size_t>(2 * p, n)));
            lower = std::nextafter(d, std::numeric_limits<double>::infinity());
        }
        upper = upper_opt ? *upper_opt : dm.max_pair_distance();
    } else {
        lower = lower_opt ? *lower_opt : static_cast<double>(std::min<uword>(2 * p, n));
        upper = upper_opt ? *upper_opt : static_cast<double>(n);
        lower = std::floor(lower);
        upper = std::floor(upper);
    }
    if (!(lower > 0.0) || upper <= lower)
        throw BandwidthError("empty bandwidth search interval");

    eval(lower);
    eval(upper);

    if (form == BandwidthForm::Fixed) {
        double tol = std::max(0.1, 1e-4 * dm.max_pair_distance());
        double a = lower, b = upper;
        double x1 = b - kGolden * (b - a);
        double x2 = a + kGolden * (b - a);
        double f1 = eval(x1), f2 = eval(x2);
        while (b - a > tol) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - kGolden * (b - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + kGolden * (b - a);
                f2 = eval(x2);
            }
        }
    } else {
        // Integer lattice: golden ratio probes rounded to whole neighbour
        // counts, finishing with a sweep once few candidates remain.
        double a = lower, b = upper;
        while (b - a > 2.0) {
            double x1 = std::round(b - kGolden * (b - a));
            double x2 = std::round(a + kGolden * (b - a));
            if (x1 <= a) x1 = a + 1;
            if (x2 >= b) x2 = b - 1;
            if (x2 <= x1) x2 = x1 + 1;
            if (eval(x1) <= eval(x2)) {
                b = x2;
            } else {
                a = x1;
            }
        }
        for (double v = a; v <= b; v += 1.0) eval(v);
    }

    BandwidthSearchResult result;
    result.curve.criterion = criterion;
    double best_bw = lower;
    double best_score = std::numeric_limits<double>::infinity();
    double finite_min = std::numeric_limits<double>::infinity();
    double finite_max = -std::numeric_limits<double>::infinity();
    for (const auto& [bw, score] : evaluated) {
        result.curve.bandwidths.push_back(bw);
        result.curve.scores.push_back(score);
        if (std::isfinite(score)) {
            finite_min = std::min(finite_min, score);
            finite_max = std::max(finite_max, score);
        }
        // Prefer the larger bandwidth on exact ties: smoother surfaces.
        if (score < best_score || (score == best_score && bw > best_bw)) {
            best_score = score;
            best_bw = bw;
        }
    }
    if (!std::isfinite(best_score))
        throw BandwidthError("no bandwidth in the search interval yields a usable fit");

    result.chosen = {form, best_bw};
    result.score = best_score;
    result.curve.plateau = (finite_max - finite_min) < 2.0;
    double edge_tol = form == BandwidthForm::Fixed
                          ? std::max(0.1, 1e-4 * dm.max_pair_distance())
                          : 0.5;
    result.curve.boundary_minimum =
        best_bw <= lower + edge_tol || best_bw >= upper - edge_tol;
    if (form == BandwidthForm::Adaptive && best_bw < 0.02 * static_cast<double>(n)) {
        result.overfit = true;
        result.warnings.push_back("optimal neighbour count sits under 2% of the observations; "
                                  "the surface is likely over-fit");
    }
    if (result.curve.plateau)
        result.warnings.push_back("criterion is flat across the searched bandwidths "
                                  "(range under 2 units); the optimum is weakly identified");
    if (result.curve.boundary_minimum)
        result.warnings.push_back("optimum lies at a search boundary");
    return result;
}

} // namespace detail

GwrFit fit_gwr(const SpatialDataset& ds, const Formula& formula, const DistanceMatrix& dm,
               const KernelSpec& spec) {
    mat X = design_matrix(ds, formula);
    vec y = ds.column(formula.response);
    uword n = X.n_rows, p = X.n_cols;
    if (n != dm.n()) throw ContractError("distance matrix size differs from the dataset");

    bool materialize = n <= kHatMaterializeLimit;
    GwrPass pass = gwr_pass(X, y, dm, spec, true, materialize, true);

    GwrFit fit;
    fit.terms = term_names(formula);
    fit.spec = spec;
    fit.beta = std::move(pass.beta);
    fit.fitted = std::move(pass.fitted);
    fit.residuals = y - fit.fitted;
    fit.hat_diag = std::move(pass.hat_diag);
    if (materialize) fit.hat = std::move(pass.hat);

    fit.rss = dot(fit.residuals, fit.residuals);
    fit.tr_s = accu(fit.hat_diag);
    fit.tr_sts = accu(pass.hat_sq);
    fit.enp = 2.0 * fit.tr_s - fit.tr_sts;
    fit.resid_df = static_cast<double>(n) - fit.enp;
    if (fit.resid_df <= 0.0)
        throw SaturatedModelError("effective parameters exceed the observation count");
    fit.sigma2 = fit.rss / fit.resid_df;

    fit.se = sqrt(fit.sigma2 * pass.cc_diag);
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

double cv_score(const SpatialDataset& ds, const Formula& formula, const DistanceMatrix& dm,
                const KernelSpec& spec) {
    return detail::cv_score_matrix(design_matrix(ds, formula), ds.column(formula.response),
                                   dm, spec);
}

BandwidthSearchResult optimize_bandwidth(const SpatialDataset& ds, const Formula& formula,
                                         const DistanceMatrix& dm, KernelType kernel,
                                         BandwidthForm form,
                                         const BandwidthSearchOptions& options) {
    return detail::optimize_bandwidth_matrix(design_matrix(ds, formula),
                                             ds.column(formula.response), dm, kernel, form,
                                             options.criterion, options.lower, options.upper);
}

} // namespace gwkit

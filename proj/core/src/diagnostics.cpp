#include "gwkit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gwkit/errors.hpp"
#include "gwkit/rng.hpp"
#include "gwkit/stats.hpp"

using namespace arma;

namespace gwkit {

WeightMatrix build_weight_matrix(const DistanceMatrix& dm, const WeightScheme& scheme) {
    std::size_t n = dm.n();
    WeightMatrix wm;
    wm.scheme = scheme;

    std::vector<uword> rows, cols;
    std::vector<double> vals;
    std::size_t coincident_dropped = 0;

    switch (scheme.kind) {
        case WeightKind::Knn: {
            std::size_t k = static_cast<std::size_t>(scheme.parameter);
            if (scheme.parameter < 1 || scheme.parameter != std::floor(scheme.parameter) ||
                k >= n)
                throw ContractError("knn weights need a whole k in [1, n-1]");
            for (std::size_t i = 0; i < n; ++i) {
                vec d = dm.row(i);
                std::vector<uword> order(n);
                std::iota(order.begin(), order.end(), 0);
                // ties broken by index so the matrix is reproducible
                std::stable_sort(order.begin(), order.end(), [&](uword a, uword b) {
                    return d(a) != d(b) ? d(a) < d(b) : a < b;
                });
                std::size_t taken = 0;
                for (uword j : order) {
                    if (j == i) continue;
                    rows.push_back(i);
                    cols.push_back(j);
                    vals.push_back(1.0);
                    if (++taken == k) break;
                }
            }
            break;
        }
        case WeightKind::DistanceBand: {
            if (scheme.parameter <= 0.0)
                throw ContractError("distance band must be positive");
            for (std::size_t i = 0; i < n; ++i) {
                vec d = dm.row(i);
                for (uword j = 0; j < n; ++j) {
                    if (j == i || d(j) > scheme.parameter) continue;
                    rows.push_back(i);
                    cols.push_back(j);
                    vals.push_back(1.0);
                }
            }
            break;
        }
        case WeightKind::InverseDistance: {
            if (scheme.parameter <= 0.0)
                throw ContractError("inverse-distance power must be positive");
            for (std::size_t i = 0; i < n; ++i) {
                vec d = dm.row(i);
                for (uword j = 0; j < n; ++j) {
                    if (j == i) continue;
                    if (d(j) == 0.0) {
                        ++coincident_dropped;
                        continue;
                    }
                    rows.push_back(i);
                    cols.push_back(j);
                    vals.push_back(std::pow(d(j), -scheme.parameter));
                }
            }
            break;
        }
    }

    umat locations(2, rows.size());
    vec values(vals.size());
    for (std::size_t e = 0; e < rows.size(); ++e) {
        locations(0, e) = rows[e];
        locations(1, e) = cols[e];
        values(e) = vals[e];
    }
    wm.w = sp_mat(locations, values, n, n);

    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = accu(wm.w.row(i));
        if (row_sum == 0.0) {
            wm.islands.push_back(i);
        } else if (scheme.row_standardize) {
            wm.w.row(i) /= row_sum;
        }
    }
    if (!wm.islands.empty()) {
        std::ostringstream msg;
        msg << wm.islands.size() << " location(s) have no neighbours under this scheme";
        wm.warnings.push_back(msg.str());
    }
    if (coincident_dropped > 0) {
        std::ostringstream msg;
        msg << coincident_dropped
            << " coincident pair(s) dropped from inverse-distance weights";
        wm.warnings.push_back(msg.str());
    }
    wm.s0 = accu(wm.w);
    return wm;
}

namespace {

double moran_statistic(const vec& z, const sp_mat& w, double s0) {
    double cross = as_scalar(z.t() * (w * z));
    double denom = dot(z, z);
    if (denom <= 0.0) throw DegenerateInputError("values have no variation");
    return (static_cast<double>(z.n_elem) / s0) * cross / denom;
}

} // namespace

MoranResult morans_i(const vec& values, const WeightMatrix& wm, const MoranOptions& options) {
    std::size_t n = values.n_elem;
    if (n != wm.w.n_rows) throw ContractError("weight matrix size differs from the values");
    if (n < 3) throw InsufficientDataError("too few observations for spatial autocorrelation");
    if (wm.s0 <= 0.0) throw DegenerateInputError("weight matrix has zero total weight");

    MoranResult result;
    result.warnings = wm.warnings;

    const sp_mat& W = wm.w;
    double s0 = wm.s0;
    double nd = static_cast<double>(n);

    if (options.mode == MoranMode::Raw) {
        vec z = values - mean(values);
        result.i = moran_statistic(z, W, s0);
        result.expected = -1.0 / (nd - 1.0);

        // Normality moments (symmetrized weights).
        sp_mat Wsym = W + W.t();
        double s1 = 0.0;
        for (sp_mat::const_iterator it = Wsym.begin(); it != Wsym.end(); ++it)
            s1 += (*it) * (*it);
        s1 *= 0.5;
        vec row_sums = vec(sum(W, 1));
        vec col_sums = vec(sum(W, 0).t());
        double s2 = accu(square(row_sums + col_sums));
        result.variance =
            (nd * nd * s1 - nd * s2 + 3.0 * s0 * s0) / ((nd * nd - 1.0) * s0 * s0) -
            result.expected * result.expected;
    } else {
        if (!options.design)
            throw ContractError("residual-adjusted moments need the design matrix "
                                "the residuals came from");
        const mat& X = *options.design;
        if (X.n_rows != n) throw ContractError("design row count differs from the residuals");
        double pd = static_cast<double>(X.n_cols);

        mat xtx_inv;
        if (!inv_sympd(xtx_inv, X.t() * X))
            throw CollinearityError("design matrix is singular");
        mat Mproj = -(X * xtx_inv * X.t());
        Mproj.diag() += 1.0;

        mat MW = Mproj * mat(W);
        double tr_mw = trace(MW);
        double tr_mwmw = accu(MW % MW.t());
        double tr_mwmwt = accu(MW % MW);

        result.i = moran_statistic(values, W, s0);
        double df = nd - pd;
        result.expected = (nd / s0) * tr_mw / df;
        double second = (nd / s0) * (nd / s0) * (tr_mwmwt + tr_mwmw + tr_mw * tr_mw) /
                        (df * (df + 2.0));
        result.variance = second - result.expected * result.expected;
    }

    if (result.variance <= 0.0)
        throw DegenerateInputError("spatial autocorrelation variance is not positive");
    result.z = (result.i - result.expected) / std::sqrt(result.variance);
    result.pvalue = normal_pvalue(result.z);

    if (options.permutations > 0) {
        // Pseudo p against the permutation null, doubled for a two-sided read.
        PortableRng rng(options.seed);
        vec z = options.mode == MoranMode::Raw ? vec(values - mean(values)) : values;
        double observed = moran_statistic(z, W, s0);
        std::vector<double> draws(options.permutations);
        vec shuffled = z;
        for (std::size_t r = 0; r < options.permutations; ++r) {
            for (std::size_t i = n - 1; i > 0; --i) {
                std::size_t j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
                std::swap(shuffled(i), shuffled(j));
            }
            draws[r] = moran_statistic(shuffled, W, s0);
        }
        std::size_t ge = 0, le = 0;
        for (double d : draws) {
            if (d >= observed) ++ge;
            if (d <= observed) ++le;
        }
        double denom = static_cast<double>(options.permutations) + 1.0;
        double one_sided = (static_cast<double>(std::min(ge, le)) + 1.0) / denom;
        result.permutation_pvalue = std::min(1.0, 2.0 * one_sided);
    }
    return result;
}

// --- collinearity ------------------------------------------------------------

namespace {

// Condition number and decomposition proportions of a column-equilibrated
// design. Shared by the global and local variants.
struct ScaledSvd {
    vec singular_values;
    double condition_number = 0.0;
    mat vdp;  // one row per singular value, one column per term
};

ScaledSvd scaled_design_svd(const mat& X) {
    mat Xs = X;
    for (uword k = 0; k < Xs.n_cols; ++k) {
        double nrm = norm(Xs.col(k));
        if (nrm > 0.0) Xs.col(k) /= nrm;
    }
    mat U, V;
    vec s;
    if (!svd_econ(U, s, V, Xs))
        throw NumericalError("singular value decomposition failed");

    ScaledSvd out;
    out.singular_values = s;
    double smin = s.min();
    out.condition_number = smin > s.max() * datum::eps * Xs.n_rows
                               ? s.max() / smin
                               : datum::inf;

    uword p = Xs.n_cols;
    mat phi(p, p);  // phi(k, j): share of var(b_k) carried by component j
    for (uword k = 0; k < p; ++k) {
        for (uword j = 0; j < p; ++j) {
            double sj = s(j);
            phi(k, j) = sj > 0.0 ? (V(k, j) * V(k, j)) / (sj * sj) : datum::inf;
        }
    }
    out.vdp.set_size(p, p);
    for (uword k = 0; k < p; ++k) {
        double total = accu(phi.row(k));
        for (uword j = 0; j < p; ++j) {
            // An exactly zero singular value soaks up the whole proportion.
            if (std::isinf(total)) {
                out.vdp(j, k) = std::isinf(phi(k, j)) ? 1.0 : 0.0;
            } else {
                out.vdp(j, k) = phi(k, j) / total;
            }
        }
    }
    return out;
}

} // namespace

CollinearityReport global_collinearity(const SpatialDataset& ds, const Formula& formula) {
    mat X = design_matrix(ds, formula);
    uword m = X.n_cols - 1;
    if (m == 0) throw ContractError("collinearity screening needs at least one predictor");
    mat P = X.cols(1, m);  // predictors without the intercept

    CollinearityReport report;
    report.predictors = formula.predictors;
    report.correlations = cor(P);

    // VIF via the inverse-correlation identity; exact dependencies show up as
    // a singular correlation matrix.
    report.vif.set_size(m);
    mat corr_inv;
    if (m == 1) {
        report.vif(0) = 1.0;
    } else if (inv_sympd(corr_inv, report.correlations)) {
        report.vif = corr_inv.diag();
    } else {
        report.vif.fill(datum::inf);
    }

    ScaledSvd svd = scaled_design_svd(X);
    report.condition_number = svd.condition_number;
    report.singular_values = svd.singular_values;
    report.vdp = svd.vdp;

    std::vector<std::string> all_terms = term_names(formula);
    std::ostringstream msg;
    if (report.condition_number > kConditionNumberFlag) {
        msg.str("");
        msg << "condition number " << report.condition_number << " exceeds "
            << kConditionNumberFlag;
        report.flags.push_back(msg.str());
    }
    for (uword k = 0; k < m; ++k) {
        if (report.vif(k) > kVifFlag) {
            msg.str("");
            msg << "VIF " << report.vif(k) << " for '" << formula.predictors[k]
                << "' exceeds " << kVifFlag;
            report.flags.push_back(msg.str());
        }
    }
    for (uword a = 0; a < m; ++a) {
        for (uword b = a + 1; b < m; ++b) {
            if (std::fabs(report.correlations(a, b)) > kCorrelationFlag) {
                msg.str("");
                msg << "correlation " << report.correlations(a, b) << " between '"
                    << formula.predictors[a] << "' and '" << formula.predictors[b]
                    << "' exceeds " << kCorrelationFlag;
                report.flags.push_back(msg.str());
            }
        }
    }
    // Name the terms that load together on a weak singular direction.
    for (uword j = 0; j < report.vdp.n_rows; ++j) {
        double index = report.singular_values(j) > 0.0
                           ? report.singular_values.max() / report.singular_values(j)
                           : datum::inf;
        if (index <= kConditionNumberFlag) continue;
        std::vector<std::string> involved;
        for (uword k = 0; k < report.vdp.n_cols; ++k)
            if (report.vdp(j, k) > kVdpFlag) involved.push_back(all_terms[k]);
        if (involved.size() >= 2) {
            msg.str("");
            msg << "variance decomposition links";
            for (const auto& t : involved) msg << " '" << t << "'";
            msg << " on a near-dependency (condition index "
                << (std::isinf(index) ? std::string("inf")
                                      : std::to_string(index))
                << ")";
            report.flags.push_back(msg.str());
        }
    }
    return report;
}

LocalCollinearity local_collinearity(const SpatialDataset& ds, const Formula& formula,
                                     const DistanceMatrix& dm, const KernelSpec& spec) {
    mat X = design_matrix(ds, formula);
    uword n = X.n_rows, m = X.n_cols - 1;
    if (m == 0) throw ContractError("collinearity screening needs at least one predictor");
    if (n != dm.n()) throw ContractError("distance matrix size differs from the dataset");
    mat P = X.cols(1, m);

    LocalCollinearity out;
    out.predictors = formula.predictors;
    out.condition_number.set_size(n);
    out.vif.set_size(n, m);
    out.correlations.set_size(m, m, n);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        uword i = static_cast<uword>(ii);
        vec w = weights_for_location(i, dm, spec);
        double wsum = accu(w);

        // Weighted Pearson correlations of the predictors.
        rowvec means = (w.t() * P) / wsum;
        mat centred = P.each_row() - means;
        mat cov = (centred.each_col() % w).t() * centred / wsum;
        vec sd = sqrt(cov.diag());
        mat corr = cov / (sd * sd.t());
        corr.diag().ones();
        out.correlations.slice(i) = corr;

        mat corr_inv;
        if (m == 1) {
            out.vif.row(i).fill(1.0);
        } else if (inv_sympd(corr_inv, corr)) {
            out.vif.row(i) = corr_inv.diag().t();
        } else {
            out.vif.row(i).fill(datum::inf);
        }

        mat Xw = X.each_col() % sqrt(w);
        out.condition_number(i) = scaled_design_svd(Xw).condition_number;
    }

    std::ostringstream msg;
    uword cn_hits = accu(out.condition_number > kConditionNumberFlag);
    if (cn_hits > 0) {
        msg << "local condition number exceeds " << kConditionNumberFlag << " at " << cn_hits
            << " of " << n << " locations";
        out.flags.push_back(msg.str());
    }
    for (uword k = 0; k < m; ++k) {
        uword vif_hits = accu(out.vif.col(k) > kVifFlag);
        if (vif_hits > 0) {
            msg.str("");
            msg << "local VIF for '" << formula.predictors[k] << "' exceeds " << kVifFlag
                << " at " << vif_hits << " of " << n << " locations";
            out.flags.push_back(msg.str());
        }
    }
    return out;
}

StandardizedResiduals standardized_residuals(const ResidualSource& source) {
    std::size_t n = source.residuals.n_elem;
    if (n == 0) throw ContractError("no residuals to standardize");
    if (!(source.sigma2 > 0.0))
        throw DegenerateInputError("residual variance is not positive; nothing to standardize");

    StandardizedResiduals out;
    out.values.set_size(n);
    double sigma = std::sqrt(source.sigma2);

    for (std::size_t i = 0; i < n; ++i) {
        double denom = sigma;
        if (source.hat_diag) {
            double h = (*source.hat_diag)(i);
            if (h >= 1.0) {
                out.values(i) = datum::nan;
                out.excluded.push_back(i);
                continue;
            }
            denom = sigma * std::sqrt(1.0 - h);
        }
        out.values(i) = source.residuals(i) / denom;
        if (std::fabs(out.values(i)) > 3.0) out.flagged.push_back(i);
    }
    if (!out.excluded.empty()) {
        std::ostringstream msg;
        msg << out.excluded.size()
            << " observation(s) excluded: leverage at or above one";
        out.warnings.push_back(msg.str());
    }
    return out;
}

} // namespace gwkit

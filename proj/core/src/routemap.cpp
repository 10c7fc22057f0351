#include "gwkit/routemap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gwkit/errors.hpp"

using namespace arma;

namespace gwkit {

const char* model_choice_name(ModelChoice choice) {
    switch (choice) {
        case ModelChoice::Linear: return "linear";
        case ModelChoice::Sam: return "sam";
        case ModelChoice::Gwr: return "gwr";
        case ModelChoice::MxGwr: return "mxgwr";
        case ModelChoice::MsGwr: return "msgwr";
    }
    return "linear";
}

BandwidthClassification classify_bandwidths(const std::vector<std::string>& terms,
                                            const std::vector<Bandwidth>& bandwidths,
                                            const DistanceMatrix& dm,
                                            const RouteMapConfig& config) {
    if (terms.size() != bandwidths.size())
        throw ContractError("one bandwidth per term is required");
    if (terms.empty()) throw ContractError("no terms to classify");

    BandwidthClassification cls;
    double nd = static_cast<double>(dm.n());
    double dmax = dm.max_pair_distance();

    for (std::size_t k = 0; k < terms.size(); ++k) {
        TermLabel label;
        label.term = terms[k];
        label.bandwidth = bandwidths[k].value;
        bool adaptive = bandwidths[k].form == BandwidthForm::Adaptive;
        double scale = adaptive ? nd : dmax;
        if (scale <= 0.0) throw ContractError("degenerate study area");
        label.ratio = label.bandwidth / scale;
        label.global = label.ratio >= config.global_threshold;
        label.overfit = adaptive && label.bandwidth < config.overfit_fraction * nd;

        if (label.ratio >= 0.9 * config.global_threshold &&
            label.ratio <= 1.1 * config.global_threshold) {
            std::ostringstream note;
            note << "term '" << label.term << "' ratio " << label.ratio
                 << " sits within 10% of the global threshold " << config.global_threshold
                 << "; the label is sensitive to the threshold choice";
            cls.notes.push_back(note.str());
        }
        if (label.overfit) {
            std::ostringstream note;
            note << "term '" << label.term << "' bandwidth " << label.bandwidth
                 << " covers under " << 100.0 * config.overfit_fraction
                 << "% of the observations; treated as over-fit and kept out of the "
                    "similarity verdict";
            cls.notes.push_back(note.str());
        }
        cls.labels.push_back(label);
    }

    cls.intercept_global = cls.labels.front().global;
    bool all_pred_global = true, all_pred_local = true, any_global = false;
    for (std::size_t k = 0; k < cls.labels.size(); ++k) {
        if (cls.labels[k].global) any_global = true;
        if (k == 0) continue;
        if (cls.labels[k].global) {
            all_pred_local = false;
        } else {
            all_pred_global = false;
        }
    }
    cls.any_global = any_global;
    cls.all_global = all_pred_global;
    cls.all_local = all_pred_local;

    double lo = datum::inf, hi = -datum::inf;
    for (const auto& label : cls.labels) {
        if (label.global || label.overfit) continue;
        lo = std::min(lo, label.bandwidth);
        hi = std::max(hi, label.bandwidth);
    }
    if (std::isfinite(lo) && lo > 0.0) {
        cls.local_spread = hi / lo;
        cls.local_cluster_similar = cls.local_spread <= config.similarity_ratio;
    }
    return cls;
}

SurfaceComparison surface_disagreement(const std::vector<TermSurface>& a,
                                       const std::vector<TermSurface>& b, double alpha) {
    SurfaceComparison cmp;
    for (const auto& sa : a) {
        auto it = std::find_if(b.begin(), b.end(),
                               [&](const TermSurface& sb) { return sb.term == sa.term; });
        if (it == b.end()) continue;
        if (sa.beta.n_elem != it->beta.n_elem)
            throw ContractError("surfaces for term '" + sa.term +
                                "' cover different location counts");
        uword n = sa.beta.n_elem;
        uword disagreements = 0;
        for (uword i = 0; i < n; ++i) {
            bool sign_differs = (sa.beta(i) >= 0.0) != (it->beta(i) >= 0.0);
            bool sig_differs = (sa.pvalues(i) < alpha) != (it->pvalues(i) < alpha);
            if (sign_differs || sig_differs) ++disagreements;
        }
        cmp.by_term[sa.term] = static_cast<double>(disagreements) / static_cast<double>(n);
    }
    if (cmp.by_term.empty())
        throw ContractError("the two fits share no coefficient surfaces to compare");
    for (const auto& [term, value] : cmp.by_term)
        cmp.max_disagreement = std::max(cmp.max_disagreement, value);
    return cmp;
}

namespace {

std::vector<TermSurface> surfaces_of(const GwrFit& fit) {
    std::vector<TermSurface> out;
    for (std::size_t k = 0; k < fit.terms.size(); ++k)
        out.push_back({fit.terms[k], fit.beta.col(k), fit.pvalues.col(k)});
    return out;
}

std::vector<TermSurface> surfaces_of(const MsGwrFit& fit) {
    std::vector<TermSurface> out;
    for (std::size_t k = 0; k < fit.terms.size(); ++k)
        out.push_back({fit.terms[k], fit.beta.col(k), fit.pvalues.col(k)});
    return out;
}

std::vector<TermSurface> surfaces_of(const MxGwrFit& fit) {
    std::vector<TermSurface> out;
    for (std::size_t k = 0; k < fit.local_terms.size(); ++k)
        out.push_back({fit.local_terms[k], fit.beta_local.col(k), fit.p_local.col(k)});
    return out;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Candidate (the simpler model) against the multiscale fit: surfaces that
// materially disagree keep the richer model; otherwise the simpler candidate
// stands, with the score gap on record either way. A lower AICc alone is not
// allowed to drag the choice to the richer model when the surfaces say the
// same thing.
void arbitrate(RouteMapReport& report, ModelChoice candidate, double candidate_aicc,
               const std::vector<TermSurface>& candidate_surfaces,
               const RouteMapConfig& config) {
    SurfaceComparison cmp =
        surface_disagreement(candidate_surfaces, surfaces_of(report.msgwr), config.alpha);
    report.surfaces = cmp;

    std::ostringstream line;
    if (cmp.max_disagreement > config.disagreement_veto) {
        line << "surfaces disagree at " << 100.0 * cmp.max_disagreement
             << "% of locations (veto threshold " << 100.0 * config.disagreement_veto
             << "%): the multiscale fit is kept";
        report.rationale.push_back(line.str());
        report.recommendation = ModelChoice::MsGwr;
        return;
    }
    line << "surfaces agree (max disagreement " << 100.0 * cmp.max_disagreement
         << "% of locations)";
    if (candidate_aicc <= report.msgwr.aicc) {
        line << " and the candidate also scores better (AICc " << candidate_aicc << " vs "
             << report.msgwr.aicc << "): the simpler model is kept";
    } else {
        line << "; the simpler model is kept on parsimony despite the score gap (AICc "
             << candidate_aicc << " vs " << report.msgwr.aicc << ")";
    }
    report.rationale.push_back(line.str());
    report.recommendation = candidate;
}

} // namespace

void recommend(const RecommendationInput& input, const RouteMapConfig& config,
               RouteMapReport& report) {
    const BandwidthClassification& cls = report.classification;
    std::ostringstream line;

    bool all_terms_global = cls.all_global && cls.intercept_global;
    bool all_terms_local = cls.all_local && !cls.intercept_global;

    if (all_terms_global) {
        if (input.ols_moran.pvalue >= config.alpha) {
            line << "every term is effectively global and the least squares residuals show "
                    "no spatial structure (p = "
                 << input.ols_moran.pvalue << "): plain linear regression";
            report.rationale.push_back(line.str());
            report.recommendation = ModelChoice::Linear;
        } else {
            line << "every term is effectively global but the least squares residuals are "
                    "spatially structured (p = "
                 << input.ols_moran.pvalue << "): linear model with spatially correlated errors";
            report.rationale.push_back(line.str());
            report.recommendation = ModelChoice::Sam;
            report.sam = fit_sam(input.ds, input.formula, input.dm);
            report.comparison.push_back({"sam", report.sam->aicc});
        }
        return;
    }

    if (cls.all_global && !cls.intercept_global) {
        line << "all predictors are effectively global while the intercept varies locally: "
                "linear model with spatially correlated errors";
        report.rationale.push_back(line.str());
        report.recommendation = ModelChoice::Sam;
        report.sam = fit_sam(input.ds, input.formula, input.dm);
        report.comparison.push_back({"sam", report.sam->aicc});

        bool agree = true;
        for (uword k = 0; k < report.sam->beta.n_elem; ++k) {
            double gap = std::fabs(report.sam->beta(k) - input.ols.beta(k));
            if (gap > std::max(report.sam->se(k), input.ols.se(k))) {
                agree = false;
                break;
            }
        }
        if (agree) {
            report.linear_fallback_noted = true;
            report.rationale.push_back(
                "the error-model coefficients sit within one standard error of the least "
                "squares ones; plain linear regression is a defensible simpler choice");
        }
        return;
    }

    if (all_terms_local && cls.local_cluster_similar) {
        line << "every term varies locally at a similar scale (spread " << cls.local_spread
             << "): single-bandwidth surface fit considered";
        report.rationale.push_back(line.str());
        BandwidthSearchOptions search_options;
        report.gwr_search = optimize_bandwidth(input.ds, input.formula, input.dm,
                                               config.kernel, config.form, search_options);
        KernelSpec spec{config.kernel, report.gwr_search->chosen};
        report.gwr = fit_gwr(input.ds, input.formula, input.dm, spec);
        report.comparison.push_back({"gwr", report.gwr->aicc});
        for (const auto& w : report.gwr_search->warnings) report.warnings.push_back(w);
        arbitrate(report, ModelChoice::Gwr, report.gwr->aicc, surfaces_of(*report.gwr), config);
        return;
    }

    if (cls.any_global && !all_terms_local && cls.local_cluster_similar) {
        std::vector<double> local_bandwidths;
        TermSplit split;
        for (const auto& label : cls.labels) {
            if (label.global) {
                split.global_terms.push_back(label.term);
            } else {
                split.local_terms.push_back(label.term);
                if (!label.overfit) local_bandwidths.push_back(label.bandwidth);
            }
        }
        if (!split.local_terms.empty() && !local_bandwidths.empty()) {
            double bw = config.mx_local_bandwidth ? *config.mx_local_bandwidth
                                                  : median_of(local_bandwidths);
            if (config.form == BandwidthForm::Adaptive) bw = std::round(bw);
            line << "terms split into global and local at a shared local scale: mixed fit "
                    "considered with local bandwidth "
                 << bw
                 << (config.mx_local_bandwidth ? " (configured override)"
                                               : " (median of the local cluster)");
            report.rationale.push_back(line.str());
            KernelSpec spec{config.kernel, {config.form, bw}};
            report.mxgwr = fit_mxgwr(input.ds, input.formula, input.dm, split, spec);
            report.comparison.push_back({"mxgwr", report.mxgwr->aicc});
            arbitrate(report, ModelChoice::MxGwr, report.mxgwr->aicc,
                      surfaces_of(*report.mxgwr), config);
            return;
        }
    }

    report.rationale.push_back(
        "bandwidths are neither all global nor clustered at one local scale: the "
        "multiscale fit stands");
    report.recommendation = ModelChoice::MsGwr;
}

RouteMapReport run_routemap(const SpatialDataset& ds, const Formula& formula,
                            const RouteMapConfig& config) {
    RouteMapReport report;
    report.config = config;

    DistanceMatrix dm(ds.coords());
    WeightMatrix wm = build_weight_matrix(dm, config.moran_weights);

    report.ols = fit_ols(ds, formula);
    MoranOptions ols_moran_options;
    ols_moran_options.mode = MoranMode::ResidualAdjusted;
    ols_moran_options.design = design_matrix(ds, formula);
    ols_moran_options.permutations = config.moran_permutations;
    ols_moran_options.seed = config.seed;
    report.ols_moran = morans_i(report.ols.residuals, wm, ols_moran_options);

    if (report.ols.f_pvalue >= config.alpha) {
        std::ostringstream msg;
        msg << "the least squares fit shows no worthwhile relationships (overall F p = "
            << report.ols.f_pvalue << "); any recommendation below should be read with that "
            << "in mind";
        report.warnings.push_back(msg.str());
    }

    // Predictors that mirror the coordinates usually signal a mis-specified
    // model rather than a spatial process; say so, fit anyway.
    {
        vec cx = ds.coords().col(0);
        vec cy = ds.coords().col(1);
        vec centroid_dist = sqrt(square(cx - mean(cx)) + square(cy - mean(cy)));
        std::vector<std::pair<std::string, vec>> axes;
        axes.emplace_back("easting", cx);
        axes.emplace_back("northing", cy);
        axes.emplace_back("distance to centroid", centroid_dist);
        for (const auto& name : formula.predictors) {
            vec col = ds.column(name);
            for (const auto& [axis, values] : axes) {
                double r = as_scalar(cor(col, values));
                if (std::fabs(r) > 0.95) {
                    std::ostringstream msg;
                    msg << "predictor '" << name << "' correlates with " << axis
                        << " at r = " << r << "; it may be standing in for location itself";
                    report.warnings.push_back(msg.str());
                }
            }
        }
    }

    MsGwrOptions ms_options;
    ms_options.kernel = config.kernel;
    ms_options.form = config.form;
    report.msgwr = fit_msgwr(ds, formula, dm, ms_options);
    if (!report.msgwr.converged)
        report.warnings.push_back(
            "the multiscale backfit did not converge; the bandwidth classification and "
            "everything downstream rest on a stalled fit");

    MoranOptions ms_moran_options;
    ms_moran_options.mode = MoranMode::Raw;
    ms_moran_options.permutations = config.moran_permutations;
    ms_moran_options.seed = config.seed;
    report.msgwr_moran = morans_i(report.msgwr.residuals, wm, ms_moran_options);
    if (report.msgwr_moran.pvalue < config.alpha)
        report.warnings.push_back(
            "multiscale residuals are still spatially structured; no model in this family "
            "may be adequate");

    report.comparison.push_back({"ols", report.ols.aicc});
    report.comparison.push_back({"msgwr", report.msgwr.aicc});

    report.classification =
        classify_bandwidths(report.msgwr.terms, report.msgwr.bandwidths, dm, config);

    RecommendationInput input{ds, formula, dm, report.ols, report.ols_moran, report.msgwr};
    recommend(input, config, report);
    return report;
}

} // namespace gwkit

#include "gwkit/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gwkit/errors.hpp"
#include "gwkit/version.hpp"

using json = nlohmann::ordered_json;
using namespace arma;

namespace gwkit {

namespace {

SurfaceTable assemble(const std::vector<std::string>& terms, const mat& coords,
                      const mat& beta, const mat& se, const mat& tvalues,
                      const mat& pvalues, double alpha) {
    if (coords.n_rows != beta.n_rows)
        throw ContractError("surface rows and coordinate rows differ");
    SurfaceTable table;
    table.terms = terms;
    table.coords = coords;
    table.beta = beta;
    table.se = se;
    table.tvalues = tvalues;
    table.pvalues = pvalues;
    table.alpha = alpha;
    return table;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_stream(const std::ostream& os, const std::string& path) {
    if (!os) throw IoError("cannot write to '" + path + "'");
}

json number_or_null(double v) {
    // nlohmann already writes non-finite as null; being explicit keeps the
    // intent visible at the call sites that expect it.
    if (!std::isfinite(v)) return nullptr;
    return v;
}

json coefficient_block(const std::vector<std::string>& terms, const vec& beta,
                       const vec& se, const vec& tvalues, const vec& pvalues) {
    json block = json::object();
    for (std::size_t k = 0; k < terms.size(); ++k) {
        block[terms[k]] = {{"estimate", number_or_null(beta(k))},
                           {"se", number_or_null(se(k))},
                           {"t", number_or_null(tvalues(k))},
                           {"p", number_or_null(pvalues(k))}};
    }
    return block;
}

json global_fit_json(const GlobalFit& fit) {
    json j;
    j["model"] = fit.model;
    j["coefficients"] = coefficient_block(fit.terms, fit.beta, fit.se, fit.tvalues,
                                          fit.pvalues);
    j["rss"] = number_or_null(fit.rss);
    j["sigma2"] = number_or_null(fit.sigma2);
    j["r2"] = number_or_null(fit.r2);
    j["aicc"] = number_or_null(fit.aicc);
    if (fit.model == "ols") {
        j["f_statistic"] = number_or_null(fit.f_statistic);
        j["f_pvalue"] = number_or_null(fit.f_pvalue);
    }
    if (fit.sam) {
        j["error_structure"] = {{"partial_sill", number_or_null(fit.sam->partial_sill)},
                                {"range", number_or_null(fit.sam->range)},
                                {"nugget_prop", number_or_null(fit.sam->nugget_prop)},
                                {"reml_loglik", number_or_null(fit.sam->reml_loglik)}};
    }
    if (fit.degenerate) j["degenerate"] = true;
    if (!fit.warnings.empty()) j["warnings"] = fit.warnings;
    return j;
}

json moran_json(const MoranResult& m) {
    json j;
    j["i"] = number_or_null(m.i);
    j["expected"] = number_or_null(m.expected);
    j["variance"] = number_or_null(m.variance);
    j["z"] = number_or_null(m.z);
    j["pvalue"] = number_or_null(m.pvalue);
    if (m.permutation_pvalue) j["permutation_pvalue"] = number_or_null(*m.permutation_pvalue);
    if (!m.warnings.empty()) j["warnings"] = m.warnings;
    return j;
}

json bandwidth_json(const Bandwidth& bw) {
    return {{"form", bw.form == BandwidthForm::Adaptive ? "adaptive" : "fixed"},
            {"value", number_or_null(bw.value)}};
}

json msgwr_json(const MsGwrFit& fit) {
    json j;
    j["model"] = "msgwr";
    j["kernel"] = kernel_name(fit.kernel);
    json bws = json::object();
    for (std::size_t k = 0; k < fit.terms.size(); ++k)
        bws[fit.terms[k]] = bandwidth_json(fit.bandwidths[k]);
    j["bandwidths"] = bws;
    j["enp"] = number_or_null(fit.enp);
    j["rss"] = number_or_null(fit.rss);
    j["r2"] = number_or_null(fit.r2);
    j["aicc"] = number_or_null(fit.aicc);
    j["converged"] = fit.converged;
    j["sweeps"] = fit.trace.size();
    json trace = json::array();
    for (const auto& record : fit.trace)
        trace.push_back({{"sweep", record.sweep},
                         {"rss", number_or_null(record.rss)},
                         {"bandwidths", record.bandwidths}});
    j["trace"] = trace;
    if (!fit.warnings.empty()) j["warnings"] = fit.warnings;
    return j;
}

json gwr_json(const GwrFit& fit, const std::optional<BandwidthSearchResult>& search) {
    json j;
    j["model"] = "gwr";
    j["kernel"] = kernel_name(fit.spec.type);
    j["bandwidth"] = bandwidth_json(fit.spec.bandwidth);
    j["enp"] = number_or_null(fit.enp);
    j["rss"] = number_or_null(fit.rss);
    j["r2"] = number_or_null(fit.r2);
    j["aicc"] = number_or_null(fit.aicc);
    if (search) {
        j["search"] = {{"criterion",
                        search->curve.criterion == BandwidthCriterion::Cv ? "cv" : "aicc"},
                       {"evaluations", search->curve.bandwidths.size()},
                       {"score", number_or_null(search->score)},
                       {"plateau", search->curve.plateau},
                       {"boundary_minimum", search->curve.boundary_minimum},
                       {"overfit", search->overfit}};
    }
    if (!fit.warnings.empty()) j["warnings"] = fit.warnings;
    return j;
}

json mxgwr_json(const MxGwrFit& fit) {
    json j;
    j["model"] = "mxgwr";
    j["kernel"] = kernel_name(fit.spec.type);
    j["bandwidth"] = bandwidth_json(fit.spec.bandwidth);
    j["global_terms"] = fit.global_terms;
    j["local_terms"] = fit.local_terms;
    j["global_coefficients"] = coefficient_block(fit.global_terms, fit.beta_global,
                                                 fit.se_global, fit.t_global, fit.p_global);
    j["enp"] = number_or_null(fit.enp);
    j["rss"] = number_or_null(fit.rss);
    j["r2"] = number_or_null(fit.r2);
    j["aicc"] = number_or_null(fit.aicc);
    if (!fit.warnings.empty()) j["warnings"] = fit.warnings;
    return j;
}

json classification_json(const BandwidthClassification& cls) {
    json labels = json::array();
    for (const auto& label : cls.labels) {
        labels.push_back({{"term", label.term},
                          {"bandwidth", number_or_null(label.bandwidth)},
                          {"ratio", number_or_null(label.ratio)},
                          {"global", label.global},
                          {"overfit", label.overfit}});
    }
    json j;
    j["labels"] = labels;
    j["intercept_global"] = cls.intercept_global;
    j["all_predictors_global"] = cls.all_global;
    j["all_predictors_local"] = cls.all_local;
    j["local_spread"] = number_or_null(cls.local_spread);
    j["local_cluster_similar"] = cls.local_cluster_similar;
    if (!cls.notes.empty()) j["notes"] = cls.notes;
    return j;
}

} // namespace

SurfaceTable surface_table(const GwrFit& fit, const mat& coords, double alpha) {
    return assemble(fit.terms, coords, fit.beta, fit.se, fit.tvalues, fit.pvalues, alpha);
}

SurfaceTable surface_table(const MsGwrFit& fit, const mat& coords, double alpha) {
    return assemble(fit.terms, coords, fit.beta, fit.se, fit.tvalues, fit.pvalues, alpha);
}

SurfaceTable surface_table(const MxGwrFit& fit, const mat& coords, double alpha) {
    return assemble(fit.local_terms, coords, fit.beta_local, fit.se_local, fit.t_local,
                    fit.p_local, alpha);
}

void write_surface_csv(const SurfaceTable& table, const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os << "x,y";
    for (const auto& term : table.terms)
        os << ",beta_" << term << ",se_" << term << ",t_" << term << ",p_" << term
           << ",sig_" << term;
    os << "\n";
    for (uword i = 0; i < table.coords.n_rows; ++i) {
        os << fmt17(table.coords(i, 0)) << ',' << fmt17(table.coords(i, 1));
        for (uword k = 0; k < table.beta.n_cols; ++k) {
            os << ',' << fmt17(table.beta(i, k)) << ',' << fmt17(table.se(i, k)) << ','
               << fmt17(table.tvalues(i, k)) << ',' << fmt17(table.pvalues(i, k)) << ','
               << (table.pvalues(i, k) < table.alpha ? 1 : 0);
        }
        os << "\n";
    }
    require_stream(os, path);
}

SurfaceTable read_surface_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read '" + path + "'");
    std::string line;
    if (!std::getline(is, line)) throw ParseError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    std::stringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) header.push_back(field);
    if (header.size() < 2 || header[0] != "x" || header[1] != "y")
        throw SchemaError("'" + path + "' does not start with x,y columns");
    if ((header.size() - 2) % 5 != 0)
        throw SchemaError("'" + path + "' does not hold five columns per term");

    SurfaceTable table;
    for (std::size_t c = 2; c < header.size(); c += 5) {
        if (header[c].rfind("beta_", 0) != 0)
            throw SchemaError("unexpected column '" + header[c] + "' in '" + path + "'");
        table.terms.push_back(header[c].substr(5));
    }

    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        while (std::getline(ls, field, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(field, &used);
                if (used != field.size()) throw std::invalid_argument(field);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ParseError("'" + path + "' row " + std::to_string(lineno) +
                                 ": cannot parse '" + field + "'");
            }
        }
        if (row.size() != header.size())
            throw ParseError("'" + path + "' row " + std::to_string(lineno) +
                             " holds " + std::to_string(row.size()) + " fields, expected " +
                             std::to_string(header.size()));
        rows.push_back(std::move(row));
    }

    uword n = rows.size();
    uword p = table.terms.size();
    table.coords.set_size(n, 2);
    table.beta.set_size(n, p);
    table.se.set_size(n, p);
    table.tvalues.set_size(n, p);
    table.pvalues.set_size(n, p);
    for (uword i = 0; i < n; ++i) {
        table.coords(i, 0) = rows[i][0];
        table.coords(i, 1) = rows[i][1];
        for (uword k = 0; k < p; ++k) {
            table.beta(i, k) = rows[i][2 + 5 * k];
            table.se(i, k) = rows[i][3 + 5 * k];
            table.tvalues(i, k) = rows[i][4 + 5 * k];
            table.pvalues(i, k) = rows[i][5 + 5 * k];
        }
    }
    return table;
}

void write_surface_geojson(const SurfaceTable& table, const std::string& path) {
    json features = json::array();
    for (uword i = 0; i < table.coords.n_rows; ++i) {
        json props = json::object();
        for (uword k = 0; k < table.beta.n_cols; ++k) {
            const std::string& term = table.terms[k];
            props["beta_" + term] = number_or_null(table.beta(i, k));
            props["se_" + term] = number_or_null(table.se(i, k));
            props["t_" + term] = number_or_null(table.tvalues(i, k));
            props["p_" + term] = number_or_null(table.pvalues(i, k));
            props["sig_" + term] = table.pvalues(i, k) < table.alpha;
        }
        features.push_back(
            {{"type", "Feature"},
             {"geometry",
              {{"type", "Point"},
               {"coordinates", {table.coords(i, 0), table.coords(i, 1)}}}},
             {"properties", props}});
    }
    json fc = {{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream os(path);
    require_stream(os, path);
    os << fc.dump(2) << "\n";
    require_stream(os, path);
}

void write_report_json(const RouteMapReport& report, const std::string& path,
                       const std::string& timestamp, const std::string& run_config_json) {
    json j;
    j["tool"] = "gwkit routemap";
    j["version"] = kVersion;
    if (!timestamp.empty()) j["generated_at"] = timestamp;

    const RouteMapConfig& cfg = report.config;
    const char* wkind = cfg.moran_weights.kind == WeightKind::Knn ? "knn"
                        : cfg.moran_weights.kind == WeightKind::DistanceBand
                            ? "distance_band"
                            : "inverse_distance";
    j["config"] = {{"global_threshold", cfg.global_threshold},
                   {"similarity_ratio", cfg.similarity_ratio},
                   {"alpha", cfg.alpha},
                   {"overfit_fraction", cfg.overfit_fraction},
                   {"disagreement_veto", cfg.disagreement_veto},
                   {"kernel", kernel_name(cfg.kernel)},
                   {"bandwidth_form",
                    cfg.form == BandwidthForm::Adaptive ? "adaptive" : "fixed"},
                   {"moran_weights",
                    {{"scheme", wkind},
                     {"parameter", cfg.moran_weights.parameter},
                     {"row_standardize", cfg.moran_weights.row_standardize}}},
                   {"moran_permutations", cfg.moran_permutations},
                   {"seed", cfg.seed}};
    if (cfg.mx_local_bandwidth)
        j["config"]["mx_local_bandwidth"] = *cfg.mx_local_bandwidth;

    if (!run_config_json.empty()) {
        json run = json::parse(run_config_json, nullptr, false);
        if (run.is_discarded() || !run.is_object())
            throw ContractError("run_config_json must be a JSON object");
        j["run"] = run;
    }

    json steps;
    steps["least_squares"] = global_fit_json(report.ols);
    steps["least_squares_residual_autocorrelation"] = moran_json(report.ols_moran);
    steps["multiscale"] = msgwr_json(report.msgwr);
    steps["multiscale_residual_autocorrelation"] = moran_json(report.msgwr_moran);
    j["steps"] = steps;

    j["classification"] = classification_json(report.classification);

    json candidates = json::object();
    if (report.sam) candidates["sam"] = global_fit_json(*report.sam);
    if (report.gwr) candidates["gwr"] = gwr_json(*report.gwr, report.gwr_search);
    if (report.mxgwr) candidates["mxgwr"] = mxgwr_json(*report.mxgwr);
    if (!candidates.empty()) j["candidates"] = candidates;

    if (report.surfaces) {
        json by_term = json::object();
        for (const auto& [term, value] : report.surfaces->by_term)
            by_term[term] = number_or_null(value);
        j["surface_comparison"] = {
            {"by_term", by_term},
            {"max_disagreement", number_or_null(report.surfaces->max_disagreement)}};
    }

    json comparison = json::array();
    for (const auto& row : report.comparison)
        comparison.push_back({{"model", row.model}, {"aicc", number_or_null(row.aicc)}});
    j["comparison"] = comparison;

    double chosen_aicc = report.ols.aicc;
    switch (report.recommendation) {
        case ModelChoice::Linear: chosen_aicc = report.ols.aicc; break;
        case ModelChoice::Sam: chosen_aicc = report.sam ? report.sam->aicc : report.ols.aicc; break;
        case ModelChoice::Gwr: chosen_aicc = report.gwr ? report.gwr->aicc : report.msgwr.aicc; break;
        case ModelChoice::MxGwr:
            chosen_aicc = report.mxgwr ? report.mxgwr->aicc : report.msgwr.aicc;
            break;
        case ModelChoice::MsGwr: chosen_aicc = report.msgwr.aicc; break;
    }
    j["summary"] = {{"ols_aicc", number_or_null(report.ols.aicc)},
                    {"msgwr_aicc", number_or_null(report.msgwr.aicc)},
                    {"chosen_model", model_choice_name(report.recommendation)},
                    {"chosen_aicc", number_or_null(chosen_aicc)}};

    j["recommendation"] = model_choice_name(report.recommendation);
    j["linear_fallback_noted"] = report.linear_fallback_noted;
    j["rationale"] = report.rationale;
    j["warnings"] = report.warnings;

    std::ofstream os(path);
    require_stream(os, path);
    os << j.dump(2) << "\n";
    require_stream(os, path);
}

void write_report_text(const RouteMapReport& report, const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os.precision(6);

    os << "Model route map\n";
    os << "===============\n\n";

    os << "Step 1: least squares screening\n";
    os << "  terms:";
    for (const auto& term : report.ols.terms) os << ' ' << term;
    os << "\n";
    for (std::size_t k = 0; k < report.ols.terms.size(); ++k) {
        os << "  " << report.ols.terms[k] << ": " << report.ols.beta(k) << " (se "
           << report.ols.se(k) << ", p " << report.ols.pvalues(k) << ")\n";
    }
    os << "  R2 " << report.ols.r2 << ", AICc " << report.ols.aicc << ", overall F p "
       << report.ols.f_pvalue << "\n";
    os << "  residual Moran's I " << report.ols_moran.i << " (p " << report.ols_moran.pvalue
       << ")\n\n";

    os << "Step 2: multiscale calibration\n";
    for (std::size_t k = 0; k < report.msgwr.terms.size(); ++k) {
        const TermLabel& label = report.classification.labels[k];
        os << "  " << report.msgwr.terms[k] << ": bandwidth " << label.bandwidth
           << " (ratio " << label.ratio << ", " << (label.global ? "global" : "local");
        if (label.overfit) os << ", over-fit";
        os << ")\n";
    }
    os << "  R2 " << report.msgwr.r2 << ", AICc " << report.msgwr.aicc << ", "
       << (report.msgwr.converged ? "converged" : "did not converge") << " in "
       << report.msgwr.trace.size() << " sweeps\n";
    os << "  residual Moran's I " << report.msgwr_moran.i << " (p "
       << report.msgwr_moran.pvalue << ")\n\n";

    os << "Step 3: decision\n";
    for (const auto& line : report.rationale) os << "  - " << line << "\n";
    os << "\n";

    os << "Score comparison (AICc)\n";
    for (const auto& row : report.comparison) os << "  " << row.model << ": " << row.aicc
                                                 << "\n";
    os << "\n";

    os << "Recommendation: " << model_choice_name(report.recommendation) << "\n";
    if (report.linear_fallback_noted)
        os << "  (plain linear regression is a defensible simpler choice)\n";

    if (!report.warnings.empty()) {
        os << "\nWarnings\n";
        for (const auto& w : report.warnings) os << "  ! " << w << "\n";
    }
    require_stream(os, path);
}

std::string model_json(const GlobalFit& fit) { return global_fit_json(fit).dump(2); }

std::string model_json(const GwrFit& fit, const std::optional<BandwidthSearchResult>& search) {
    return gwr_json(fit, search).dump(2);
}

std::string model_json(const MsGwrFit& fit) { return msgwr_json(fit).dump(2); }

std::string model_json(const MxGwrFit& fit) { return mxgwr_json(fit).dump(2); }

} // namespace gwkit

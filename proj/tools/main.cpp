// gwkit: spatial regression with per-term bandwidths and an automated model
// route map. Subcommands: fit, routemap, diagnose, simulate, bw-curve.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <gwkit/dataset.hpp>
#include <gwkit/diagnostics.hpp>
#include <gwkit/errors.hpp>
#include <gwkit/global_models.hpp>
#include <gwkit/gwr.hpp>
#include <gwkit/mixed.hpp>
#include <gwkit/multiscale.hpp>
#include <gwkit/report.hpp>
#include <gwkit/routemap.hpp>
#include <gwkit/synth.hpp>
#include <gwkit/version.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gwkit;

namespace {

bool g_verbose = false;

void note(const std::string& line) {
    if (g_verbose) std::cerr << "gwkit: " << line << "\n";
}

void apply_threads(int threads) {
#ifdef _OPENMP
    if (threads <= 0) {
        const char* env = std::getenv("GWKIT_THREADS");
        if (env) threads = std::atoi(env);
    }
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

struct DataArgs {
    std::string input;
    std::string x = "x";
    std::string y = "y";
    std::string response;
    std::vector<std::string> predictors;
    std::vector<std::string> transforms;  // "variable:log" etc.
};

void add_data_options(CLI::App* cmd, DataArgs& args, bool need_predictors) {
    cmd->add_option("--input", args.input, "input CSV with a header row")->required();
    cmd->add_option("--x", args.x, "easting column (default x)");
    cmd->add_option("--y", args.y, "northing column (default y)");
    cmd->add_option("--response", args.response, "response column")->required();
    auto* preds = cmd->add_option("--predictors", args.predictors,
                                  "comma-separated predictor columns")
                      ->delimiter(',');
    if (need_predictors) preds->required();
    cmd->add_option("--transform", args.transforms,
                    "per-column transform, e.g. STN:log,ClayPC:sqrt "
                    "(log, sqrt, center, standardize)")
        ->delimiter(',');
}

SpatialDataset load_data(const DataArgs& args) {
    CsvSchema schema;
    schema.x = args.x;
    schema.y = args.y;
    schema.response = args.response;
    schema.predictors = args.predictors;
    SpatialDataset ds = load_csv(args.input, schema);
    for (const auto& item : args.transforms) {
        auto colon = item.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
            throw SchemaError("transform '" + item + "' is not variable:kind");
        ds.apply_transform(item.substr(0, colon),
                           transform_from_name(item.substr(colon + 1)));
    }
    note("loaded " + std::to_string(ds.n()) + " rows from " + args.input);
    return ds;
}

json run_echo(const std::string& command, const DataArgs& args) {
    json run;
    run["command"] = command;
    run["input"] = args.input;
    run["x"] = args.x;
    run["y"] = args.y;
    run["response"] = args.response;
    run["predictors"] = args.predictors;
    run["transforms"] = args.transforms;
    return run;
}

Bandwidth parse_bandwidth(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw SchemaError("bandwidth '" + text + "' is not fixed:<distance> or "
                          "adaptive:<count>");
    std::string form = text.substr(0, colon);
    double value = 0.0;
    try {
        value = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw SchemaError("bandwidth '" + text + "' has a malformed value");
    }
    if (form == "fixed") return Bandwidth::fixed(value);
    if (form == "adaptive") return Bandwidth::adaptive(value);
    throw SchemaError("bandwidth form '" + form + "' is not fixed or adaptive");
}

WeightScheme parse_weights(const std::string& text, bool row_standardize) {
    auto colon = text.find(':');
    std::string kind = colon == std::string::npos ? text : text.substr(0, colon);
    double value = 0.0;
    if (colon != std::string::npos) {
        try {
            value = std::stod(text.substr(colon + 1));
        } catch (const std::exception&) {
            throw SchemaError("weight scheme '" + text + "' has a malformed parameter");
        }
    }
    if (kind == "knn") {
        if (colon == std::string::npos) value = 8.0;
        return WeightScheme::knn(static_cast<std::size_t>(value), row_standardize);
    }
    if (kind == "band" || kind == "distance_band")
        return WeightScheme::distance_band(value, row_standardize);
    if (kind == "idw" || kind == "inverse_distance") {
        if (colon == std::string::npos) value = 1.0;
        return WeightScheme::inverse_distance(value, row_standardize);
    }
    throw SchemaError("weight scheme '" + kind + "' is not knn, band, or idw");
}

BandwidthForm parse_form(const std::string& text) {
    if (text == "fixed") return BandwidthForm::Fixed;
    if (text == "adaptive") return BandwidthForm::Adaptive;
    throw SchemaError("bandwidth form '" + text + "' is not fixed or adaptive");
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write to '" + path + "'");
    os << content;
    if (!os) throw IoError("cannot write to '" + path + "'");
}

void write_curve_csv(const BandwidthCurve& curve, const std::string& path) {
    std::ostringstream os;
    os << "bandwidth," << (curve.criterion == BandwidthCriterion::Cv ? "cv" : "aicc")
       << "\n";
    for (std::size_t i = 0; i < curve.bandwidths.size(); ++i)
        os << fmt17(curve.bandwidths[i]) << ',' << fmt17(curve.scores[i]) << "\n";
    write_text_file(path, os.str());
}

std::string out_path(const std::string& dir, const std::string& name) {
    fs::create_directories(dir.empty() ? "." : dir);
    return (fs::path(dir.empty() ? "." : dir) / name).string();
}

void write_surfaces(const SurfaceTable& table, const std::string& dir,
                    const std::string& stem, bool geojson) {
    std::string csv = out_path(dir, stem + ".csv");
    write_surface_csv(table, csv);
    std::cout << "surfaces: " << csv << "\n";
    if (geojson) {
        std::string gj = out_path(dir, stem + ".geojson");
        write_surface_geojson(table, gj);
        std::cout << "surfaces: " << gj << "\n";
    }
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

// --- fit ---------------------------------------------------------------------

struct FitArgs {
    DataArgs data;
    std::string model = "ols";
    std::string kernel = "bisquare";
    std::string bw;
    std::string bw_search;
    std::string bw_form = "fixed";
    std::vector<std::string> bw_list;
    std::vector<std::string> global_terms;
    std::vector<std::string> local_terms;
    bool no_nugget = false;
    double fixed_nugget = -1.0;
    double fixed_range = -1.0;
    bool no_center = false;
    double soc_tol = 1e-5;
    std::size_t max_sweeps = 100;
    double alpha = 0.05;
    std::string out = ".";
    bool geojson = false;
    int threads = 0;
};

int run_fit(const FitArgs& args) {
    apply_threads(args.threads);
    SpatialDataset ds = load_data(args.data);
    DistanceMatrix dm(ds.coords());
    Formula formula{args.data.response, args.data.predictors};
    KernelType kernel = kernel_from_name(args.kernel);
    BandwidthForm form = parse_form(args.bw_form);

    json report;
    report["tool"] = "gwkit fit";
    report["version"] = kVersion;
    json run = run_echo("fit", args.data);
    run["model"] = args.model;
    report["run"] = run;

    if (args.model == "ols" || args.model == "sam") {
        GlobalFit fit;
        if (args.model == "ols") {
            fit = fit_ols(ds, formula);
        } else {
            SamOptions options;
            if (args.no_nugget) options.nugget = false;
            if (args.fixed_nugget >= 0.0) options.fixed_nugget = args.fixed_nugget;
            if (args.fixed_range > 0.0) options.fixed_range = args.fixed_range;
            fit = fit_sam(ds, formula, dm, options);
        }
        report["fit"] = json::parse(model_json(fit));
        std::cout << args.model << ": AICc " << fit.aicc << ", R2 " << fit.r2 << "\n";
    } else if (args.model == "gwr") {
        KernelSpec spec{kernel, {}};
        std::optional<BandwidthSearchResult> search;
        if (!args.bw.empty()) {
            spec.bandwidth = parse_bandwidth(args.bw);
        } else {
            BandwidthSearchOptions options;
            options.criterion = args.bw_search == "cv" ? BandwidthCriterion::Cv
                                                       : BandwidthCriterion::Aicc;
            note("searching the bandwidth by " +
                 std::string(options.criterion == BandwidthCriterion::Cv ? "cv" : "aicc"));
            search = optimize_bandwidth(ds, formula, dm, kernel, form, options);
            spec.bandwidth = search->chosen;
            std::string curve = out_path(args.out, "bandwidth_curve.csv");
            write_curve_csv(search->curve, curve);
            note("evaluated " + std::to_string(search->curve.bandwidths.size()) +
                 " bandwidths");
            std::cout << "chosen bandwidth: "
                      << (spec.bandwidth.form == BandwidthForm::Adaptive ? "adaptive "
                                                                         : "fixed ")
                      << spec.bandwidth.value << " (curve: " << curve << ")\n";
        }
        GwrFit fit = fit_gwr(ds, formula, dm, spec);
        report["fit"] = json::parse(model_json(fit, search));
        write_surfaces(surface_table(fit, ds.coords(), args.alpha), args.out,
                       "surfaces_gwr", args.geojson);
        std::cout << "gwr: AICc " << fit.aicc << ", R2 " << fit.r2 << "\n";
    } else if (args.model == "mxgwr") {
        TermSplit split;
        auto in = [](const std::vector<std::string>& list, const std::string& name) {
            return std::find(list.begin(), list.end(), name) != list.end();
        };
        for (const auto& name : args.global_terms)
            if (name != "intercept" && !in(args.data.predictors, name))
                throw SchemaError("--global names unknown term '" + name + "'");
        for (const auto& name : args.local_terms)
            if (name != "intercept" && !in(args.data.predictors, name))
                throw SchemaError("--local names unknown term '" + name + "'");
        // Intercept defaults to the local side; predictors follow the lists,
        // the rest go wherever the intercept is not needed: unlisted
        // predictors are local unless only --local was given.
        bool default_local = args.local_terms.empty() || !args.global_terms.empty();
        if (in(args.global_terms, "intercept")) {
            split.global_terms.push_back("intercept");
        } else {
            split.local_terms.push_back("intercept");
        }
        for (const auto& name : args.data.predictors) {
            if (in(args.global_terms, name)) {
                split.global_terms.push_back(name);
            } else if (in(args.local_terms, name)) {
                split.local_terms.push_back(name);
            } else if (default_local) {
                split.local_terms.push_back(name);
            } else {
                split.global_terms.push_back(name);
            }
        }
        KernelSpec spec{kernel, {}};
        if (!args.bw.empty()) {
            spec.bandwidth = parse_bandwidth(args.bw);
        } else {
            // No bandwidth given: tune one on the local part alone.
            Formula local_formula{args.data.response, {}};
            for (const auto& name : split.local_terms)
                if (name != "intercept") local_formula.predictors.push_back(name);
            note("searching a bandwidth over the local terms");
            BandwidthSearchOptions options;
            auto search = optimize_bandwidth(ds, local_formula, dm, kernel, form, options);
            spec.bandwidth = search.chosen;
            std::cout << "chosen local bandwidth: " << spec.bandwidth.value << "\n";
        }
        MxGwrFit fit = fit_mxgwr(ds, formula, dm, split, spec);
        report["fit"] = json::parse(model_json(fit));
        write_surfaces(surface_table(fit, ds.coords(), args.alpha), args.out,
                       "surfaces_mxgwr", args.geojson);
        std::cout << "mxgwr: AICc " << fit.aicc << ", R2 " << fit.r2 << "\n";
    } else if (args.model == "msgwr") {
        MsGwrOptions options;
        options.kernel = kernel;
        options.form = form;
        options.center_for_bandwidths = !args.no_center;
        options.soc_tol = args.soc_tol;
        options.max_sweeps = args.max_sweeps;
        MsGwrFit fit;
        if (!args.bw_list.empty()) {
            std::vector<Bandwidth> bandwidths;
            for (const auto& item : args.bw_list) bandwidths.push_back(parse_bandwidth(item));
            fit = msgwr_fixed_bandwidths(ds, formula, dm, bandwidths, options);
        } else {
            note("backfitting with per-term bandwidth search");
            fit = fit_msgwr(ds, formula, dm, options);
        }
        report["fit"] = json::parse(model_json(fit));
        write_surfaces(surface_table(fit, ds.coords(), args.alpha), args.out,
                       "surfaces_msgwr", args.geojson);
        std::cout << "msgwr: AICc " << fit.aicc << ", R2 " << fit.r2 << ", "
                  << (fit.converged ? "converged" : "did not converge") << " in "
                  << fit.trace.size() << " sweeps\n";
        for (std::size_t k = 0; k < fit.terms.size(); ++k)
            std::cout << "  " << fit.terms[k] << ": bandwidth " << fit.bandwidths[k].value
                      << "\n";
    } else {
        throw SchemaError("--model '" + args.model +
                          "' is not ols, sam, gwr, mxgwr, or msgwr");
    }

    std::string path = out_path(args.out, "fit.json");
    write_text_file(path, report.dump(2) + "\n");
    std::cout << "report: " << path << "\n";
    return 0;
}

// --- routemap ------------------------------------------------------------------

struct RouteArgs {
    DataArgs data;
    std::string config_path;
    double global_threshold = -1.0;
    double similarity_ratio = -1.0;
    double alpha = -1.0;
    double overfit_fraction = -1.0;
    double disagreement_veto = -1.0;
    std::string kernel;
    std::string bw_form;
    std::string weights;
    bool no_row_standardize = false;
    std::size_t permutations = 0;
    bool permutations_set = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double mx_local_bandwidth = 0.0;
    bool mx_bw_set = false;
    std::string out = ".";
    bool geojson = false;
    bool no_timestamp = false;
    int threads = 0;
};

void apply_config_file(RouteArgs& args, RouteMapConfig& cfg) {
    std::ifstream is(args.config_path);
    if (!is) throw IoError("cannot read config '" + args.config_path + "'");
    json doc = json::parse(is, nullptr, false);
    if (doc.is_discarded())
        throw ParseError("config '" + args.config_path + "' is not valid JSON");

    // A previously written report is accepted as a config: its "run" block
    // carries the data schema and its "config" block the thresholds.
    json run = doc.contains("run") && doc["run"].is_object() ? doc["run"] : doc;
    json conf = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;

    if (args.data.input.empty() && run.contains("input"))
        args.data.input = run["input"].get<std::string>();
    if (run.contains("x") && args.data.x == "x") args.data.x = run["x"].get<std::string>();
    if (run.contains("y") && args.data.y == "y") args.data.y = run["y"].get<std::string>();
    if (args.data.response.empty() && run.contains("response"))
        args.data.response = run["response"].get<std::string>();
    if (args.data.predictors.empty() && run.contains("predictors"))
        args.data.predictors = run["predictors"].get<std::vector<std::string>>();
    if (args.data.transforms.empty() && run.contains("transforms"))
        args.data.transforms = run["transforms"].get<std::vector<std::string>>();

    if (conf.contains("global_threshold")) cfg.global_threshold = conf["global_threshold"];
    if (conf.contains("similarity_ratio")) cfg.similarity_ratio = conf["similarity_ratio"];
    if (conf.contains("alpha")) cfg.alpha = conf["alpha"];
    if (conf.contains("overfit_fraction")) cfg.overfit_fraction = conf["overfit_fraction"];
    if (conf.contains("disagreement_veto")) cfg.disagreement_veto = conf["disagreement_veto"];
    if (conf.contains("kernel")) cfg.kernel = kernel_from_name(conf["kernel"]);
    if (conf.contains("bandwidth_form"))
        cfg.form = parse_form(conf["bandwidth_form"].get<std::string>());
    if (conf.contains("moran_weights")) {
        const json& mw = conf["moran_weights"];
        bool rs = mw.value("row_standardize", true);
        std::string scheme = mw.value("scheme", "knn");
        double parameter = mw.value("parameter", 8.0);
        if (scheme == "knn") {
            cfg.moran_weights =
                WeightScheme::knn(static_cast<std::size_t>(parameter), rs);
        } else if (scheme == "distance_band") {
            cfg.moran_weights = WeightScheme::distance_band(parameter, rs);
        } else if (scheme == "inverse_distance") {
            cfg.moran_weights = WeightScheme::inverse_distance(parameter, rs);
        } else {
            throw SchemaError("moran_weights scheme '" + scheme + "' is unknown");
        }
    }
    if (conf.contains("moran_permutations"))
        cfg.moran_permutations = conf["moran_permutations"].get<std::size_t>();
    if (conf.contains("seed")) cfg.seed = conf["seed"].get<std::uint64_t>();
    if (conf.contains("mx_local_bandwidth") && conf["mx_local_bandwidth"].is_number())
        cfg.mx_local_bandwidth = conf["mx_local_bandwidth"].get<double>();
}

int run_routemap_cmd(RouteArgs& args) {
    apply_threads(args.threads);
    RouteMapConfig cfg;
    if (!args.config_path.empty()) apply_config_file(args, cfg);

    if (args.global_threshold >= 0.0) cfg.global_threshold = args.global_threshold;
    if (args.similarity_ratio >= 0.0) cfg.similarity_ratio = args.similarity_ratio;
    if (args.alpha >= 0.0) cfg.alpha = args.alpha;
    if (args.overfit_fraction >= 0.0) cfg.overfit_fraction = args.overfit_fraction;
    if (args.disagreement_veto >= 0.0) cfg.disagreement_veto = args.disagreement_veto;
    if (!args.kernel.empty()) cfg.kernel = kernel_from_name(args.kernel);
    if (!args.bw_form.empty()) cfg.form = parse_form(args.bw_form);
    if (!args.weights.empty())
        cfg.moran_weights = parse_weights(args.weights, !args.no_row_standardize);
    if (args.permutations_set) cfg.moran_permutations = args.permutations;
    if (args.seed_set) cfg.seed = args.seed;
    if (args.mx_bw_set) cfg.mx_local_bandwidth = args.mx_local_bandwidth;

    if (args.data.input.empty() || args.data.response.empty())
        throw SchemaError("routemap needs --input and --response (flags or config file)");

    SpatialDataset ds = load_data(args.data);
    Formula formula{args.data.response, args.data.predictors};

    note("step 1: least squares and residual autocorrelation");
    note("step 2: multiscale calibration");
    RouteMapReport report = run_routemap(ds, formula, cfg);

    json run = run_echo("routemap", args.data);
    run["out"] = args.out;
    run["geojson"] = args.geojson;

    std::string path = out_path(args.out, "report.json");
    write_report_json(report, path, args.no_timestamp ? "" : utc_timestamp(), run.dump());
    std::string text_path = out_path(args.out, "report.txt");
    write_report_text(report, text_path);

    write_surfaces(surface_table(report.msgwr, ds.coords(), cfg.alpha), args.out,
                   "surfaces_msgwr", args.geojson);
    if (report.gwr)
        write_surfaces(surface_table(*report.gwr, ds.coords(), cfg.alpha), args.out,
                       "surfaces_gwr", args.geojson);
    if (report.mxgwr)
        write_surfaces(surface_table(*report.mxgwr, ds.coords(), cfg.alpha), args.out,
                       "surfaces_mxgwr", args.geojson);

    std::cout << "recommendation: " << model_choice_name(report.recommendation) << "\n";
    for (const auto& line : report.rationale) std::cout << "  - " << line << "\n";
    for (const auto& w : report.warnings) std::cout << "  ! " << w << "\n";
    std::cout << "report: " << path << "\n";
    std::cout << "narrative: " << text_path << "\n";
    return 0;
}

// --- diagnose ------------------------------------------------------------------

struct DiagnoseArgs {
    DataArgs data;
    std::string weights = "knn:8";
    bool no_row_standardize = false;
    bool moran = false;
    bool moran_residuals = false;
    std::size_t permutations = 0;
    std::uint64_t seed = 0;
    bool collinearity = false;
    bool local_cn = false;
    bool std_residuals = false;
    std::string kernel = "bisquare";
    std::string bw;
    std::string out = ".";
    int threads = 0;
};

int run_diagnose(const DiagnoseArgs& args) {
    apply_threads(args.threads);
    SpatialDataset ds = load_data(args.data);
    DistanceMatrix dm(ds.coords());
    Formula formula{args.data.response, args.data.predictors};

    json report;
    report["tool"] = "gwkit diagnose";
    report["version"] = kVersion;
    report["run"] = run_echo("diagnose", args.data);

    WeightScheme scheme = parse_weights(args.weights, !args.no_row_standardize);
    WeightMatrix wm = build_weight_matrix(dm, scheme);
    report["weights"] = {{"scheme", args.weights},
                         {"row_standardize", !args.no_row_standardize},
                         {"s0", wm.s0},
                         {"islands", wm.islands}};
    if (!wm.warnings.empty()) report["weights"]["warnings"] = wm.warnings;

    GlobalFit ols;
    bool have_ols = false;
    auto need_ols = [&]() {
        if (!have_ols) {
            if (args.data.predictors.empty())
                throw SchemaError("this diagnostic needs --predictors");
            ols = fit_ols(ds, formula);
            have_ols = true;
        }
    };

    if (args.moran || args.moran_residuals) {
        MoranOptions options;
        options.permutations = args.permutations;
        options.seed = args.seed;
        arma::vec values;
        if (args.moran_residuals) {
            need_ols();
            options.mode = MoranMode::ResidualAdjusted;
            options.design = design_matrix(ds, formula);
            values = ols.residuals;
        } else {
            options.mode = MoranMode::Raw;
            values = ds.column(args.data.response);
        }
        MoranResult moran = morans_i(values, wm, options);
        json block = {{"mode", args.moran_residuals ? "residual_adjusted" : "raw"},
                      {"i", moran.i},
                      {"expected", moran.expected},
                      {"variance", moran.variance},
                      {"z", moran.z},
                      {"pvalue", moran.pvalue}};
        if (moran.permutation_pvalue) {
            block["permutation_pvalue"] = *moran.permutation_pvalue;
            block["permutations"] = args.permutations;
            block["seed"] = args.seed;
        }
        if (!moran.warnings.empty()) block["warnings"] = moran.warnings;
        report["moran"] = block;
        std::cout << "moran: I " << moran.i << ", p " << moran.pvalue << "\n";
    }

    if (args.collinearity) {
        if (args.data.predictors.empty())
            throw SchemaError("--collinearity needs --predictors");
        CollinearityReport cr = global_collinearity(ds, formula);
        json vif = json::object();
        for (std::size_t k = 0; k < cr.predictors.size(); ++k)
            vif[cr.predictors[k]] = cr.vif(k);
        report["collinearity"] = {{"condition_number", cr.condition_number},
                                  {"vif", vif},
                                  {"flags", cr.flags}};
        std::cout << "collinearity: condition number " << cr.condition_number << ", "
                  << cr.flags.size() << " flags\n";
        for (const auto& f : cr.flags) std::cout << "  ! " << f << "\n";
    }

    if (args.local_cn) {
        if (args.data.predictors.empty())
            throw SchemaError("--local-cn needs --predictors");
        if (args.bw.empty()) throw SchemaError("--local-cn needs --bw");
        KernelSpec spec{kernel_from_name(args.kernel), parse_bandwidth(args.bw)};
        LocalCollinearity lc = local_collinearity(ds, formula, dm, spec);
        std::string path = out_path(args.out, "local_collinearity.csv");
        std::ostringstream os;
        os << "x,y,cn";
        for (const auto& name : lc.predictors) os << ",vif_" << name;
        os << "\n";
        for (std::size_t i = 0; i < ds.n(); ++i) {
            os << fmt17(ds.coords()(i, 0)) << ',' << fmt17(ds.coords()(i, 1)) << ','
               << fmt17(lc.condition_number(i));
            for (std::size_t k = 0; k < lc.predictors.size(); ++k)
                os << ',' << fmt17(lc.vif(i, k));
            os << "\n";
        }
        write_text_file(path, os.str());
        report["local_collinearity"] = {{"kernel", args.kernel},
                                        {"max_condition_number",
                                         lc.condition_number.max()},
                                        {"flags", lc.flags},
                                        {"csv", path}};
        std::cout << "local collinearity: " << path << "\n";
        for (const auto& f : lc.flags) std::cout << "  ! " << f << "\n";
    }

    if (args.std_residuals) {
        need_ols();
        arma::mat X = design_matrix(ds, formula);
        arma::mat xtx_inv = arma::inv_sympd(X.t() * X);
        arma::vec hat_diag = arma::sum((X * xtx_inv) % X, 1);
        ResidualSource source{ols.residuals, ols.sigma2, hat_diag};
        StandardizedResiduals sr = standardized_residuals(source);
        std::string path = out_path(args.out, "standardized_residuals.csv");
        std::ostringstream os;
        os << "x,y,residual,flag\n";
        for (std::size_t i = 0; i < ds.n(); ++i) {
            bool flagged = std::find(sr.flagged.begin(), sr.flagged.end(), i) !=
                           sr.flagged.end();
            os << fmt17(ds.coords()(i, 0)) << ',' << fmt17(ds.coords()(i, 1)) << ','
               << fmt17(sr.values(i)) << ',' << (flagged ? 1 : 0) << "\n";
        }
        write_text_file(path, os.str());
        report["standardized_residuals"] = {{"flagged", sr.flagged},
                                            {"excluded", sr.excluded},
                                            {"csv", path}};
        if (!sr.warnings.empty()) report["standardized_residuals"]["warnings"] = sr.warnings;
        std::cout << "standardized residuals: " << sr.flagged.size() << " flagged, "
                  << path << "\n";
    }

    std::string path = out_path(args.out, "diagnostics.json");
    write_text_file(path, report.dump(2) + "\n");
    std::cout << "report: " << path << "\n";
    return 0;
}

// --- simulate ------------------------------------------------------------------

struct SimulateArgs {
    std::string spec_path;
    std::uint64_t seed = 0;
    std::string out = "synth.csv";
    std::string truth;
};

SurfaceSpec parse_surface(const json& j) {
    std::string kind = j.value("kind", "constant");
    if (kind == "constant") return SurfaceSpec::constant(j.value("c", 0.0));
    if (kind == "linear_trend")
        return SurfaceSpec::linear_trend(j.value("a", 0.0), j.value("b", 0.0));
    if (kind == "gaussian_bump")
        return SurfaceSpec::gaussian_bump(j.value("cx", 0.0), j.value("cy", 0.0),
                                          j.value("amplitude", 1.0),
                                          j.value("length_scale", 1.0));
    throw SchemaError("surface kind '" + kind +
                      "' is not constant, linear_trend, or gaussian_bump");
}

int run_simulate(const SimulateArgs& args) {
    std::ifstream is(args.spec_path);
    if (!is) throw IoError("cannot read spec '" + args.spec_path + "'");
    json doc = json::parse(is, nullptr, false);
    if (doc.is_discarded())
        throw ParseError("spec '" + args.spec_path + "' is not valid JSON");

    SynthSpec spec;
    spec.n = doc.value("n", std::size_t{100});
    spec.extent = doc.value("extent", 1000.0);
    std::string layout = doc.value("layout", "grid");
    if (layout == "grid") {
        spec.layout = PointLayout::Grid;
    } else if (layout == "uniform_random") {
        spec.layout = PointLayout::UniformRandom;
    } else {
        throw SchemaError("layout '" + layout + "' is not grid or uniform_random");
    }
    spec.predictor_sd = doc.value("predictor_sd", 1.0);
    spec.noise_sd = doc.value("noise_sd", 1.0);
    spec.response_name = doc.value("response_name", std::string("response"));
    if (doc.contains("predictor_names"))
        spec.predictor_names = doc["predictor_names"].get<std::vector<std::string>>();
    if (!doc.contains("surfaces") || !doc["surfaces"].is_array() || doc["surfaces"].empty())
        throw SchemaError("spec needs a non-empty surfaces array (first = intercept)");
    for (const auto& s : doc["surfaces"]) spec.surfaces.push_back(parse_surface(s));

    SvcData data = generate_svc(spec, args.seed);
    const SpatialDataset& ds = data.dataset;

    std::ostringstream os;
    os << "x,y," << ds.response_name();
    for (const auto& name : ds.predictor_names()) os << ',' << name;
    os << "\n";
    for (std::size_t i = 0; i < ds.n(); ++i) {
        os << fmt17(ds.coords()(i, 0)) << ',' << fmt17(ds.coords()(i, 1)) << ','
           << fmt17(ds.response()(i));
        for (std::size_t k = 0; k < ds.n_predictors(); ++k)
            os << ',' << fmt17(ds.predictors()(i, k));
        os << "\n";
    }
    write_text_file(args.out, os.str());
    std::cout << "wrote " << ds.n() << " rows to " << args.out << "\n";

    if (!args.truth.empty()) {
        std::ostringstream ts;
        ts << "x,y,beta_intercept";
        for (const auto& name : ds.predictor_names()) ts << ",beta_" << name;
        ts << "\n";
        for (std::size_t i = 0; i < ds.n(); ++i) {
            ts << fmt17(ds.coords()(i, 0)) << ',' << fmt17(ds.coords()(i, 1));
            for (std::size_t k = 0; k < data.truth.n_cols; ++k)
                ts << ',' << fmt17(data.truth(i, k));
            ts << "\n";
        }
        write_text_file(args.truth, ts.str());
        std::cout << "wrote coefficient fields to " << args.truth << "\n";
    }
    return 0;
}

// --- bw-curve ------------------------------------------------------------------

struct CurveArgs {
    DataArgs data;
    std::string kernel = "bisquare";
    std::string bw_form = "fixed";
    std::string criterion = "aicc";
    double lower = 0.0;
    double upper = 0.0;
    std::string out = "bandwidth_curve.csv";
    int threads = 0;
};

int run_bw_curve(const CurveArgs& args) {
    apply_threads(args.threads);
    SpatialDataset ds = load_data(args.data);
    DistanceMatrix dm(ds.coords());
    Formula formula{args.data.response, args.data.predictors};

    BandwidthSearchOptions options;
    options.criterion =
        args.criterion == "cv" ? BandwidthCriterion::Cv : BandwidthCriterion::Aicc;
    if (args.lower > 0.0) options.lower = args.lower;
    if (args.upper > 0.0) options.upper = args.upper;

    BandwidthSearchResult search = optimize_bandwidth(
        ds, formula, dm, kernel_from_name(args.kernel), parse_form(args.bw_form), options);
    write_curve_csv(search.curve, args.out);

    std::cout << "chosen bandwidth: "
              << (search.chosen.form == BandwidthForm::Adaptive ? "adaptive " : "fixed ")
              << search.chosen.value << " (" << args.criterion << " " << search.score
              << ")\n";
    for (const auto& w : search.warnings) std::cout << "  ! " << w << "\n";
    std::cout << "curve: " << args.out << " (" << search.curve.bandwidths.size()
              << " evaluations)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatial regression toolkit: five-model family with an automated "
                 "route map"};
    app.set_version_flag("--version", std::string("gwkit ") + kVersion);
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "calibrate one model");
    add_data_options(fit_cmd, fit_args.data, true);
    fit_cmd->add_option("--model", fit_args.model, "ols | sam | gwr | mxgwr | msgwr");
    fit_cmd->add_option("--kernel", fit_args.kernel,
                        "boxcar | bisquare | tricube | gaussian | exponential");
    fit_cmd->add_option("--bw", fit_args.bw, "bandwidth, fixed:<distance> or adaptive:<count>");
    fit_cmd->add_option("--bw-search", fit_args.bw_search, "aicc | cv (when --bw is absent)");
    fit_cmd->add_option("--bw-form", fit_args.bw_form, "fixed | adaptive (for searches)");
    fit_cmd->add_option("--bw-list", fit_args.bw_list,
                        "msgwr only: per-term bandwidths, e.g. fixed:556,fixed:2484,...")
        ->delimiter(',');
    fit_cmd->add_option("--global", fit_args.global_terms,
                        "mxgwr: terms held global (may include intercept)")
        ->delimiter(',');
    fit_cmd->add_option("--local", fit_args.local_terms, "mxgwr: terms given surfaces")
        ->delimiter(',');
    fit_cmd->add_flag("--no-nugget", fit_args.no_nugget, "sam: pin the nugget to zero");
    fit_cmd->add_option("--fixed-nugget", fit_args.fixed_nugget,
                        "sam: pin the nugget proportion");
    fit_cmd->add_option("--fixed-range", fit_args.fixed_range,
                        "sam: pin the correlation range");
    fit_cmd->add_flag("--no-center", fit_args.no_center,
                      "msgwr: tune bandwidths on raw rather than centred data");
    fit_cmd->add_option("--soc-tol", fit_args.soc_tol, "msgwr: convergence tolerance");
    fit_cmd->add_option("--max-sweeps", fit_args.max_sweeps, "msgwr: sweep cap");
    fit_cmd->add_option("--alpha", fit_args.alpha, "significance level for sig columns");
    fit_cmd->add_option("--out", fit_args.out, "output directory");
    fit_cmd->add_flag("--geojson", fit_args.geojson, "also write GeoJSON surfaces");
    fit_cmd->add_option("--threads", fit_args.threads, "worker threads (or GWKIT_THREADS)");
    fit_cmd->add_flag("--verbose", g_verbose, "progress to standard error");

    RouteArgs route_args;
    auto* route_cmd =
        app.add_subcommand("routemap", "run the three-step model route map");
    route_cmd->add_option("--input", route_args.data.input, "input CSV with a header row");
    route_cmd->add_option("--x", route_args.data.x, "easting column (default x)");
    route_cmd->add_option("--y", route_args.data.y, "northing column (default y)");
    route_cmd->add_option("--response", route_args.data.response, "response column");
    route_cmd->add_option("--predictors", route_args.data.predictors,
                          "comma-separated predictor columns")
        ->delimiter(',');
    route_cmd->add_option("--transform", route_args.data.transforms,
                          "per-column transform, e.g. STN:log,ClayPC:sqrt")
        ->delimiter(',');
    route_cmd->add_option("--config", route_args.config_path,
                          "JSON config (a written report.json also works)");
    route_cmd->add_option("--global-threshold", route_args.global_threshold,
                          "bandwidth ratio at or above which a term is global");
    route_cmd->add_option("--similarity-ratio", route_args.similarity_ratio,
                          "max/min spread calling local bandwidths similar");
    route_cmd->add_option("--alpha", route_args.alpha, "significance level");
    route_cmd->add_option("--overfit-fraction", route_args.overfit_fraction,
                          "adaptive bandwidth share of n flagged as over-fit");
    route_cmd->add_option("--disagreement-veto", route_args.disagreement_veto,
                          "surface disagreement keeping the multiscale fit");
    route_cmd->add_option("--kernel", route_args.kernel, "kernel for every local fit");
    route_cmd->add_option("--bw-form", route_args.bw_form, "fixed | adaptive");
    route_cmd->add_option("--weights", route_args.weights,
                          "Moran weights, knn:<k> | band:<d> | idw:<power>");
    route_cmd->add_flag("--no-row-standardize", route_args.no_row_standardize,
                        "keep raw Moran weights");
    route_cmd->add_option("--permutations", route_args.permutations, "Moran permutations")
        ->trigger_on_parse()
        ->each([&](const std::string&) { route_args.permutations_set = true; });
    route_cmd->add_option("--seed", route_args.seed, "permutation seed")
        ->trigger_on_parse()
        ->each([&](const std::string&) { route_args.seed_set = true; });
    route_cmd->add_option("--mx-local-bw", route_args.mx_local_bandwidth,
                          "override the mixed fit's local bandwidth")
        ->trigger_on_parse()
        ->each([&](const std::string&) { route_args.mx_bw_set = true; });
    route_cmd->add_option("--out", route_args.out, "output directory");
    route_cmd->add_flag("--geojson", route_args.geojson, "also write GeoJSON surfaces");
    route_cmd->add_flag("--no-timestamp", route_args.no_timestamp,
                        "omit generated_at for byte-stable reports");
    route_cmd->add_option("--threads", route_args.threads,
                          "worker threads (or GWKIT_THREADS)");
    route_cmd->add_flag("--verbose", g_verbose, "progress to standard error");

    DiagnoseArgs diag_args;
    auto* diag_cmd = app.add_subcommand("diagnose", "spatial and collinearity diagnostics");
    add_data_options(diag_cmd, diag_args.data, false);
    diag_cmd->add_option("--weights", diag_args.weights,
                         "knn:<k> | band:<d> | idw:<power> (default knn:8)");
    diag_cmd->add_flag("--no-row-standardize", diag_args.no_row_standardize,
                       "keep raw weights");
    diag_cmd->add_flag("--moran", diag_args.moran, "Moran's I of the response");
    diag_cmd->add_flag("--moran-residuals", diag_args.moran_residuals,
                       "Moran's I of least squares residuals (adjusted moments)");
    diag_cmd->add_option("--permutations", diag_args.permutations,
                         "permutation test draws");
    diag_cmd->add_option("--seed", diag_args.seed, "permutation seed");
    diag_cmd->add_flag("--collinearity", diag_args.collinearity,
                       "global VIF / condition number / decomposition");
    diag_cmd->add_flag("--local-cn", diag_args.local_cn,
                       "per-location collinearity (needs --kernel and --bw)");
    diag_cmd->add_flag("--std-residuals", diag_args.std_residuals,
                       "studentized least squares residuals with outlier flags");
    diag_cmd->add_option("--kernel", diag_args.kernel, "kernel for --local-cn");
    diag_cmd->add_option("--bw", diag_args.bw, "bandwidth for --local-cn");
    diag_cmd->add_option("--out", diag_args.out, "output directory");
    diag_cmd->add_option("--threads", diag_args.threads, "worker threads");
    diag_cmd->add_flag("--verbose", g_verbose, "progress to standard error");

    SimulateArgs sim_args;
    auto* sim_cmd =
        app.add_subcommand("simulate", "draw a dataset with known coefficient fields");
    sim_cmd->add_option("--spec", sim_args.spec_path, "JSON generator spec")->required();
    sim_cmd->add_option("--seed", sim_args.seed, "generator seed");
    sim_cmd->add_option("--out", sim_args.out, "output CSV (default synth.csv)");
    sim_cmd->add_option("--truth", sim_args.truth, "also write the coefficient fields");
    sim_cmd->add_flag("--verbose", g_verbose, "progress to standard error");

    CurveArgs curve_args;
    auto* curve_cmd =
        app.add_subcommand("bw-curve", "evaluate the bandwidth selection curve");
    add_data_options(curve_cmd, curve_args.data, true);
    curve_cmd->add_option("--kernel", curve_args.kernel, "kernel");
    curve_cmd->add_option("--bw-form", curve_args.bw_form, "fixed | adaptive");
    curve_cmd->add_option("--criterion", curve_args.criterion, "aicc | cv");
    curve_cmd->add_option("--lower", curve_args.lower, "search lower bound");
    curve_cmd->add_option("--upper", curve_args.upper, "search upper bound");
    curve_cmd->add_option("--out", curve_args.out, "curve CSV path");
    curve_cmd->add_option("--threads", curve_args.threads, "worker threads");
    curve_cmd->add_flag("--verbose", g_verbose, "progress to standard error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (fit_cmd->parsed()) return run_fit(fit_args);
        if (route_cmd->parsed()) return run_routemap_cmd(route_args);
        if (diag_cmd->parsed()) return run_diagnose(diag_args);
        if (sim_cmd->parsed()) return run_simulate(sim_args);
        if (curve_cmd->parsed()) return run_bw_curve(curve_args);
    } catch (const InputError& e) {
        std::cerr << "gwkit: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "gwkit: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "gwkit: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

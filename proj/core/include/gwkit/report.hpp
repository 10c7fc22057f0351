#ifndef GWKIT_REPORT_HPP
#define GWKIT_REPORT_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <armadillo>

#include "gwkit/routemap.hpp"

namespace gwkit {

// One named column block per term: beta, se, t, p, sig. Rows align with the
// calibration locations.
struct SurfaceTable {
    std::vector<std::string> terms;
    arma::mat coords;   // n x 2
    arma::mat beta;
    arma::mat se;
    arma::mat tvalues;
    arma::mat pvalues;
    double alpha = 0.05;
};

SurfaceTable surface_table(const GwrFit& fit, const arma::mat& coords, double alpha = 0.05);
SurfaceTable surface_table(const MsGwrFit& fit, const arma::mat& coords, double alpha = 0.05);
// Mixed fits export their local terms only; global coefficients live in the report.
SurfaceTable surface_table(const MxGwrFit& fit, const arma::mat& coords, double alpha = 0.05);

// CSV with x,y then beta_/se_/t_/p_/sig_<term> per term, numerics at 17
// significant digits so round trips are exact.
void write_surface_csv(const SurfaceTable& table, const std::string& path);
SurfaceTable read_surface_csv(const std::string& path);

// Same surfaces as a GeoJSON FeatureCollection of points.
void write_surface_geojson(const SurfaceTable& table, const std::string& path);

// Machine-readable route map report. Key order is fixed, numeric fields are
// emitted at full precision, and two runs on identical inputs produce
// identical bytes except for the "generated_at" stamp (omitted when
// `timestamp` is empty). `run_config_json`, when non-empty, must be a JSON
// object and is embedded verbatim as "run" so callers can echo their whole
// effective configuration (input path, schema, transforms).
void write_report_json(const RouteMapReport& report, const std::string& path,
                       const std::string& timestamp = "",
                       const std::string& run_config_json = "");

// Companion narrative: the steps taken, each rule that fired, and the
// comparison table, in plain text.
void write_report_text(const RouteMapReport& report, const std::string& path);

// One model's summary as a JSON object (serialized), for embedding in
// front-end reports. The multiscale form carries the full convergence trace.
std::string model_json(const GlobalFit& fit);
std::string model_json(const GwrFit& fit,
                       const std::optional<BandwidthSearchResult>& search = std::nullopt);
std::string model_json(const MsGwrFit& fit);
std::string model_json(const MxGwrFit& fit);

} // namespace gwkit

#endif

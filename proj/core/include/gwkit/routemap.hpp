#ifndef GWKIT_ROUTEMAP_HPP
#define GWKIT_ROUTEMAP_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <armadillo>

#include "gwkit/dataset.hpp"
#include "gwkit/diagnostics.hpp"
#include "gwkit/global_models.hpp"
#include "gwkit/gwr.hpp"
#include "gwkit/mixed.hpp"
#include "gwkit/multiscale.hpp"

namespace gwkit {

enum class ModelChoice { Linear, Sam, Gwr, MxGwr, MsGwr };

const char* model_choice_name(ModelChoice choice);

struct RouteMapConfig {
    double global_threshold = 0.8;        // bandwidth ratio at or above => global
    double similarity_ratio = 3.0;        // max/min local bandwidth => similar cluster
    double alpha = 0.05;
    double overfit_fraction = 0.02;       // adaptive bandwidth below this share of n
    double disagreement_veto = 0.2;       // surface disagreement forcing the rich model
    KernelType kernel = KernelType::Bisquare;
    BandwidthForm form = BandwidthForm::Fixed;
    WeightScheme moran_weights = WeightScheme::knn(8);
    std::size_t moran_permutations = 0;
    std::uint64_t seed = 0;
    std::optional<double> mx_local_bandwidth;  // override the median rule
};

struct TermLabel {
    std::string term;
    double bandwidth = 0.0;
    double ratio = 0.0;     // bandwidth / max distance, or count / n
    bool global = false;
    bool overfit = false;   // flagged and kept out of the similarity verdict
};

struct BandwidthClassification {
    std::vector<TermLabel> labels;
    bool any_global = false;
    bool all_global = false;
    bool all_local = false;      // over predictor terms; intercept reported separately
    bool intercept_global = false;
    bool local_cluster_similar = true;  // vacuously true when no local terms
    double local_spread = 1.0;          // max/min over non-overfit local bandwidths
    std::vector<std::string> notes;     // near-threshold calls, overfit flags
};

BandwidthClassification classify_bandwidths(const std::vector<std::string>& terms,
                                            const std::vector<Bandwidth>& bandwidths,
                                            const DistanceMatrix& dm,
                                            const RouteMapConfig& config);

// Share of locations where two coefficient surfaces tell a different story:
// opposite sign, or significant in one fit only (at alpha). Keys are the
// terms both fits carry surfaces for; throws ContractError when there are
// none or the location counts differ.
struct SurfaceComparison {
    std::map<std::string, double> by_term;
    double max_disagreement = 0.0;
};

struct TermSurface {
    std::string term;
    arma::vec beta;
    arma::vec pvalues;
};

SurfaceComparison surface_disagreement(const std::vector<TermSurface>& a,
                                       const std::vector<TermSurface>& b,
                                       double alpha);

struct ModelScore {
    std::string model;
    double aicc = 0.0;
};

struct RouteMapReport {
    RouteMapConfig config;
    GlobalFit ols;
    MoranResult ols_moran;
    MsGwrFit msgwr;
    MoranResult msgwr_moran;
    BandwidthClassification classification;
    ModelChoice recommendation = ModelChoice::Linear;
    std::vector<std::string> rationale;   // rule firings, in order
    std::vector<std::string> warnings;
    std::vector<ModelScore> comparison;   // always holds ols and msgwr rows
    std::optional<GlobalFit> sam;
    std::optional<GwrFit> gwr;
    std::optional<BandwidthSearchResult> gwr_search;
    std::optional<MxGwrFit> mxgwr;
    std::optional<SurfaceComparison> surfaces;
    bool linear_fallback_noted = false;   // SAM pick, coefficients inside OLS error bars
};

// Decision stage alone, for callers that already ran the calibrations.
struct RecommendationInput {
    const SpatialDataset& ds;
    const Formula& formula;
    const DistanceMatrix& dm;
    const GlobalFit& ols;
    const MoranResult& ols_moran;
    const MsGwrFit& msgwr;
};

void recommend(const RecommendationInput& input, const RouteMapConfig& config,
               RouteMapReport& report);

// The full pipeline: least squares with residual-mode Moran screening, a
// multiscale calibration with raw-mode Moran on its residuals, bandwidth
// classification, then the rule cascade. Every model the rules consult is
// kept in the report next to the recommendation.
RouteMapReport run_routemap(const SpatialDataset& ds, const Formula& formula,
                            const RouteMapConfig& config = {});

} // namespace gwkit

#endif

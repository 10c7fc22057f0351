#ifndef GWKIT_DIAGNOSTICS_HPP
#define GWKIT_DIAGNOSTICS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <armadillo>

#include "gwkit/dataset.hpp"
#include "gwkit/global_models.hpp"
#include "gwkit/kernel.hpp"

namespace gwkit {

// --- spatial weights -------------------------------------------------------

enum class WeightKind { Knn, DistanceBand, InverseDistance };

struct WeightScheme {
    WeightKind kind = WeightKind::Knn;
    double parameter = 8.0;      // k, band distance, or power
    bool row_standardize = true;

    static WeightScheme knn(std::size_t k, bool row_standardize = true) {
        return {WeightKind::Knn, static_cast<double>(k), row_standardize};
    }
    static WeightScheme distance_band(double d, bool row_standardize = true) {
        return {WeightKind::DistanceBand, d, row_standardize};
    }
    static WeightScheme inverse_distance(double power, bool row_standardize = true) {
        return {WeightKind::InverseDistance, power, row_standardize};
    }
};

struct WeightMatrix {
    arma::sp_mat w;              // zero diagonal
    double s0 = 0.0;             // sum of all weights
    WeightScheme scheme;
    std::vector<std::size_t> islands;  // rows with no neighbours
    std::vector<std::string> warnings;
};

WeightMatrix build_weight_matrix(const DistanceMatrix& dm, const WeightScheme& scheme);

// --- Moran's I -------------------------------------------------------------

// Raw mode centres the values and uses the closed-form moments for an
// observed variable; ResidualAdjusted uses the regression-residual moments
// and needs the design matrix the residuals came from.
enum class MoranMode { Raw, ResidualAdjusted };

struct MoranOptions {
    MoranMode mode = MoranMode::Raw;
    std::optional<arma::mat> design;     // required for ResidualAdjusted
    std::size_t permutations = 0;        // 0 = analytic p only
    std::uint64_t seed = 0;
};

struct MoranResult {
    double i = 0.0;
    double expected = 0.0;
    double variance = 0.0;
    double z = 0.0;
    double pvalue = 1.0;                         // two-sided, normal
    std::optional<double> permutation_pvalue;
    std::vector<std::string> warnings;
};

MoranResult morans_i(const arma::vec& values, const WeightMatrix& wm,
                     const MoranOptions& options = {});

// --- collinearity ----------------------------------------------------------

struct CollinearityReport {
    std::vector<std::string> predictors;
    arma::mat correlations;       // predictor pairwise
    arma::vec vif;                // per predictor
    double condition_number = 0.0;  // of the column-scaled design
    arma::mat vdp;                // condition index x term proportions
    arma::vec singular_values;
    std::vector<std::string> flags;  // threshold breaches, named
};

// Thresholds follow the usual rules of thumb; breaches land in `flags`.
inline constexpr double kConditionNumberFlag = 30.0;
inline constexpr double kVifFlag = 10.0;
inline constexpr double kVdpFlag = 0.5;
inline constexpr double kCorrelationFlag = 0.8;

CollinearityReport global_collinearity(const SpatialDataset& ds, const Formula& formula);

struct LocalCollinearity {
    std::vector<std::string> predictors;
    arma::vec condition_number;   // per location
    arma::mat vif;                // n x m
    arma::cube correlations;      // m x m x n, weighted Pearson
    std::vector<std::string> flags;
};

LocalCollinearity local_collinearity(const SpatialDataset& ds, const Formula& formula,
                                     const DistanceMatrix& dm, const KernelSpec& spec);

// --- residual screening ------------------------------------------------------

// Any fitted model reduced to what studentization needs.
struct ResidualSource {
    arma::vec residuals;
    double sigma2 = 0.0;
    std::optional<arma::vec> hat_diag;
};

struct StandardizedResiduals {
    arma::vec values;
    std::vector<std::size_t> flagged;   // |r| > 3
    std::vector<std::size_t> excluded;  // leverage at or above 1
    std::vector<std::string> warnings;
};

StandardizedResiduals standardized_residuals(const ResidualSource& source);

} // namespace gwkit

#endif

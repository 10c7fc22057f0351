#ifndef GWKIT_DATASET_HPP
#define GWKIT_DATASET_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <armadillo>

namespace gwkit {

enum class TransformKind { None, NaturalLog, Sqrt, Center, Standardize };

const char* transform_name(TransformKind kind);
TransformKind transform_from_name(const std::string& name);

// One applied operation, with enough detail to replay or invert it.
struct TransformRecord {
    std::string variable;
    TransformKind kind = TransformKind::None;
    double mean = 0.0; // Center / Standardize
    double sd = 1.0;   // Standardize
};

// Centering/standardizing state for a set of variables, invertible.
struct ScalingRecord {
    std::vector<std::string> variables;
    arma::vec means;
    arma::vec sds;     // all 1.0 when only centred
    bool standardized = false;
};

struct CsvSchema {
    std::string x = "x";
    std::string y = "y";
    std::string response;
    std::vector<std::string> predictors;
};

// Projected-coordinate point data with one response and named predictor
// columns. Row order is load order and is preserved by every operation.
class SpatialDataset {
public:
    SpatialDataset() = default;
    SpatialDataset(arma::mat coords, arma::vec response, arma::mat predictors,
                   std::string response_name, std::vector<std::string> predictor_names);

    std::size_t n() const { return coords_.n_rows; }
    std::size_t n_predictors() const { return predictors_.n_cols; }

    const arma::mat& coords() const { return coords_; }
    const arma::vec& response() const { return response_; }
    const arma::mat& predictors() const { return predictors_; }
    const std::string& response_name() const { return response_name_; }
    const std::vector<std::string>& predictor_names() const { return predictor_names_; }

    bool has_column(const std::string& name) const;
    // Response or predictor column by name; throws SchemaError when missing.
    arma::vec column(const std::string& name) const;
    std::size_t predictor_index(const std::string& name) const;

    const std::vector<TransformRecord>& transform_log() const { return transform_log_; }

    // In-place natural_log / sqrt / none on one variable. Domain violations
    // throw TransformError naming the offending rows.
    void apply_transform(const std::string& variable, TransformKind kind);

    // Centre (and optionally scale to unit sd) the named variables. The
    // returned record inverts the operation via uncenter().
    ScalingRecord center(const std::vector<std::string>& variables, bool standardize = false);
    void uncenter(const ScalingRecord& record);

    // Replays a transform log on this dataset (used to rebuild a working
    // dataset from raw data).
    void replay(const std::vector<TransformRecord>& log);

    SpatialDataset permuted(const arma::uvec& order) const;

private:
    arma::mat coords_;       // n x 2
    arma::vec response_;
    arma::mat predictors_;   // n x m
    std::string response_name_;
    std::vector<std::string> predictor_names_;
    std::vector<TransformRecord> transform_log_;
};

// Pairwise Euclidean distances plus per-row nearest-neighbour order. Rows are
// materialized up front for n <= 20000 and computed on demand above that.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(const arma::mat& coords);

    std::size_t n() const { return n_; }
    arma::vec row(std::size_t i) const;
    double at(std::size_t i, std::size_t j) const;

    // Distance to the k-th nearest observation of row i, self included at
    // rank 1. k is clamped to [1, n].
    double kth_nearest_distance(std::size_t i, std::size_t k) const;

    double max_pair_distance() const { return max_pair_distance_; }
    double min_positive_distance() const { return min_positive_distance_; }

    // Pairs (i, j), i < j, at exactly zero distance.
    const std::vector<std::pair<std::size_t, std::size_t>>& coincident_pairs() const {
        return coincident_pairs_;
    }

private:
    arma::vec computed_row(std::size_t i) const;

    arma::mat coords_;
    arma::mat dense_;        // empty when rows are computed on demand
    std::size_t n_ = 0;
    bool materialized_ = false;
    double max_pair_distance_ = 0.0;
    double min_positive_distance_ = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> coincident_pairs_;
};

// Loads a UTF-8, comma-separated, '.'-decimal file with a header row.
// Throws SchemaError for missing columns, ParseError (row and column named)
// for malformed numerics, InsufficientDataError when fewer than
// predictors + 2 rows survive.
SpatialDataset load_csv(const std::string& path, const CsvSchema& schema);

} // namespace gwkit

#endif

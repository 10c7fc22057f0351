#ifndef GWKIT_GWR_HPP
#define GWKIT_GWR_HPP

#include <cstddef>
#include <string>
#include <vector>

#include <armadillo>

#include "gwkit/dataset.hpp"
#include "gwkit/global_models.hpp"
#include "gwkit/kernel.hpp"

namespace gwkit {

// One location's weighted least squares solve. ci is (X'WX)^-1 X'W (p x n)
// and hat_row is x_i' ci, so fitted = hat_row * y.
struct LocalFit {
    arma::vec beta;
    arma::rowvec hat_row;
    arma::mat ci;
};

LocalFit local_fit(const arma::mat& X, const arma::vec& y, const arma::vec& w,
                   std::size_t i);

struct GwrFit {
    std::vector<std::string> terms;
    KernelSpec spec;
    arma::mat beta;      // n x p
    arma::mat se;
    arma::mat tvalues;
    arma::mat pvalues;
    arma::vec fitted;
    arma::vec residuals;
    arma::vec hat_diag;
    arma::mat hat;       // n x n, empty above the materialization cutoff
    double tr_s = 0.0;
    double tr_sts = 0.0;
    double enp = 0.0;     // 2 tr(S) - tr(S'S)
    double resid_df = 0.0;
    double rss = 0.0;
    double sigma2 = 0.0;  // rss / resid_df
    double r2 = 0.0;
    double aicc = 0.0;
    std::vector<std::string> warnings;
};

// Full-matrix hat accounting is kept up to this many observations; above it
// only the traces needed for AICc and effective parameters are accumulated.
inline constexpr std::size_t kHatMaterializeLimit = 5000;

GwrFit fit_gwr(const SpatialDataset& ds, const Formula& formula,
               const DistanceMatrix& dm, const KernelSpec& spec);

enum class BandwidthCriterion { Aicc, Cv };

// Leave-one-out squared prediction error; the weight of the held-out point is
// forced to zero. Singular local fits make the score +inf.
double cv_score(const SpatialDataset& ds, const Formula& formula,
                const DistanceMatrix& dm, const KernelSpec& spec);

struct BandwidthCurve {
    BandwidthCriterion criterion = BandwidthCriterion::Aicc;
    std::vector<double> bandwidths;  // ascending
    std::vector<double> scores;
    bool plateau = false;            // score range under 2 units
    bool boundary_minimum = false;   // optimum at a search bound
};

struct BandwidthSearchResult {
    Bandwidth chosen;
    double score = 0.0;
    BandwidthCurve curve;
    bool overfit = false;  // adaptive optimum below 2% of n
    std::vector<std::string> warnings;
};

struct BandwidthSearchOptions {
    BandwidthCriterion criterion = BandwidthCriterion::Aicc;
    // Default bounds guarantee well-posed local fits: fixed from the distance
    // that gives the sparsest location 2(p+1) in-window neighbours up to the
    // max pair distance; adaptive from 2(p+1) to n.
    std::optional<double> lower;
    std::optional<double> upper;
};

// Golden-section minimization of AICc or CV over the bandwidth. Fixed-form
// search runs on the continuous distance axis with interval tolerance
// max(0.1, 1e-4 * max_pair_distance); adaptive-form search walks the integer
// lattice and stops when no unevaluated candidate remains in the bracket.
BandwidthSearchResult optimize_bandwidth(const SpatialDataset& ds, const Formula& formula,
                                         const DistanceMatrix& dm, KernelType kernel,
                                         BandwidthForm form,
                                         const BandwidthSearchOptions& options = {});

} // namespace gwkit

#endif

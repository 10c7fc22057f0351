#ifndef GWKIT_MIXED_HPP
#define GWKIT_MIXED_HPP

#include <string>
#include <vector>

#include <armadillo>

#include "gwkit/dataset.hpp"
#include "gwkit/global_models.hpp"
#include "gwkit/gwr.hpp"
#include "gwkit/kernel.hpp"

namespace gwkit {

// Which terms keep one coefficient everywhere and which get a surface.
// Term names follow the design: "intercept" plus predictor names.
struct TermSplit {
    std::vector<std::string> global_terms;
    std::vector<std::string> local_terms;
};

struct MxGwrFit {
    std::vector<std::string> global_terms;
    std::vector<std::string> local_terms;
    KernelSpec spec;
    arma::vec beta_global;
    arma::vec se_global;
    arma::vec t_global;
    arma::vec p_global;
    arma::mat beta_local;  // n x q
    arma::mat se_local;
    arma::mat t_local;
    arma::mat p_local;
    arma::vec fitted;
    arma::vec residuals;
    double tr_s = 0.0;
    double tr_sts = 0.0;
    double enp = 0.0;
    double resid_df = 0.0;
    double rss = 0.0;
    double sigma2 = 0.0;
    double r2 = 0.0;
    double aicc = 0.0;
    std::vector<std::string> warnings;
};

// Two-stage mixed fit: the local-term smoother is projected out of the global
// columns and the response, the global coefficients come from least squares
// on those residualized columns, and the local surfaces from a weighted fit
// of what the global part leaves over. Standard errors propagate the full
// linear map from y for both parts.
MxGwrFit fit_mxgwr(const SpatialDataset& ds, const Formula& formula,
                   const DistanceMatrix& dm, const TermSplit& split,
                   const KernelSpec& spec);

} // namespace gwkit

#endif

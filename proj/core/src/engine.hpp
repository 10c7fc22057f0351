#ifndef GWKIT_SRC_ENGINE_HPP
#define GWKIT_SRC_ENGINE_HPP

// Matrix-level entry points shared between the public calibration functions
// and the backfitting loop, which works on bare design columns.

#include <optional>

#include <armadillo>

#include "gwkit/dataset.hpp"
#include "gwkit/gwr.hpp"
#include "gwkit/kernel.hpp"

namespace gwkit::detail {

double aicc_score_matrix(const arma::mat& X, const arma::vec& y, const DistanceMatrix& dm,
                         const KernelSpec& spec);

double cv_score_matrix(const arma::mat& X, const arma::vec& y, const DistanceMatrix& dm,
                       const KernelSpec& spec);

BandwidthSearchResult optimize_bandwidth_matrix(const arma::mat& X, const arma::vec& y,
                                                const DistanceMatrix& dm, KernelType kernel,
                                                BandwidthForm form, BandwidthCriterion criterion,
                                                std::optional<double> lower,
                                                std::optional<double> upper);

} // namespace gwkit::detail

#endif

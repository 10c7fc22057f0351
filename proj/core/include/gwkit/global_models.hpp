#ifndef GWKIT_GLOBAL_MODELS_HPP
#define GWKIT_GLOBAL_MODELS_HPP

#include <optional>
#include <string>
#include <vector>

#include <armadillo>

#include "gwkit/dataset.hpp"

namespace gwkit {

// Model terms: response name plus the predictor columns entering the design.
// An intercept column of ones is always prepended as term "intercept".
struct Formula {
    std::string response;
    std::vector<std::string> predictors;
};

// Builds [1 | X] for a formula against a dataset, validating column names.
arma::mat design_matrix(const SpatialDataset& ds, const Formula& formula);
std::vector<std::string> term_names(const Formula& formula);

struct SamParams {
    double partial_sill = 0.0;  // sigma^2 of the spatial component
    double range = 0.0;         // exponential correlation range (distance units)
    double nugget_prop = 0.0;   // nugget share of total variance, in [0, 1]
    double reml_loglik = 0.0;
};

struct GlobalFit {
    std::string model;  // "ols" or "sam"
    std::vector<std::string> terms;
    arma::vec beta;
    arma::vec se;
    arma::vec tvalues;
    arma::vec pvalues;
    arma::vec fitted;
    arma::vec residuals;
    double rss = 0.0;
    double sigma2 = 0.0;  // rss / (n - p)
    double r2 = 0.0;
    double aicc = 0.0;
    double f_statistic = 0.0;  // overall regression F (ols only)
    double f_pvalue = 1.0;
    bool degenerate = false;   // rss ~ 0, inference meaningless
    std::vector<std::string> warnings;
    std::optional<SamParams> sam;
};

// Ordinary least squares with classical standard errors. Rank deficiency
// throws CollinearityError naming the dependent columns.
GlobalFit fit_ols(const SpatialDataset& ds, const Formula& formula);

// Spatially autocorrelated error model: y = Xb + e with
// cov(e) = sigma^2 [ (1-nu) exp(-H/phi) + nu I ]. Parameters by profiled
// REML over a log-spaced range grid crossed with nugget proportions,
// refined from the best cell by Nelder-Mead.
struct SamOptions {
    bool nugget = true;                      // estimate nu (off pins nu = 0)
    std::optional<double> fixed_nugget;      // pin nu (overrides `nugget`)
    std::optional<double> fixed_range;       // pin phi
    std::optional<std::pair<double, double>> range_bounds;  // grid bounds override
    std::size_t range_grid = 24;
    double nugget_grid_step = 0.05;
    double rel_tol = 1e-8;
    std::size_t max_iter = 500;
};

GlobalFit fit_sam(const SpatialDataset& ds, const Formula& formula,
                  const DistanceMatrix& dm, const SamOptions& options = {});

// Corrected Akaike score shared by every model in the toolkit:
//   n ln(rss/n) + n ln(2 pi) + n (n + tr_s) / (n - 2 - tr_s)
// Throws SaturatedModelError when tr_s >= n - 2.
double aicc(double rss, std::size_t n, double tr_s);

} // namespace gwkit

#endif

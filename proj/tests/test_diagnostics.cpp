#include "doctest.h"

#include <cmath>

#include "gwkit/dataset.hpp"
#include "gwkit/diagnostics.hpp"
#include "gwkit/errors.hpp"
#include "gwkit/global_models.hpp"
#include "test_helpers.hpp"

using namespace gwkit;
using gwkit_test::default_formula;
using gwkit_test::load_fixture;

namespace {

arma::mat design_of(const SpatialDataset& ds) {
    Formula f = gwkit_test::default_formula(ds);
    return design_matrix(ds, f);
}

} // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("knn weights: k neighbours, zero diagonal, unit row sums") {
    SpatialDataset ds = load_fixture("flat100.csv");
    DistanceMatrix dm(ds.coords());
    WeightMatrix wm = build_weight_matrix(dm, WeightScheme::knn(8));

    CHECK(wm.islands.empty());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        CHECK(wm.w(i, i) == 0.0);
        arma::rowvec row(wm.w.row(i));
        CHECK(arma::accu(row != 0.0) == 8);
        CHECK(arma::accu(row) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(wm.s0 == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("distance band and inverse distance schemes") {
    SpatialDataset ds = load_fixture("flat100.csv");
    DistanceMatrix dm(ds.coords());

    // grid spacing is 111.11; a band of 120 keeps rook neighbours only
    WeightMatrix band = build_weight_matrix(dm, WeightScheme::distance_band(120.0, false));
    arma::rowvec corner(band.w.row(0));
    CHECK(arma::accu(corner != 0.0) == 2);
    arma::rowvec interior(band.w.row(11));
    CHECK(arma::accu(interior != 0.0) == 4);

    WeightMatrix idw = build_weight_matrix(dm, WeightScheme::inverse_distance(1.0, false));
    CHECK(idw.w(0, 1) == doctest::Approx(1.0 / dm.at(0, 1)).epsilon(1e-12));
    CHECK(idw.w(0, 99) > 0.0);

    // a band too narrow stranding every point flags islands
    WeightMatrix none = build_weight_matrix(dm, WeightScheme::distance_band(10.0));
    CHECK(none.islands.size() == 100);
    CHECK(!none.warnings.empty());
}

TEST_CASE("raw autocorrelation statistic matches the reference") {
    SpatialDataset ds = load_fixture("flat100.csv");
    DistanceMatrix dm(ds.coords());
    WeightMatrix wm = build_weight_matrix(dm, WeightScheme::knn(8));
    MoranResult res = morans_i(ds.response(), wm);

    CHECK(res.i == doctest::Approx(0.04778261850484891).epsilon(1e-12));
    CHECK(res.expected == doctest::Approx(-0.010101010101010102).epsilon(1e-12));
    CHECK(res.variance == doctest::Approx(0.0022141074587256706).epsilon(1e-12));
    CHECK(res.z == doctest::Approx(1.2301452694142316).epsilon(1e-12));
    CHECK(res.pvalue == doctest::Approx(0.218642710552302).epsilon(1e-10));
    CHECK(!res.permutation_pvalue.has_value());
}

TEST_CASE("the statistic ignores weight scaling") {
    SpatialDataset ds = load_fixture("flat100.csv");
    DistanceMatrix dm(ds.coords());
    WeightMatrix wm = build_weight_matrix(dm, WeightScheme::knn(8));
    MoranResult base = morans_i(ds.response(), wm);

    WeightMatrix scaled = wm;
    scaled.w *= 7.0;
    scaled.s0 *= 7.0;
    MoranResult res = morans_i(ds.response(), scaled);
    CHECK(res.i == doctest::Approx(base.i).epsilon(1e-12));
    CHECK(res.variance == doctest::Approx(base.variance).epsilon(1e-12));

    // binary knn(8) has constant row sums here, so row standardization is
    // itself a uniform rescale and the statistic is unchanged
    WeightMatrix binary = build_weight_matrix(dm, WeightScheme::knn(8, false));
    MoranResult bin = morans_i(ds.response(), binary);
    CHECK(bin.i == doctest::Approx(base.i).epsilon(1e-12));
}

TEST_CASE("residual-adjusted moments match the reference") {
    SpatialDataset ds = load_fixture("flat100.csv");
    DistanceMatrix dm(ds.coords());
    WeightMatrix wm = build_weight_matrix(dm, WeightScheme::knn(8));
    GlobalFit ols = fit_ols(ds, default_formula(ds));

    MoranOptions opt;
    opt.mode = MoranMode::ResidualAdjusted;
    opt.design = design_of(ds);
    MoranResult res = morans_i(ols.residuals, wm, opt);

    CHECK(res.i == doctest::Approx(0.024106727495619883).epsilon(1e-12));
    CHECK(res.expected == doctest::Approx(-0.010820185113698847).epsilon(1e-12));
    CHECK(res.variance == doctest::Approx(0.002234528944679247).epsilon(1e-12));
    CHECK(res.z == doctest::Approx(0.7388685909508388).epsilon(1e-10));
    CHECK(res.pvalue == doctest::Approx(0.45998679641510065).epsilon(1e-10));

    MoranOptions missing;
    missing.mode = MoranMode::ResidualAdjusted;
    CHECK_THROWS_AS(morans_i(ols.residuals, wm, missing), ContractError);
}

TEST_CASE("permutation reference distribution is seeded and honest") {
    SpatialDataset ds = load_fixture("flat100.csv");
    DistanceMatrix dm(ds.coords());
    WeightMatrix wm = build_weight_matrix(dm, WeightScheme::knn(8));
    MoranOptions opt;
    opt.permutations = 199;
    opt.seed = 17;

    MoranResult a = morans_i(ds.response(), wm, opt);
    MoranResult b = morans_i(ds.response(), wm, opt);
    REQUIRE(a.permutation_pvalue.has_value());
    CHECK(*a.permutation_pvalue == *b.permutation_pvalue);
    // the pseudo p-value floor is (1+1)/(perms+1) and the cap is 1
    CHECK(*a.permutation_pvalue >= 2.0 / 200.0);
    CHECK(*a.permutation_pvalue <= 1.0);

    opt.seed = 18;
    MoranResult c = morans_i(ds.response(), wm, opt);
    CHECK(std::isfinite(*c.permutation_pvalue));
    // analytic and permutation p should broadly agree on flat data
    CHECK(std::abs(*a.permutation_pvalue - a.pvalue) < 0.25);
}

TEST_CASE("degenerate inputs for the statistic") {
    SpatialDataset ds = load_fixture("flat100.csv");
    DistanceMatrix dm(ds.coords());
    WeightMatrix wm = build_weight_matrix(dm, WeightScheme::knn(8));
    arma::vec constant(ds.n(), arma::fill::value(3.0));
    CHECK_THROWS_AS(morans_i(constant, wm), DegenerateInputError);
}

TEST_CASE("collinearity summary matches the reference") {
    SpatialDataset ds = load_fixture("collin50.csv", "response", {"x1", "x2", "x3"});
    Formula f = default_formula(ds);
    CollinearityReport rep = global_collinearity(ds, f);

    REQUIRE(rep.vif.n_elem == 3);
    CHECK(rep.vif(0) == doctest::Approx(34.290120048238514).epsilon(1e-9));
    CHECK(rep.vif(1) == doctest::Approx(17.10498306203931).epsilon(1e-9));
    CHECK(rep.vif(2) == doctest::Approx(47.8207800824817).epsilon(1e-9));
    CHECK(rep.correlations(0, 2) == doctest::Approx(0.8021290576028335).epsilon(1e-10));
    CHECK(rep.correlations(1, 2) == doctest::Approx(0.5339953882917015).epsilon(1e-10));
    CHECK(rep.condition_number == doctest::Approx(13.882329547697568).epsilon(1e-10));

    // variance decomposition: each term's proportions sum to one, and the
    // weakest component carries the near-dependency
    REQUIRE(rep.vdp.n_rows == 4);  // components
    REQUIRE(rep.vdp.n_cols == 4);  // intercept + three terms
    for (arma::uword k = 0; k < 4; ++k)
        CHECK(arma::accu(rep.vdp.col(k)) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rep.vdp(3, 1) == doctest::Approx(0.9865988037103972).epsilon(1e-9));
    CHECK(rep.vdp(3, 2) == doctest::Approx(0.9570555611733583).epsilon(1e-9));
    CHECK(rep.vdp(3, 3) == doctest::Approx(0.9942833454686693).epsilon(1e-9));

    // vif over 10 and |r| over 0.8 both get named
    bool vif_named = false, corr_named = false;
    for (const auto& flag : rep.flags) {
        if (flag.find("x3") != std::string::npos && flag.find("VIF") != std::string::npos)
            vif_named = true;
        if (flag.find("correlation") != std::string::npos) corr_named = true;
    }
    CHECK(vif_named);
    CHECK(corr_named);
}

TEST_CASE("a duplicated column blows the diagnostics up, finitely") {
    SpatialDataset base = load_fixture("flat100.csv");
    arma::mat preds(base.n(), 3);
    preds.col(0) = base.column("a");
    preds.col(1) = base.column("b");
    preds.col(2) = base.column("a");
    SpatialDataset ds(base.coords(), base.response(), preds, "response",
                      {"a", "b", "a2"});
    Formula f;
    f.response = "response";
    f.predictors = {"a", "b", "a2"};

    CollinearityReport rep = global_collinearity(ds, f);
    CHECK(std::isinf(rep.vif(0)));
    CHECK(std::isinf(rep.vif(2)));
    CHECK(std::isinf(rep.condition_number));
    CHECK(!rep.flags.empty());
    // proportions still sum to one for every term
    for (arma::uword k = 0; k < rep.vdp.n_cols; ++k)
        CHECK(arma::accu(rep.vdp.col(k)) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("local collinearity at a global window equals the global summary") {
    SpatialDataset ds = load_fixture("collin50.csv", "response", {"x1", "x2", "x3"});
    DistanceMatrix dm(ds.coords());
    Formula f = default_formula(ds);
    CollinearityReport global = global_collinearity(ds, f);

    KernelSpec spec{KernelType::Boxcar, Bandwidth::adaptive(static_cast<double>(ds.n()))};
    LocalCollinearity local = local_collinearity(ds, f, dm, spec);

    REQUIRE(local.vif.n_rows == ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (int k = 0; k < 3; ++k)
            CHECK(local.vif(i, k) == doctest::Approx(global.vif(k)).epsilon(1e-8));
        CHECK(local.correlations(0, 2, i) ==
              doctest::Approx(global.correlations(0, 2)).epsilon(1e-8));
    }
}

TEST_CASE("narrow windows raise local dependence above the global level") {
    SpatialDataset ds = load_fixture("collin50.csv", "response", {"x1", "x2", "x3"});
    DistanceMatrix dm(ds.coords());
    Formula f = default_formula(ds);
    CollinearityReport global = global_collinearity(ds, f);
    KernelSpec spec{KernelType::Bisquare, Bandwidth::adaptive(15)};
    LocalCollinearity local = local_collinearity(ds, f, dm, spec);
    CHECK(local.condition_number.max() > global.condition_number);
}

TEST_CASE("standardized residuals flag gross outliers only") {
    SpatialDataset ds = load_fixture("flat100.csv");
    GlobalFit ols = fit_ols(ds, default_formula(ds));

    ResidualSource clean{ols.residuals, ols.sigma2, std::nullopt};
    StandardizedResiduals sr = standardized_residuals(clean);
    CHECK(sr.values.n_elem == ds.n());
    CHECK(sr.flagged.empty());
    CHECK(sr.excluded.empty());

    // inflate one residual to five sigma
    ResidualSource spiked = clean;
    spiked.residuals(42) = 5.0 * std::sqrt(ols.sigma2);
    StandardizedResiduals hit = standardized_residuals(spiked);
    REQUIRE(hit.flagged.size() == 1);
    CHECK(hit.flagged[0] == 42);

    // leverage-aware studentization divides by sqrt(1 - h)
    arma::vec hat(ds.n(), arma::fill::value(0.5));
    ResidualSource lev{clean.residuals, ols.sigma2, hat};
    StandardizedResiduals stud = standardized_residuals(lev);
    CHECK(stud.values(0) ==
          doctest::Approx(clean.residuals(0) / std::sqrt(ols.sigma2 * 0.5)).epsilon(1e-12));

    // leverage pinned at one excludes the point
    hat(7) = 1.0;
    ResidualSource bad{clean.residuals, ols.sigma2, hat};
    StandardizedResiduals excl = standardized_residuals(bad);
    REQUIRE(excl.excluded.size() == 1);
    CHECK(excl.excluded[0] == 7);
    CHECK(!excl.warnings.empty());
}

}

#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "gwkit/dataset.hpp"
#include "gwkit/errors.hpp"

using namespace gwkit;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& body) {
        path = std::string(GWKIT_TEST_DIR) + "/.tmp_dataset_case.csv";
        std::ofstream out(path);
        out << body;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

const char* kGood =
    "x,y,stn,soc,clay\n"
    "0,0,1.0,2.0,10.0\n"
    "1,0,2.0,4.0,20.0\n"
    "0,1,3.0,6.0,30.0\n"
    "1,1,4.0,8.0,40.0\n"
    "2,2,5.0,10.0,50.0\n";

CsvSchema soil_schema() {
    CsvSchema s;
    s.response = "stn";
    s.predictors = {"soc", "clay"};
    return s;
}

} // namespace

TEST_SUITE("dataset") {

TEST_CASE("csv loads named columns in row order") {
    TempCsv f(kGood);
    SpatialDataset ds = load_csv(f.path, soil_schema());
    CHECK(ds.n() == 5);
    CHECK(ds.n_predictors() == 2);
    CHECK(ds.response_name() == "stn");
    CHECK(ds.response()(0) == 1.0);
    CHECK(ds.response()(4) == 5.0);
    CHECK(ds.coords()(4, 0) == 2.0);
    CHECK(ds.column("soc")(2) == 6.0);
    CHECK(ds.predictor_index("clay") == 1);
    CHECK(ds.has_column("stn"));
    CHECK(!ds.has_column("silt"));
    CHECK_THROWS_AS(ds.column("silt"), SchemaError);
}

TEST_CASE("schema errors name the problem") {
    TempCsv f(kGood);
    CsvSchema missing = soil_schema();
    missing.predictors = {"soc", "ph"};
    CHECK_THROWS_WITH_AS(load_csv(f.path, missing),
                         doctest::Contains("no column named 'ph'"), SchemaError);

    CsvSchema no_response;
    no_response.predictors = {"soc"};
    CHECK_THROWS_AS(load_csv(f.path, no_response), SchemaError);

    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", soil_schema()), IoError);
}

TEST_CASE("duplicated header names are ambiguous") {
    TempCsv f("x,y,stn,soc,soc\n0,0,1,2,3\n1,1,2,3,4\n0,1,3,4,5\n1,0,4,5,6\n");
    CsvSchema s;
    s.response = "stn";
    s.predictors = {"soc"};
    CHECK_THROWS_WITH_AS(load_csv(f.path, s), doctest::Contains("more than once"),
                         SchemaError);
}

TEST_CASE("unparseable and missing cells are reported by row") {
    TempCsv f("x,y,stn,soc\n0,0,1.0,2.0\n1,0,oops,4.0\n0,1,3.0,6.0\n1,1,4.0,8.0\n");
    CsvSchema s;
    s.response = "stn";
    s.predictors = {"soc"};
    CHECK_THROWS_WITH_AS(load_csv(f.path, s), doctest::Contains("row 3"), ParseError);

    TempCsv g("x,y,stn,soc\n0,0,1.0,2.0\n1,0,2.0\n");
    CHECK_THROWS_AS(load_csv(g.path, s), ParseError);
}

TEST_CASE("too few rows for a fit") {
    TempCsv f("x,y,stn,soc\n0,0,1.0,2.0\n1,0,2.0,4.0\n");
    CsvSchema s;
    s.response = "stn";
    s.predictors = {"soc"};
    CHECK_THROWS_AS(load_csv(f.path, s), InsufficientDataError);
}

TEST_CASE("natural log and square root transforms") {
    TempCsv f(kGood);
    SpatialDataset ds = load_csv(f.path, soil_schema());
    ds.apply_transform("stn", TransformKind::NaturalLog);
    ds.apply_transform("clay", TransformKind::Sqrt);
    CHECK(ds.response()(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(ds.response()(4) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
    CHECK(ds.column("clay")(4) == doctest::Approx(std::sqrt(50.0)).epsilon(1e-15));
    REQUIRE(ds.transform_log().size() == 2);
    CHECK(ds.transform_log()[0].variable == "stn");
    CHECK(ds.transform_log()[0].kind == TransformKind::NaturalLog);
}

TEST_CASE("transform domain violations name the rows") {
    TempCsv f("x,y,stn,soc\n0,0,1.0,2.0\n1,0,-2.0,4.0\n0,1,3.0,6.0\n1,1,4.0,8.0\n");
    CsvSchema s;
    s.response = "stn";
    s.predictors = {"soc"};
    SpatialDataset ds = load_csv(f.path, s);
    CHECK_THROWS_WITH_AS(ds.apply_transform("stn", TransformKind::NaturalLog),
                         doctest::Contains("data row 2"), TransformError);
    CHECK_THROWS_AS(ds.apply_transform("stn", TransformKind::Sqrt), TransformError);
    // zero is out of log's domain but fine for sqrt
    TempCsv g("x,y,stn,soc\n0,0,0.0,2.0\n1,0,2.0,4.0\n0,1,3.0,6.0\n1,1,4.0,8.0\n");
    SpatialDataset dz = load_csv(g.path, s);
    CHECK_THROWS_AS(dz.apply_transform("stn", TransformKind::NaturalLog), TransformError);
    CHECK_NOTHROW(dz.apply_transform("stn", TransformKind::Sqrt));
}

TEST_CASE("centering is recorded and invertible") {
    TempCsv f(kGood);
    SpatialDataset ds = load_csv(f.path, soil_schema());
    arma::vec before = ds.column("soc");
    ScalingRecord rec = ds.center({"soc", "stn"});
    CHECK(std::abs(arma::mean(ds.column("soc"))) < 1e-12);
    CHECK(std::abs(arma::mean(ds.response())) < 1e-12);
    CHECK(rec.means(0) == doctest::Approx(6.0));
    ds.uncenter(rec);
    CHECK(arma::approx_equal(ds.column("soc"), before, "absdiff", 1e-12));

    ScalingRecord std_rec = ds.center({"soc"}, true);
    CHECK(arma::stddev(ds.column("soc")) == doctest::Approx(1.0).epsilon(1e-12));
    ds.uncenter(std_rec);
    CHECK(arma::approx_equal(ds.column("soc"), before, "absdiff", 1e-12));
}

TEST_CASE("replaying a transform log reproduces the working data") {
    TempCsv f(kGood);
    SpatialDataset a = load_csv(f.path, soil_schema());
    a.apply_transform("stn", TransformKind::NaturalLog);
    a.apply_transform("clay", TransformKind::Sqrt);

    SpatialDataset b = load_csv(f.path, soil_schema());
    b.replay(a.transform_log());
    CHECK(arma::approx_equal(a.response(), b.response(), "absdiff", 0.0));
    CHECK(arma::approx_equal(a.predictors(), b.predictors(), "absdiff", 0.0));
}

TEST_CASE("permutation reorders rows consistently") {
    TempCsv f(kGood);
    SpatialDataset ds = load_csv(f.path, soil_schema());
    arma::uvec order = {4, 3, 2, 1, 0};
    SpatialDataset rev = ds.permuted(order);
    CHECK(rev.response()(0) == 5.0);
    CHECK(rev.coords()(0, 0) == 2.0);
    CHECK(rev.column("soc")(4) == 2.0);
    CHECK(rev.n() == ds.n());
}

TEST_CASE("transform names round-trip") {
    for (const char* name : {"none", "log", "sqrt", "center", "standardize"})
        CHECK(transform_name(transform_from_name(name)) == std::string(name));
    CHECK_THROWS_AS(transform_from_name("boxcox"), ContractError);
}

}

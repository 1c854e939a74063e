#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cellcal/evaluate.hpp"

using namespace cellcal;

TEST_CASE("mape and rmse hand values") {
    CHECK(mape({1.0, 2.0}, {2.0, 4.0}) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(rmse({1.0, 2.0}, {2.0, 4.0}) ==
          doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
    CHECK(mape({3.0, 3.0}, {3.0, 3.0}) == doctest::Approx(0.0));
    CHECK(rmse({3.0, 3.0}, {3.0, 3.0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(mape({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(rmse({}, {}), std::invalid_argument);
}

TEST_CASE("near-zero observations are masked from MAPE but not RMSE") {
    // The zero sample is below 1e-3 of the channel maximum, so only the other
    // two samples enter the MAPE.
    const std::vector<double> obs = {0.0, 2.0, 4.0};
    const std::vector<double> sim = {1.0, 1.0, 2.0};
    CHECK(mape(sim, obs) == doctest::Approx(50.0).epsilon(1e-12));
    const double expected_rmse = std::sqrt((1.0 + 1.0 + 4.0) / 3.0);
    CHECK(rmse(sim, obs) == doctest::Approx(expected_rmse).epsilon(1e-12));
    CHECK_THROWS_AS(mape({1.0}, {0.0}), std::domain_error);
}

TEST_CASE("parameter error in log space") {
    const std::vector<std::string> keys = {"a", "b"};
    const std::map<std::string, double> star = {{"a", 2e-6}, {"b", 5000.0}};

    CHECK(parameter_error(star, star, keys).normalized == doctest::Approx(0.0));

    std::map<std::string, double> hat = star;
    hat["a"] = 2.0 * star.at("a");
    const ParameterError e = parameter_error(hat, star, keys);
    CHECK(e.log_ratios.at("a") == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(e.log_ratios.at("b") == doctest::Approx(0.0));
    CHECK(e.normalized ==
          doctest::Approx(std::log(2.0) / std::sqrt(2.0)).epsilon(1e-12));

    // Symmetric in its arguments.
    CHECK(parameter_error(star, hat, keys).normalized ==
          doctest::Approx(e.normalized).epsilon(1e-12));

    // Unit invariance: rescaling a parameter and both values changes nothing.
    std::map<std::string, double> hat_mm = hat, star_mm = star;
    hat_mm["a"] *= 1000.0;
    star_mm["a"] *= 1000.0;
    CHECK(parameter_error(hat_mm, star_mm, keys).normalized ==
          doctest::Approx(e.normalized).epsilon(1e-12));

    CHECK_THROWS_AS(parameter_error({{"a", -1.0}}, {{"a", 1.0}}, {"a"}),
                    std::domain_error);
    CHECK_THROWS_AS(parameter_error(hat, star, {"missing"}), ValidationError);
}

TEST_CASE("within-case correlation on synthetic sequences") {
    std::vector<CorrelationPoint> co, anti, flat;
    for (int i = 0; i < 6; ++i) {
        co.push_back({i + 1, 10.0 - i, 1.0 - 0.1 * i});
        anti.push_back({i + 1, 10.0 - i, 0.1 * i});
        flat.push_back({i + 1, 5.0, 1.0 - 0.1 * i});
    }
    const CaseCorrelation c = within_case_correlation(co);
    REQUIRE(c.spearman_rho.has_value());
    CHECK(*c.spearman_rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*c.pearson_r == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.monotone_co_decrease);

    const CaseCorrelation a = within_case_correlation(anti);
    CHECK(*a.spearman_rho == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_FALSE(a.monotone_co_decrease);

    // Constant sequences have undefined coefficients, not zero.
    const CaseCorrelation f = within_case_correlation(flat);
    CHECK_FALSE(f.pearson_r.has_value());
    CHECK_FALSE(f.spearman_rho.has_value());

    CHECK_THROWS_AS(within_case_correlation({{1, 1.0, 1.0}, {2, 2.0, 2.0}}),
                    std::invalid_argument);
}

TEST_CASE("correlation CSV has the raw columns") {
    const std::string csv = correlation_points_to_csv({{1, 2.5, 0.5}});
    CHECK(csv.rfind("round,total_mape,param_error\n", 0) == 0);
    CHECK(csv.find("1,2.5,0.5") != std::string::npos);
}

TEST_CASE("held-out validation is exact for identical parameters") {
    const ParameterSet star = default_physical_params();
    const std::vector<Protocol> protocols = {make_cc_discharge(0.2, star),
                                             make_cc_discharge(1.0, star)};
    const std::vector<HeldOutEntry> rows = held_out_validation(star, protocols, star);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK_FALSE(row.failed);
        CHECK(row.voltage_mape_pct == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("suite aggregation groups and reports missing tasks") {
    BenchmarkManifest manifest;
    manifest.suite_seed = 1;
    for (const char* id : {"extreme__default__r1__1C", "extreme__default__r2__1C"}) {
        BenchmarkTask t;
        t.id = id;
        t.base = "default";
        t.c_rate = 1.0;
        manifest.tasks.push_back(t);
    }

    EvalResult only;
    only.task_id = "extreme__default__r1__1C";
    only.method = "scripted";
    only.final_total_mape = 3.5;
    only.final_voltage_rmse_v = 0.02;
    only.total_s = 4.0;

    const SuiteReport report = aggregate_report({only}, manifest);
    REQUIRE(report.rows.size() == 1);
    const SuiteRow& row = report.rows.front();
    CHECK(row.mode == "extreme");
    CHECK(row.base == "default");
    CHECK(row.method == "scripted");
    CHECK(row.n == 1);
    CHECK(row.failures == 0);
    CHECK(*row.mean_total_mape == doctest::Approx(3.5));
    CHECK(*row.std_total_mape == doctest::Approx(0.0));
    REQUIRE(report.missing_tasks.size() == 1);
    CHECK(report.missing_tasks.front() == "extreme__default__r2__1C");

    const std::string csv = suite_report_to_csv(report);
    CHECK(csv.find("extreme,default,1,scripted,1,0,") != std::string::npos);
    CHECK(csv.find("extreme__default__r2__1C") != std::string::npos);
    CHECK(suite_report_to_csv(aggregate_report({only}, manifest)) == csv);

    const std::string text = suite_report_to_text(report);
    CHECK(text.find("total MAPE [%]") != std::string::npos);
    CHECK(text.find("missing tasks:") != std::string::npos);
}

TEST_CASE("failed results count as failures, not statistics") {
    BenchmarkManifest manifest;
    BenchmarkTask t;
    t.id = "regular__default__c1__1C";
    t.base = "default";
    t.c_rate = 1.0;
    manifest.tasks.push_back(t);

    EvalResult bad;
    bad.task_id = t.id;
    bad.method = "llm";
    bad.failed = true;
    const SuiteReport report = aggregate_report({bad}, manifest);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows.front().failures == 1);
    CHECK_FALSE(report.rows.front().mean_total_mape.has_value());
    CHECK(report.missing_tasks.empty());
}

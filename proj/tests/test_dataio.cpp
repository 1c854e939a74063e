#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "cellcal/dataio.hpp"

using namespace cellcal;

namespace {
const std::string kFixture =
    std::string(CELLCAL_DATA_DIR) + "/fixtures/cycling_small.csv";
}

TEST_CASE("the shipped three-row fixture parses") {
    const std::vector<CyclingRecord> records = load_cycling_csv(kFixture);
    REQUIRE(records.size() == 3);
    CHECK(records[0].time_s == doctest::Approx(0.0));
    CHECK(records[0].current_a == doctest::Approx(1.5));
    CHECK(records[0].voltage_v == doctest::Approx(4.2));
    CHECK(records[2].current_a == doctest::Approx(-1.5));
    CHECK_FALSE(records[0].cycle.has_value());
}

TEST_CASE("gzip input inflates to the same records") {
    const std::vector<CyclingRecord> plain = load_cycling_csv(kFixture);
    const std::vector<CyclingRecord> zipped = load_cycling_csv(kFixture + ".gz");
    REQUIRE(zipped.size() == plain.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        CHECK(zipped[i].time_s == plain[i].time_s);
        CHECK(zipped[i].current_a == plain[i].current_a);
        CHECK(zipped[i].voltage_v == plain[i].voltage_v);
    }
}

TEST_CASE("missing columns are named in the error") {
    const std::string csv = "time_s,current_a\n0,1\n";
    try {
        (void)parse_cycling_csv(csv);
        FAIL("expected a schema error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("voltage_v") != std::string::npos);
    }
}

TEST_CASE("declared units convert values") {
    const std::string csv = "t,i,v\n0,1500,4200\n60,-1500,3900\n";
    ColumnMap columns;
    columns.time = {"t", "s"};
    columns.current = {"i", "mA"};
    columns.voltage = {"v", "mV"};
    const std::vector<CyclingRecord> records = parse_cycling_csv(csv, columns);
    REQUIRE(records.size() == 2);
    CHECK(records[0].current_a == doctest::Approx(1.5));
    CHECK(records[0].voltage_v == doctest::Approx(4.2));
    CHECK(records[1].time_s == doctest::Approx(60.0));
    CHECK_THROWS_AS(unit_scale("furlongs"), DataError);
}

TEST_CASE("unparseable rows report their line number") {
    const std::string csv = "time_s,current_a,voltage_v\n0,1,4.2\nx,1,4.1\n";
    try {
        (void)parse_cycling_csv(csv);
        FAIL("expected a row error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("explicit cycle indices group records") {
    std::string csv = "time_s,current_a,voltage_v,cycle\n";
    double t = 0.0;
    for (int cycle = 1; cycle <= 3; ++cycle) {
        for (int i = 0; i < 4; ++i) {
            const double current = i < 2 ? 2.0 : -2.0;
            csv += std::to_string(t) + "," + std::to_string(current) + ",3.8," +
                   std::to_string(cycle) + "\n";
            t += 10.0;
        }
    }
    ColumnMap columns;
    columns.cycle_column = "cycle";
    const CycleSeries series = segment_cycles(parse_cycling_csv(csv, columns));
    REQUIRE(series.cycles.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(series.cycles[static_cast<std::size_t>(i)].cycle == i + 1);
        CHECK(series.cycles[static_cast<std::size_t>(i)].discharge_capacity_ah > 0.0);
        // Cycle traces are rebased to local time and flipped to
        // discharge-positive.
        CHECK(series.cycles[static_cast<std::size_t>(i)].trace.time_s.front() == 0.0);
        CHECK(series.cycles[static_cast<std::size_t>(i)].trace.current_a.front() ==
              doctest::Approx(-2.0));
    }
}

TEST_CASE("square-wave current splits into equal cycles") {
    // Two charge/discharge periods plus a trailing charge phase, 20 samples
    // each, 1 s spacing.
    std::vector<CyclingRecord> records;
    double t = 0.0;
    for (int period = 0; period < 2; ++period) {
        for (int i = 0; i < 20; ++i) {
            records.push_back({t, 1.0, 4.0, std::nullopt, std::nullopt});
            t += 1.0;
        }
        for (int i = 0; i < 20; ++i) {
            records.push_back({t, -1.0, 3.5, std::nullopt, std::nullopt});
            t += 1.0;
        }
    }
    for (int i = 0; i < 20; ++i) {
        records.push_back({t, 1.0, 4.0, std::nullopt, std::nullopt});
        t += 1.0;
    }
    const CycleSeries series = segment_cycles(records);
    REQUIRE(series.cycles.size() == 2);
    CHECK(series.cycles[0].discharge_capacity_ah ==
          doctest::Approx(series.cycles[1].discharge_capacity_ah).epsilon(1e-9));
    CHECK(series.cycles[0].discharge_capacity_ah > 0.0);
}

TEST_CASE("per-cycle capacities sum to the file total") {
    std::vector<CyclingRecord> records;
    double t = 0.0;
    for (int period = 0; period < 3; ++period) {
        for (int i = 0; i < 15; ++i) {
            records.push_back({t, 1.2, 4.0, std::nullopt, std::nullopt});
            t += 2.0;
        }
        for (int i = 0; i < 25; ++i) {
            records.push_back({t, -0.8 - 0.01 * i, 3.5, std::nullopt, std::nullopt});
            t += 2.0;
        }
    }
    const CycleSeries series = segment_cycles(records);
    double per_cycle_sum = 0.0;
    for (const auto& c : series.cycles) per_cycle_sum += c.discharge_capacity_ah;
    const double total = total_discharge_ah(records);
    CHECK(std::abs(per_cycle_sum - total) <= 1e-6 * total);
}

TEST_CASE("data that never discharges is an error") {
    std::vector<CyclingRecord> records;
    for (int i = 0; i < 10; ++i) {
        records.push_back({static_cast<double>(i), 1.0, 4.0, std::nullopt,
                           std::nullopt});
    }
    CHECK_THROWS_AS(segment_cycles(records), DataError);
    CHECK_THROWS_AS(segment_cycles({}), DataError);
}

TEST_CASE("loading is idempotent and order preserving") {
    const std::vector<CyclingRecord> a = load_cycling_csv(kFixture);
    const std::vector<CyclingRecord> b = load_cycling_csv(kFixture);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].time_s == b[i].time_s);
        CHECK(a[i].current_a == b[i].current_a);
    }
    CHECK(a.front().time_s < a.back().time_s);
}

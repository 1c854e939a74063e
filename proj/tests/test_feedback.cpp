#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cellcal/feedback.hpp"

using namespace cellcal;

namespace {

// Constant-current discharge ramp with n samples over duration_s.
SimulationTrace make_ramp(double v0, double v1, double current_a, double duration_s,
                          int n = 51) {
    SimulationTrace t;
    for (int i = 0; i < n; ++i) {
        const double f = static_cast<double>(i) / (n - 1);
        t.time_s.push_back(f * duration_s);
        t.voltage_v.push_back(v0 + f * (v1 - v0));
        t.current_a.push_back(current_a);
        t.capacity_ah.push_back(current_a * f * duration_s / 3600.0);
        t.step_index.push_back(0);
    }
    t.step_durations_s = {duration_s};
    t.event = TerminationEvent::VoltageCutoff;
    return t;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("identical traces give zero residuals") {
    const SimulationTrace t = make_ramp(4.1, 3.0, 2.0, 3600.0);
    const FeedbackPackage pkg = build_feedback(t, t, {}, {}, 1, "");
    REQUIRE(pkg.residuals.voltage_mape.has_value());
    CHECK(*pkg.residuals.voltage_mape == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(*pkg.residuals.current_mape == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(*pkg.residuals.voltage_rmse == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(*pkg.residuals.total_mape == doctest::Approx(0.0).epsilon(1e-12));
    REQUIRE(!pkg.events.empty());
    CHECK(pkg.events.front() == "simulation_success");
}

TEST_CASE("a constant relative voltage offset gives that exact MAPE") {
    const SimulationTrace target = make_ramp(4.0, 3.0, 2.0, 3600.0);
    SimulationTrace sim = target;
    for (auto& v : sim.voltage_v) v *= 1.1;
    const FeedbackPackage pkg = build_feedback(sim, target, {}, {}, 1, "");
    REQUIRE(pkg.residuals.voltage_mape.has_value());
    CHECK(*pkg.residuals.voltage_mape == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(*pkg.residuals.current_mape == doctest::Approx(0.0).epsilon(1e-12));
    // Unit channel weights: the total is the sum over present channels.
    CHECK(*pkg.residuals.total_mape ==
          doctest::Approx(*pkg.residuals.voltage_mape + *pkg.residuals.current_mape +
                          *pkg.residuals.capacity_mape)
              .epsilon(1e-12));
}

TEST_CASE("channel weights scale the total") {
    const SimulationTrace target = make_ramp(4.0, 3.0, 2.0, 3600.0);
    SimulationTrace sim = target;
    for (auto& v : sim.voltage_v) v *= 1.05;
    LossConfig loss;
    loss.weight_voltage = 2.0;
    const FeedbackPackage pkg = build_feedback(sim, target, {}, loss, 1, "");
    CHECK(*pkg.residuals.total_mape ==
          doctest::Approx(2.0 * *pkg.residuals.voltage_mape +
                          *pkg.residuals.current_mape + *pkg.residuals.capacity_mape)
              .epsilon(1e-12));
}

TEST_CASE("features are simulated minus target") {
    const SimulationTrace target = make_ramp(4.0, 3.0, 2.0, 3600.0);
    SimulationTrace sim = make_ramp(4.0, 2.9, 2.0, 3600.0);
    const FeedbackPackage pkg = build_feedback(sim, target, {}, {}, 1, "");
    REQUIRE(pkg.features.end_voltage_delta_v.has_value());
    CHECK(*pkg.features.end_voltage_delta_v == doctest::Approx(-0.1).epsilon(1e-9));
    REQUIRE(pkg.features.capacity_delta_pct.has_value());
    CHECK(*pkg.features.capacity_delta_pct == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("step count mismatch falls back to time alignment") {
    const SimulationTrace target = make_ramp(4.0, 3.0, 2.0, 3600.0);
    SimulationTrace sim = make_ramp(4.0, 3.0, 2.0, 3600.0);
    // Split the simulated run into two steps.
    for (std::size_t i = sim.step_index.size() / 2; i < sim.step_index.size(); ++i) {
        sim.step_index[i] = 1;
    }
    sim.step_durations_s = {1800.0, 1800.0};
    const AlignedTraces aligned = align_traces(sim, target);
    CHECK(aligned.step_mismatch);
    CHECK(std::find(aligned.events.begin(), aligned.events.end(), "step_mismatch") !=
          aligned.events.end());
    const FeedbackPackage pkg = build_feedback(sim, target, {}, {}, 1, "");
    CHECK(std::find(pkg.events.begin(), pkg.events.end(), "step_mismatch") !=
          pkg.events.end());
    // Same samples, so residuals stay zero.
    CHECK(*pkg.residuals.voltage_mape == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("near-zero target samples are masked out of MAPE") {
    SimulationTrace target = make_ramp(4.0, 3.0, 0.0, 600.0);  // rest step
    SimulationTrace sim = target;
    for (auto& c : sim.current_a) c += 0.5;
    const FeedbackPackage pkg = build_feedback(sim, target, {}, {}, 1, "");
    // Every target current sample is zero, so the channel is absent rather
    // than infinite.
    CHECK_FALSE(pkg.residuals.current_mape.has_value());
}

TEST_CASE("overlay rendering is byte deterministic") {
    namespace fs = std::filesystem;
    const SimulationTrace target = make_ramp(4.0, 3.0, 2.0, 3600.0);
    const SimulationTrace sim = make_ramp(4.0, 2.95, 2.1, 3500.0);
    const AlignedTraces aligned = align_traces(sim, target);
    const fs::path a = fs::temp_directory_path() / "cellcal_overlay_a.svg";
    const fs::path b = fs::temp_directory_path() / "cellcal_overlay_b.svg";
    render_overlay(aligned, a.string());
    render_overlay(aligned, b.string());
    const std::string bytes = slurp(a.string());
    CHECK(bytes == slurp(b.string()));
    CHECK(bytes.find("<svg") != std::string::npos);
    fs::remove(a);
    fs::remove(b);
}

TEST_CASE("overlay with no simulated trace is annotated") {
    namespace fs = std::filesystem;
    const SimulationTrace target = make_ramp(4.0, 3.0, 2.0, 3600.0);
    SimulationTrace sim;
    sim.event = TerminationEvent::SolverFailure;
    AlignedTraces aligned;
    aligned.sim = sim;
    aligned.target = target;
    const fs::path path = fs::temp_directory_path() / "cellcal_overlay_fail.svg";
    render_overlay(aligned, path.string());
    CHECK(slurp(path.string()).find("simulated trace unavailable") !=
          std::string::npos);
    fs::remove(path);
}

TEST_CASE("cycle index selection keeps endpoints") {
    CycleSeries series;
    for (int i = 1; i <= 10; ++i) {
        CycleRecord r;
        r.cycle = i;
        r.discharge_capacity_ah = 2.0 - 0.01 * i * i;  // accelerating fade
        series.cycles.push_back(r);
    }
    const std::vector<int> picked = select_cycle_indices(series, 4);
    REQUIRE(picked.size() == 4);
    CHECK(picked.front() == 1);
    CHECK(picked.back() == 10);
    CHECK(std::is_sorted(picked.begin(), picked.end()));
    CHECK(select_cycle_indices(series, 99).size() == series.cycles.size());
}

TEST_CASE("feedback serialization round trip") {
    const SimulationTrace target = make_ramp(4.0, 3.0, 2.0, 3600.0);
    SimulationTrace sim = target;
    for (auto& v : sim.voltage_v) v *= 1.02;
    FeedbackPackage pkg = build_feedback(sim, target, {"extra_note"}, {}, 7, "");
    const std::string text = serialize_feedback(pkg);
    const FeedbackPackage back = parse_feedback(text);
    CHECK(serialize_feedback(back) == text);
    CHECK(back.round == 7);
    CHECK(std::find(back.events.begin(), back.events.end(), "extra_note") !=
          back.events.end());
}

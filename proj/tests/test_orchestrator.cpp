#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cellcal/orchestrator.hpp"

using namespace cellcal;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// A task whose hidden truth thickens the negative electrode by 20%.
struct Fixture {
    ParameterSet theta_init = default_physical_params();
    ParameterSet theta_star = default_physical_params();
    Protocol protocol;
    SimulationTrace target;

    Fixture() {
        theta_star.set_value(pname::kNegThickness,
                             theta_init.value(pname::kNegThickness) * 1.2);
        protocol = make_cccv_cycle(1.0, theta_init);
        target = run_protocol(theta_star, protocol);
        REQUIRE(is_success(target.event));
    }

    RunConfig config(const fs::path& out) const {
        RunConfig cfg;
        cfg.task_id = "fixture";
        cfg.theta_init = theta_init;
        cfg.protocol = protocol;
        cfg.target = target;
        cfg.proposer.kind = ProposerKind::Scripted;
        cfg.proposer.search_keys = {pname::kNegThickness};
        const ParameterEntry& e = theta_init.at(pname::kNegThickness);
        cfg.proposer.bounds[pname::kNegThickness] = {e.lower, e.upper};
        cfg.warmup_rounds = 2;
        cfg.search_rounds = 3;
        cfg.seed = 9;
        cfg.out_dir = out.string();
        cfg.render_plots = false;
        return cfg;
    }
};

}  // namespace

TEST_CASE("convergence detector") {
    CHECK_FALSE(check_convergence({}, 3, 0.1, 0.01));
    CHECK(check_convergence({0.005}, 3, 0.1, 0.01));  // below the floor
    CHECK_FALSE(check_convergence({5.0, 4.0}, 3, 0.1, 0.01));  // window not full
    CHECK(check_convergence({5.0, 4.99, 4.98}, 3, 0.1, 0.01));  // stalled
    CHECK_FALSE(check_convergence({5.0, 4.0, 3.0}, 3, 0.1, 0.01));  // improving
}

TEST_CASE("scripted calibration recovers the truth and replays exactly") {
    const Fixture fx;
    const fs::path out = fresh_dir("cellcal_orch_run");
    RunConfig cfg = fx.config(out);
    cfg.proposer.script.resize(2);
    cfg.proposer.script[0].directives[pname::kNegThickness] = {
        UpdateDirective::Kind::Multiplicative, 1.1};
    cfg.proposer.script[1].directives[pname::kNegThickness] = {
        UpdateDirective::Kind::Absolute, fx.theta_star.value(pname::kNegThickness)};

    const RunResult result = run_calibration(cfg);
    CHECK(result.task_id == "fixture");
    CHECK(result.reason == TerminationReason::Converged);
    CHECK(result.rounds_completed == 2);
    REQUIRE(result.best_total_mape.has_value());
    CHECK(*result.best_total_mape < 1e-9);
    CHECK(result.best_values.at(pname::kNegThickness) ==
          doctest::Approx(fx.theta_star.value(pname::kNegThickness)));

    for (const char* name :
         {"run.json", "rounds.jsonl", "best.json", "memory.jsonl", "result.json"}) {
        CHECK(fs::exists(out / name));
    }
    CHECK(replay_run(out.string()));

    // The memory holds the warm-up rounds plus learned rules.
    const MemoryStore memory = load_memory_file((out / "memory.jsonl").string());
    CHECK(memory.rounds().size() >= 4);  // 2 warm-up + initial + proposals
    bool has_learned = false;
    for (const auto& e : memory.knowledge()) {
        if (e.kind == KnowledgeKind::LearnedSensitivity) has_learned = true;
    }
    CHECK(has_learned);

    fs::remove_all(out);
}

TEST_CASE("run metadata echoes the configuration") {
    const Fixture fx;
    const fs::path out = fresh_dir("cellcal_orch_meta");
    RunConfig cfg = fx.config(out);
    cfg.warmup_rounds = 0;
    cfg.search_rounds = 1;
    cfg.no_memory = true;
    cfg.proposer.script.resize(1);
    cfg.proposer.script[0].directives[pname::kNegThickness] = {
        UpdateDirective::Kind::Multiplicative, 1.05};
    (void)run_calibration(cfg);

    std::ifstream in(out / "run.json");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("\"no_memory\": true") != std::string::npos);
    CHECK(text.find("\"scalar_only_feedback\": false") != std::string::npos);
    CHECK(text.find("scripted") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("an exhausted proposer burns rounds as no-ops") {
    const Fixture fx;
    const fs::path out = fresh_dir("cellcal_orch_noop");
    RunConfig cfg = fx.config(out);
    cfg.warmup_rounds = 0;
    cfg.search_rounds = 2;
    // Empty script: every proposal round fails.
    const RunResult result = run_calibration(cfg);
    CHECK(result.reason == TerminationReason::BudgetExhausted);
    CHECK(result.rounds_completed == 2);
    REQUIRE(result.best_total_mape.has_value());  // the initial evaluation

    int noop_rounds = 0;
    std::ifstream in(out / "rounds.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("proposer_error") != std::string::npos) ++noop_rounds;
    }
    CHECK(noop_rounds == 2);
    fs::remove_all(out);
}

TEST_CASE("run result serialization round trip") {
    RunResult r;
    r.task_id = "t";
    r.best_values = {{"a", 1.5}};
    r.best_total_mape = 0.25;
    r.best_round = 7;
    r.rounds_completed = 9;
    r.reason = TerminationReason::Converged;
    r.simulator_s = 1.5;
    r.proposer_s = 0.5;
    r.total_s = 2.5;
    r.run_dir = "/tmp/x";
    const RunResult back = parse_run_result(serialize_run_result(r));
    CHECK(serialize_run_result(back) == serialize_run_result(r));
    CHECK(back.reason == TerminationReason::Converged);
    CHECK(back.best_values.at("a") == doctest::Approx(1.5));
}

TEST_CASE("batch runs resume from completed results") {
    const Fixture fx;
    const fs::path suite_dir = fresh_dir("cellcal_orch_suite");
    const fs::path manifest_dir = suite_dir / "bench";
    fs::create_directories(manifest_dir / "traces");
    save_trace_csv(fx.target, (manifest_dir / "traces" / "t1.csv").string());

    BenchmarkManifest manifest;
    manifest.suite_seed = 11;
    manifest.n_per_mode = 1;
    BenchmarkTask task;
    task.id = "extreme__default__neg_thickness_x1.2__1C";
    task.base = "default";
    task.rule_id = "neg_thickness_x1.2";
    task.c_rate = 1.0;
    task.theta_init = fx.theta_init;
    task.theta_star = fx.theta_star;
    task.target_trace = "traces/t1.csv";
    manifest.tasks.push_back(task);

    RunConfig tmpl = fx.config(suite_dir / "runs");
    tmpl.warmup_rounds = 0;
    tmpl.search_rounds = 1;
    tmpl.proposer.script.resize(1);
    tmpl.proposer.script[0].directives[pname::kNegThickness] = {
        UpdateDirective::Kind::Absolute, fx.theta_star.value(pname::kNegThickness)};

    const std::vector<RunResult> first =
        batch_run(manifest, manifest_dir.string(), tmpl, 1);
    REQUIRE(first.size() == 1);
    CHECK(first[0].task_id == task.id);
    REQUIRE(first[0].best_total_mape.has_value());
    CHECK(*first[0].best_total_mape < 1e-9);

    // A second invocation reads result.json instead of re-running.
    const fs::path result_file = suite_dir / "runs" / task.id / "result.json";
    REQUIRE(fs::exists(result_file));
    const auto stamp = fs::last_write_time(result_file);
    const std::vector<RunResult> second =
        batch_run(manifest, manifest_dir.string(), tmpl, 1);
    CHECK(fs::last_write_time(result_file) == stamp);
    CHECK(serialize_run_result(second[0]) == serialize_run_result(first[0]));

    fs::remove_all(suite_dir);
}

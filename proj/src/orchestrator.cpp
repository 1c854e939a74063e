#include "cellcal/orchestrator.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cellcal/metrics.hpp"
#include "cellcal/rng.hpp"

namespace cellcal {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void validate_run_config(const RunConfig& cfg) {
    if (cfg.warmup_rounds < 0) throw std::invalid_argument("warmup rounds must be >= 0");
    if (cfg.search_rounds < 1) throw std::invalid_argument("search rounds must be >= 1");
    if (cfg.out_dir.empty()) throw std::invalid_argument("output directory required");
    if (cfg.n_cycles > 0) {
        if (!cfg.degradation_init || !cfg.target_cycles) {
            throw std::invalid_argument(
                "cycling tasks need degradation parameters and cycle targets");
        }
    } else if (cfg.target.empty()) {
        throw std::invalid_argument("target trace is empty");
    }
    validate_proposer_config(cfg.proposer);
    validate_loss_config(cfg.loss);
    require_valid_physical(cfg.theta_init);
    if (cfg.degradation_init) require_valid_degradation(*cfg.degradation_init);
}

std::string to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::Converged: return "converged";
        case TerminationReason::BudgetExhausted: return "budget_exhausted";
        case TerminationReason::Aborted: return "aborted";
    }
    return "aborted";
}

bool check_convergence(const std::vector<double>& best_history, int window,
                       double epsilon_pp, double floor_pct) {
    if (best_history.empty()) return false;
    if (best_history.back() < floor_pct) return true;
    const int n = static_cast<int>(best_history.size());
    if (n < window) return false;
    const double improvement =
        best_history[static_cast<std::size_t>(n - window)] - best_history.back();
    return improvement < epsilon_pp;
}

namespace {

double read_param(const ParameterSet& theta, const std::optional<ParameterSet>& deg,
                  const std::string& name) {
    if (theta.contains(name)) return theta.value(name);
    if (deg && deg->contains(name)) return deg->value(name);
    throw ValidationError("unknown parameter: " + name);
}

std::map<std::string, double> search_values(const RunConfig& cfg,
                                            const ParameterSet& theta,
                                            const std::optional<ParameterSet>& deg) {
    std::map<std::string, double> out;
    for (const auto& key : cfg.proposer.search_keys) {
        out[key] = read_param(theta, deg, key);
    }
    return out;
}

struct AppliedPoint {
    ParameterSet theta;
    std::optional<ParameterSet> deg;
    std::vector<std::string> events;
};

// Splits directives between the physical and degradation sets and applies
// each with damping and projection.
AppliedPoint apply_combined(const ParameterSet& theta,
                            const std::optional<ParameterSet>& deg,
                            const ParameterUpdate& update, double eta) {
    ParameterUpdate physical, degradation;
    physical.rationale = update.rationale;
    for (const auto& [name, d] : update.directives) {
        if (theta.contains(name)) {
            physical.directives[name] = d;
        } else if (deg && deg->contains(name)) {
            degradation.directives[name] = d;
        } else {
            throw ValidationError("unknown parameter: " + name);
        }
    }

    AppliedPoint out{theta, deg, {}};
    if (!physical.directives.empty()) {
        out.theta = apply_update(theta, physical, eta, &out.events);
    }
    if (!degradation.directives.empty()) {
        ParameterSet d = *deg;
        for (const auto& [name, dir] : degradation.directives) {
            const ParameterEntry& e = d.at(name);
            const double current = e.value;
            const double target = dir.kind == UpdateDirective::Kind::Multiplicative
                                      ? current * dir.value
                                      : dir.value;
            const double damped = current + eta * (target - current);
            const double clamped = std::max(e.lower, std::min(e.upper, damped));
            if (clamped != damped) out.events.push_back("clamped:" + name);
            d.set_value(name, clamped);
        }
        if (!validate_degradation(d).empty()) {
            for (const auto& [name, dir] : degradation.directives) {
                if (d.value(name) == deg->value(name)) continue;
                d.set_value(name, deg->value(name));
                out.events.push_back("reverted:" + name);
                if (validate_degradation(d).empty()) break;
            }
        }
        require_valid_degradation(d);
        out.deg = std::move(d);
    }
    return out;
}

struct Evaluation {
    FeedbackPackage feedback;
    bool success = false;
    std::optional<double> total_mape;
    double simulate_s = 0.0;
};

Evaluation evaluate_point(const RunConfig& cfg, const ParameterSet& theta,
                          const std::optional<ParameterSet>& deg,
                          const std::vector<std::string>& extra_events,
                          int plot_round) {
    Evaluation out;
    const auto t0 = Clock::now();
    std::string prefix;
    if (cfg.render_plots && plot_round >= 0) {
        prefix = (fs::path(cfg.out_dir) / "plots" /
                  ("round_" + std::to_string(plot_round)))
                     .string();
    }

    if (cfg.n_cycles > 0) {
        try {
            CycleSeries series =
                run_cycles(theta, *deg, cfg.protocol, cfg.n_cycles, cfg.sim);
            out.feedback =
                build_cycle_feedback(series, *cfg.target_cycles, extra_events,
                                     cfg.loss, plot_round, cfg.cycle_feedback_k,
                                     prefix);
            // The loss of a cycling task is the MAPE of the capacity-fade
            // curve over the common cycle range.
            const std::size_t common =
                std::min(series.cycles.size(), cfg.target_cycles->cycles.size());
            std::vector<double> sq, tq;
            for (std::size_t i = 0; i < common; ++i) {
                sq.push_back(series.cycles[i].discharge_capacity_ah);
                tq.push_back(cfg.target_cycles->cycles[i].discharge_capacity_ah);
            }
            out.feedback.residuals.capacity_mape = series_mape_pct(sq, tq);
            out.feedback.residuals.total_mape = out.feedback.residuals.capacity_mape;
            out.success =
                series.cycles.size() == cfg.target_cycles->cycles.size() &&
                is_success(series.cycles.back().trace.event);
            if (!out.success &&
                std::find(out.feedback.events.begin(), out.feedback.events.end(),
                          "simulation_success") != out.feedback.events.end()) {
                out.feedback.events.push_back("incomplete_cycle_series");
            }
        } catch (const ValidationError& e) {
            out.feedback.events = {"solver_failure", std::string("validation_error: ") +
                                                         e.what()};
            out.feedback.round = plot_round;
        }
    } else {
        SimulationTrace trace;
        bool threw = false;
        std::string what;
        try {
            trace = run_protocol(theta, cfg.protocol, std::nullopt, std::nullopt,
                                 cfg.sim);
        } catch (const ValidationError& e) {
            threw = true;
            what = e.what();
            trace = SimulationTrace{};
            trace.event = TerminationEvent::SolverFailure;
        }
        std::vector<std::string> events = extra_events;
        if (threw) events.push_back("validation_error: " + what);
        out.feedback =
            build_feedback(trace, cfg.target, events, cfg.loss, plot_round, prefix);
        out.success = !threw && is_success(trace.event);
    }
    if (out.success) out.total_mape = out.feedback.residuals.total_mape;
    out.simulate_s = seconds_since(t0);
    return out;
}

FeedbackPackage scalar_only_view(const FeedbackPackage& full) {
    FeedbackPackage out;
    out.round = full.round;
    out.events = full.events;
    out.residuals.total_mape = full.residuals.total_mape;
    return out;
}

RoundRecord make_record(const RunConfig& cfg, int round, const ParameterUpdate& u,
                        const ParameterSet& theta,
                        const std::optional<ParameterSet>& deg,
                        const Evaluation& eval,
                        const std::vector<std::string>& apply_events) {
    RoundRecord r;
    r.round = round;
    r.proposed = u;
    r.applied_values = search_values(cfg, theta, deg);
    r.residuals = eval.feedback.residuals;
    r.features = eval.feedback.features;
    r.events = eval.feedback.events;
    r.events.insert(r.events.end(), apply_events.begin(), apply_events.end());
    r.rationale = u.rationale;
    return r;
}

std::string make_best_json(const BestSoFar& best) {
    ordered_json j = ordered_json::object();
    j["round"] = best.round;
    if (best.valid()) j["total_mape"] = best.total_mape;
    j["values"] = best.values;
    return j.dump(2) + "\n";
}

std::string round_log_line(const RoundRecord& record, double simulate_s,
                           double propose_s, double eta) {
    ordered_json j = ordered_json::parse(round_record_to_json_line(record));
    j["timings"] = {{"simulate_s", simulate_s}, {"propose_s", propose_s}};
    j["eta"] = eta;
    return j.dump();
}

ParameterUpdate fixed_warmup_perturbation(const RunConfig& cfg, int k) {
    CounterRng rng(cfg.seed, 0x77aa0000ULL + static_cast<std::uint64_t>(k));
    ParameterUpdate u;
    for (const auto& key : cfg.proposer.search_keys) {
        u.directives[key] = {UpdateDirective::Kind::Multiplicative,
                             rng.uniform(0.8, 1.2)};
    }
    u.rationale = "warm-up perturbation " + std::to_string(k);
    return u;
}

}  // namespace

MemoryStore warmup_phase(const RunConfig& cfg, LlmClient* client,
                         std::vector<std::string>* log_lines) {
    validate_run_config(cfg);
    std::vector<std::string> rules;
    if (!cfg.no_knowledge) {
        rules = cfg.knowledge_rules.empty() ? default_knowledge_rules()
                                            : cfg.knowledge_rules;
    }
    MemoryStore store = init_with_knowledge(rules);
    if (cfg.warmup_rounds == 0) return store;

    std::unique_ptr<Proposer> llm;
    if (cfg.llm_warmup && cfg.proposer.kind == ProposerKind::Llm) {
        llm = make_proposer(cfg.proposer, client);
    }

    std::vector<RoundRecord> records;
    FeedbackPackage baseline_feedback;
    for (int k = 1; k <= cfg.warmup_rounds; ++k) {
        ParameterUpdate u;
        double propose_s = 0.0;
        if (k > 1) {
            const auto prop_t0 = Clock::now();
            if (llm) {
                ProposeInput in;
                in.round = k;
                in.first_round = (k == 2);
                in.feedback = &baseline_feedback;
                if (!cfg.no_memory) {
                    in.context = render_context(store, cfg.context_token_budget);
                }
                try {
                    u = llm->propose(in);
                } catch (const ProposerError&) {
                    u = fixed_warmup_perturbation(cfg, k);
                }
            } else {
                u = fixed_warmup_perturbation(cfg, k);
            }
            propose_s = std::chrono::duration<double>(Clock::now() - prop_t0).count();
        }
        AppliedPoint point =
            apply_combined(cfg.theta_init, cfg.degradation_init, u, 1.0);
        Evaluation eval = evaluate_point(cfg, point.theta, point.deg, {}, -1);
        if (k == 1) baseline_feedback = eval.feedback;
        RoundRecord r = make_record(cfg, k, u, point.theta, point.deg, eval,
                                    point.events);
        store.record_round(r);
        if (log_lines != nullptr) {
            log_lines->push_back(round_log_line(r, eval.simulate_s, propose_s, 1.0));
        }
        records.push_back(std::move(r));
    }

    for (const auto& entry : summarize_warmup(store, records)) {
        store.add_knowledge(entry);
    }
    return store;
}

RunResult optimize(const RunConfig& cfg, MemoryStore& memory, LlmClient* client,
                   const std::vector<std::string>* prior_log_lines) {
    validate_run_config(cfg);
    const auto run_t0 = Clock::now();
    fs::create_directories(fs::path(cfg.out_dir) / "plots");
    std::ofstream rounds_out(fs::path(cfg.out_dir) / "rounds.jsonl");
    if (!rounds_out) {
        throw std::runtime_error("cannot write rounds log in " + cfg.out_dir);
    }
    if (prior_log_lines != nullptr) {
        for (const auto& line : *prior_log_lines) rounds_out << line << "\n";
    } else {
        for (const auto& r : memory.rounds()) {
            rounds_out << round_log_line(r, 0.0, 0.0, 1.0) << "\n";
        }
    }

    RunResult result;
    result.task_id = cfg.task_id;
    result.run_dir = cfg.out_dir;

    std::unique_ptr<Proposer> proposer = make_proposer(cfg.proposer, client);
    ParameterSet theta = cfg.theta_init;
    std::optional<ParameterSet> deg = cfg.degradation_init;

    int global = memory.rounds().empty() ? 1 : memory.rounds().back().round + 1;
    std::vector<double> best_history;
    std::vector<EvalPoint> history;  // successful proposal evaluations, for BO

    auto log_round = [&](const RoundRecord& record, double sim_s, double prop_s,
                         double eta) {
        memory.record_round(record);
        rounds_out << round_log_line(record, sim_s, prop_s, eta) << "\n";
        rounds_out.flush();
        if (memory.best().valid()) best_history.push_back(memory.best().total_mape);
    };

    // Initial evaluation of the unmodified starting point.
    Evaluation eval = evaluate_point(cfg, theta, deg, {}, global);
    result.simulator_s += eval.simulate_s;
    RoundRecord initial =
        make_record(cfg, global, ParameterUpdate{}, theta, deg, eval, {});
    log_round(initial, eval.simulate_s, 0.0, 1.0);

    FeedbackPackage last_feedback = eval.feedback;
    ResidualSet last_residuals = eval.feedback.residuals;
    std::optional<double> prev_total = eval.total_mape;

    double eta = 1.0;
    int improvement_streak = 0;
    result.reason = TerminationReason::BudgetExhausted;

    for (int t = 1; t <= cfg.search_rounds; ++t) {
        ++global;
        result.rounds_completed = t;

        ProposeInput in;
        in.round = t;
        in.first_round = (t == 1 && memory.rounds().size() <= 1);
        FeedbackPackage reduced;
        if (cfg.scalar_only_feedback) {
            reduced = scalar_only_view(last_feedback);
            in.feedback = &reduced;
        } else {
            in.feedback = &last_feedback;
        }
        if (!cfg.no_memory) {
            in.context = render_context(memory, cfg.context_token_budget);
        }
        in.history = history;

        const auto prop_t0 = Clock::now();
        ParameterUpdate update;
        bool proposed = false;
        std::string propose_error;
        try {
            update = proposer->propose(in);
            proposed = true;
        } catch (const ProposerError& e) {
            propose_error = e.what();
        }
        const double propose_s = seconds_since(prop_t0);
        result.proposer_s += propose_s;

        std::string noop_event = "proposer_error";
        AppliedPoint point;
        if (proposed) {
            try {
                point = apply_combined(theta, deg, update, eta);
            } catch (const ValidationError& e) {
                proposed = false;
                noop_event = "apply_error";
                propose_error = e.what();
            }
        }

        if (!proposed) {
            // No-op round: the point is unchanged, so its residuals carry
            // over.
            RoundRecord noop;
            noop.round = global;
            noop.applied_values = search_values(cfg, theta, deg);
            noop.residuals = last_residuals;
            noop.events = {noop_event};
            noop.rationale = propose_error;
            log_round(noop, 0.0, propose_s, eta);
            if (check_convergence(best_history, cfg.convergence_window,
                                  cfg.convergence_epsilon_pp,
                                  cfg.convergence_floor_pct)) {
                result.reason = TerminationReason::Converged;
                break;
            }
            continue;
        }

        eval = evaluate_point(cfg, point.theta, point.deg, {}, global);
        result.simulator_s += eval.simulate_s;
        RoundRecord record = make_record(cfg, global, update, point.theta,
                                         point.deg, eval, point.events);
        log_round(record, eval.simulate_s, propose_s, eta);

        if (eval.success) {
            if (eval.total_mape) {
                history.push_back({record.applied_values, *eval.total_mape});
            }
            if (prev_total && eval.total_mape &&
                *eval.total_mape > 1.5 * *prev_total) {
                eta = std::max(0.125, eta * 0.5);
                improvement_streak = 0;
            } else if (prev_total && eval.total_mape &&
                       *eval.total_mape < *prev_total) {
                if (++improvement_streak >= 2) {
                    eta = std::min(1.0, eta * 2.0);
                    improvement_streak = 0;
                }
            } else {
                improvement_streak = 0;
            }
            theta = std::move(point.theta);
            deg = std::move(point.deg);
            last_feedback = eval.feedback;
            last_residuals = record.residuals;
            if (eval.total_mape) prev_total = eval.total_mape;
        } else {
            // Failed simulation: stay at the previous point and shrink the
            // step.
            eta = std::max(0.125, eta * 0.5);
            improvement_streak = 0;
        }

        if (check_convergence(best_history, cfg.convergence_window,
                              cfg.convergence_epsilon_pp,
                              cfg.convergence_floor_pct)) {
            result.reason = TerminationReason::Converged;
            break;
        }
    }

    const BestSoFar& best = memory.best();
    result.best_round = best.round;
    result.best_values = best.values;
    if (best.valid()) result.best_total_mape = best.total_mape;
    result.total_s = seconds_since(run_t0);

    {
        std::ofstream out(fs::path(cfg.out_dir) / "best.json");
        out << make_best_json(best);
    }
    save_memory_file(memory, (fs::path(cfg.out_dir) / "memory.jsonl").string());
    return result;
}

namespace {

std::string run_metadata_json(const RunConfig& cfg) {
    ordered_json j = ordered_json::object();
    j["task_id"] = cfg.task_id;
    j["seed"] = cfg.seed;
    j["warmup_rounds"] = cfg.warmup_rounds;
    j["search_rounds"] = cfg.search_rounds;
    j["n_cycles"] = cfg.n_cycles;
    j["proposer"] = {{"kind", to_string(cfg.proposer.kind)},
                     {"seed", cfg.proposer.seed},
                     {"search_keys", cfg.proposer.search_keys},
                     {"bo_kernel", cfg.proposer.bo_kernel},
                     {"bo_acquisition", cfg.proposer.bo_acquisition}};
    ordered_json bounds = ordered_json::object();
    for (const auto& key : cfg.proposer.search_keys) {
        const auto [lo, hi] = cfg.proposer.bounds.at(key);
        bounds[key] = {lo, hi};
    }
    j["bounds"] = std::move(bounds);
    j["loss"] = {{"weight_voltage", cfg.loss.weight_voltage},
                 {"weight_current", cfg.loss.weight_current},
                 {"weight_capacity", cfg.loss.weight_capacity},
                 {"regularization_lambda", cfg.loss.regularization_lambda}};
    j["ablation"] = {{"scalar_only_feedback", cfg.scalar_only_feedback},
                     {"no_memory", cfg.no_memory},
                     {"no_knowledge", cfg.no_knowledge}};
    j["convergence"] = {{"window", cfg.convergence_window},
                        {"epsilon_pp", cfg.convergence_epsilon_pp},
                        {"floor_pct", cfg.convergence_floor_pct}};
    j["step_size"] = {{"initial", 1.0}, {"floor", 0.125},
                      {"halve_on_relative_worsening", 0.5},
                      {"double_after_improvements", 2}};
    return j.dump(2) + "\n";
}

}  // namespace

RunResult run_calibration(const RunConfig& cfg, LlmClient* client) {
    validate_run_config(cfg);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "run.json");
        if (!out) throw std::runtime_error("cannot write run.json in " + cfg.out_dir);
        out << run_metadata_json(cfg);
    }
    std::vector<std::string> warmup_log;
    MemoryStore memory = warmup_phase(cfg, client, &warmup_log);
    RunResult result = optimize(cfg, memory, client, &warmup_log);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "result.json");
        out << serialize_run_result(result);
    }
    return result;
}

bool replay_run(const std::string& run_dir) {
    std::ifstream rounds_in(fs::path(run_dir) / "rounds.jsonl");
    if (!rounds_in) return false;

    BestSoFar best;
    std::string line;
    while (std::getline(rounds_in, line)) {
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception&) {
            return false;
        }
        const auto events = j.at("events").get<std::vector<std::string>>();
        const bool success =
            std::find(events.begin(), events.end(), "simulation_success") !=
            events.end();
        const auto& residuals = j.at("residuals");
        if (success && residuals.contains("total_mape")) {
            const double total = residuals.at("total_mape").get<double>();
            if (!best.valid() || total < best.total_mape) {
                best.round = j.at("round").get<int>();
                best.total_mape = total;
                best.values =
                    j.at("applied_values").get<std::map<std::string, double>>();
            }
        }
    }

    std::ifstream best_in(fs::path(run_dir) / "best.json", std::ios::binary);
    if (!best_in) return false;
    std::ostringstream buf;
    buf << best_in.rdbuf();
    return buf.str() == make_best_json(best);
}

std::vector<RunResult> batch_run(const BenchmarkManifest& manifest,
                                 const std::string& manifest_dir,
                                 const RunConfig& config_template, int parallelism,
                                 LlmClient* client) {
    if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    std::vector<RunResult> results(manifest.tasks.size());
    std::atomic<std::size_t> next{0};

    auto run_task = [&](std::size_t i) {
        const BenchmarkTask& task = manifest.tasks[i];
        RunConfig cfg = config_template;
        cfg.task_id = task.id;
        cfg.theta_init = task.theta_init;
        cfg.protocol = make_cccv_cycle(task.c_rate, task.theta_init);
        cfg.target =
            load_trace_csv((fs::path(manifest_dir) / task.target_trace).string());
        cfg.seed = manifest.suite_seed ^ fnv1a(task.id);
        cfg.proposer.seed = cfg.seed;
        cfg.out_dir = (fs::path(config_template.out_dir) / task.id).string();
        if (cfg.proposer.bounds.empty()) {
            for (const auto& key : cfg.proposer.search_keys) {
                const ParameterEntry& e = cfg.theta_init.at(key);
                cfg.proposer.bounds[key] = {e.lower, e.upper};
            }
        }

        const fs::path result_path = fs::path(cfg.out_dir) / "result.json";
        if (fs::exists(result_path)) {
            std::ifstream in(result_path);
            std::ostringstream buf;
            buf << in.rdbuf();
            results[i] = parse_run_result(buf.str());
            return;
        }
        try {
            results[i] = run_calibration(cfg, client);
        } catch (const std::exception& e) {
            RunResult aborted;
            aborted.task_id = task.id;
            aborted.run_dir = cfg.out_dir;
            aborted.reason = TerminationReason::Aborted;
            results[i] = aborted;
            fs::create_directories(cfg.out_dir);
            std::ofstream out(fs::path(cfg.out_dir) / "error.txt");
            out << e.what() << "\n";
        }
    };

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.tasks.size()) return;
            run_task(i);
        }
    };
    const int n_workers =
        std::min<int>(parallelism, static_cast<int>(manifest.tasks.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return results;
}

std::string serialize_run_result(const RunResult& result) {
    ordered_json j = ordered_json::object();
    j["task_id"] = result.task_id;
    j["best_values"] = result.best_values;
    if (result.best_total_mape) j["best_total_mape"] = *result.best_total_mape;
    j["best_round"] = result.best_round;
    j["rounds_completed"] = result.rounds_completed;
    j["reason"] = to_string(result.reason);
    j["simulator_s"] = result.simulator_s;
    j["proposer_s"] = result.proposer_s;
    j["total_s"] = result.total_s;
    j["run_dir"] = result.run_dir;
    return j.dump(2) + "\n";
}

RunResult parse_run_result(const std::string& json_text) {
    ordered_json j = ordered_json::parse(json_text);
    RunResult r;
    r.task_id = j.at("task_id").get<std::string>();
    r.best_values = j.at("best_values").get<std::map<std::string, double>>();
    if (j.contains("best_total_mape")) {
        r.best_total_mape = j.at("best_total_mape").get<double>();
    }
    r.best_round = j.at("best_round").get<int>();
    r.rounds_completed = j.at("rounds_completed").get<int>();
    const std::string reason = j.at("reason").get<std::string>();
    if (reason == "converged") {
        r.reason = TerminationReason::Converged;
    } else if (reason == "budget_exhausted") {
        r.reason = TerminationReason::BudgetExhausted;
    } else {
        r.reason = TerminationReason::Aborted;
    }
    r.simulator_s = j.at("simulator_s").get<double>();
    r.proposer_s = j.at("proposer_s").get<double>();
    r.total_s = j.at("total_s").get<double>();
    r.run_dir = j.at("run_dir").get<std::string>();
    return r;
}

}  // namespace cellcal

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "cellcal/benchmark.hpp"
#include "cellcal/dataio.hpp"
#include "cellcal/evaluate.hpp"
#include "cellcal/feedback.hpp"
#include "cellcal/orchestrator.hpp"
#include "cellcal/params.hpp"
#include "cellcal/proposer.hpp"
#include "cellcal/protocol.hpp"
#include "cellcal/simulator.hpp"
#include "cellcal/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace cellcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitAborted = 3;

ordered_json load_config_file(const std::string& path) {
    if (path.empty()) return ordered_json::object();
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    ordered_json j;
    in >> j;
    return j;
}

// Precedence: command-line flag > environment variable > config file > default.
std::string resolve_string(bool flag_set, const std::string& flag_value,
                           const char* env_name, const ordered_json& config,
                           const std::string& config_key,
                           const std::string& fallback, bool* found = nullptr) {
    if (found) *found = true;
    if (flag_set) return flag_value;
    if (env_name) {
        if (const char* env = std::getenv(env_name); env && *env) return env;
    }
    if (config.contains("llm") && config["llm"].contains(config_key)) {
        return config["llm"][config_key].get<std::string>();
    }
    if (found) *found = false;
    return fallback;
}

struct LlmFlags {
    std::string base_url, path, model, api_key_env;
    bool base_url_set = false, path_set = false, model_set = false,
         api_key_env_set = false;
    bool images = false;
    double temperature = -1.0;
    bool temperature_set = false;
};

void add_llm_flags(CLI::App* cmd, LlmFlags& f) {
    cmd->add_option("--llm-base-url", f.base_url,
                    "Chat endpoint base URL (env CELLCAL_LLM_BASE_URL)")
        ->each([&](const std::string&) { f.base_url_set = true; });
    cmd->add_option("--llm-path", f.path,
                    "Chat endpoint path (env CELLCAL_LLM_PATH)")
        ->each([&](const std::string&) { f.path_set = true; });
    cmd->add_option("--llm-model", f.model, "Model name (env CELLCAL_LLM_MODEL)")
        ->each([&](const std::string&) { f.model_set = true; });
    cmd->add_option("--llm-api-key-env", f.api_key_env,
                    "Name of the env var holding the bearer token")
        ->each([&](const std::string&) { f.api_key_env_set = true; });
    cmd->add_flag("--llm-images", f.images, "Attach overlay plots to prompts");
    cmd->add_option("--llm-temperature", f.temperature, "Sampling temperature")
        ->each([&](const std::string&) { f.temperature_set = true; });
}

LlmSettings resolve_llm_settings(const LlmFlags& f, const ordered_json& config,
                                 bool require_endpoint) {
    LlmSettings s;
    bool endpoint_found = false;
    s.base_url = resolve_string(f.base_url_set, f.base_url, "CELLCAL_LLM_BASE_URL",
                                config, "base_url", s.base_url, &endpoint_found);
    s.path = resolve_string(f.path_set, f.path, "CELLCAL_LLM_PATH", config, "path",
                            s.path);
    s.model = resolve_string(f.model_set, f.model, "CELLCAL_LLM_MODEL", config,
                             "model", s.model);
    s.api_key_env = resolve_string(f.api_key_env_set, f.api_key_env, nullptr,
                                   config, "api_key_env", s.api_key_env);
    if (f.images || (config.contains("llm") &&
                     config["llm"].value("supports_images", false))) {
        s.supports_images = true;
    }
    if (f.temperature_set) {
        s.temperature = f.temperature;
    } else if (config.contains("llm") && config["llm"].contains("temperature")) {
        s.temperature = config["llm"]["temperature"].get<double>();
    }
    if (require_endpoint && !endpoint_found) {
        throw CLI::ValidationError(
            "--llm-base-url",
            "no chat endpoint configured; set the flag, CELLCAL_LLM_BASE_URL, or "
            "llm.base_url in the config file");
    }
    return s;
}

struct CalibrateFlags {
    std::string manifest_path, task_id, target_path, params_path, config_path,
        out_dir, proposer = "llm", script_path;
    std::vector<std::string> search_keys;
    double c_rate = 1.0;
    int warmup = 20, rounds = 80;
    bool warmup_set = false, rounds_set = false, seed_set = false;
    std::uint64_t seed = 1234;
    bool scalar_only = false, no_memory = false, no_knowledge = false,
         no_llm_warmup = false, no_plots = false;
    LlmFlags llm;
};

void add_calibrate_flags(CLI::App* cmd, CalibrateFlags& f, bool suite) {
    cmd->add_option("--manifest", f.manifest_path, "Benchmark manifest JSON")
        ->check(CLI::ExistingFile);
    if (!suite) {
        cmd->add_option("--task-id", f.task_id, "Task id within the manifest");
        cmd->add_option("--target", f.target_path,
                        "Target trace CSV (instead of a manifest task)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--params", f.params_path,
                        "Initial parameter file (default: built-in chemistry)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--c-rate", f.c_rate,
                        "Cycle C-rate for --target runs (default 1)");
    }
    cmd->add_option("--proposer", f.proposer,
                    "Proposer: llm, bo, random, sobol, scripted, cmaes-stub")
        ->check(CLI::IsMember(
            {"llm", "bo", "random", "sobol", "scripted", "cmaes-stub"}));
    cmd->add_option("--script", f.script_path,
                    "Update script JSONL for --proposer scripted")
        ->check(CLI::ExistingFile);
    cmd->add_option("--search-key", f.search_keys, "Parameter name to calibrate")
        ->required();
    cmd->add_option("--config", f.config_path, "JSON config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out_dir, "Output directory")->required();
    cmd->add_option("--warmup", f.warmup, "Warm-up rounds (default 20)")
        ->check(CLI::NonNegativeNumber)
        ->each([&f](const std::string&) { f.warmup_set = true; });
    cmd->add_option("--rounds", f.rounds, "Proposal rounds (default 80)")
        ->check(CLI::PositiveNumber)
        ->each([&f](const std::string&) { f.rounds_set = true; });
    cmd->add_option("--seed", f.seed, "Run seed")
        ->each([&f](const std::string&) { f.seed_set = true; });
    cmd->add_flag("--scalar-only", f.scalar_only,
                  "Ablation: feedback reduced to the scalar loss");
    cmd->add_flag("--no-memory", f.no_memory, "Ablation: no prompt context");
    cmd->add_flag("--no-knowledge", f.no_knowledge,
                  "Ablation: no injected knowledge");
    cmd->add_flag("--no-llm-warmup", f.no_llm_warmup,
                  "Use fixed random warm-up perturbations");
    cmd->add_flag("--no-plots", f.no_plots, "Skip overlay rendering");
    add_llm_flags(cmd, f.llm);
}

RunConfig build_run_config(const CalibrateFlags& f, const ordered_json& config) {
    RunConfig cfg;
    cfg.proposer.kind = proposer_kind_from_string(f.proposer);
    cfg.proposer.search_keys = f.search_keys;
    cfg.warmup_rounds =
        f.warmup_set ? f.warmup : config.value("warmup_rounds", f.warmup);
    cfg.search_rounds =
        f.rounds_set ? f.rounds : config.value("search_rounds", f.rounds);
    cfg.convergence_window = config.value("convergence_window", cfg.convergence_window);
    cfg.convergence_epsilon_pp =
        config.value("convergence_epsilon_pp", cfg.convergence_epsilon_pp);
    cfg.convergence_floor_pct =
        config.value("convergence_floor_pct", cfg.convergence_floor_pct);
    cfg.loss.weight_voltage = config.value("weight_voltage", 1.0);
    cfg.loss.weight_current = config.value("weight_current", 1.0);
    cfg.loss.weight_capacity = config.value("weight_capacity", 1.0);
    cfg.seed = f.seed_set ? f.seed : config.value("seed", f.seed);
    cfg.proposer.seed = cfg.seed;
    cfg.out_dir = f.out_dir;
    cfg.scalar_only_feedback = f.scalar_only;
    cfg.no_memory = f.no_memory;
    cfg.no_knowledge = f.no_knowledge;
    cfg.llm_warmup = !f.no_llm_warmup;
    cfg.render_plots = !f.no_plots;
    if (!f.script_path.empty()) {
        cfg.proposer.script = load_replay_file(f.script_path);
    }
    return cfg;
}

void fill_bounds(ProposerConfig& proposer, const ParameterSet& theta) {
    for (const auto& key : proposer.search_keys) {
        if (!proposer.bounds.count(key)) {
            const ParameterEntry& e = theta.at(key);
            proposer.bounds[key] = {e.lower, e.upper};
        }
    }
}

int cmd_gen_bench(const std::vector<std::pair<std::string, std::string>>& bases,
                  std::vector<double> c_rates, std::vector<std::string> modes,
                  int n, std::uint64_t seed, const std::string& out, int workers) {
    ManifestOptions opt;
    if (bases.empty()) {
        opt.bases.push_back({"default", default_physical_params()});
    } else {
        for (const auto& [name, path] : bases) {
            opt.bases.push_back({name, path.empty() ? default_physical_params()
                                                    : load_parameter_file(path)});
        }
    }
    if (!c_rates.empty()) opt.c_rates = std::move(c_rates);
    if (!modes.empty()) {
        opt.modes.clear();
        for (const auto& m : modes) {
            opt.modes.push_back(perturbation_mode_from_string(m));
        }
    }
    opt.n_per_mode = n;
    opt.seed = seed;
    opt.output_dir = out;
    opt.workers = workers;

    const BenchmarkManifest manifest = generate_manifest(opt);
    save_manifest(manifest, (fs::path(out) / "manifest.json").string());
    std::printf("wrote %zu tasks (%d candidates, %d stability / %d sensitivity "
                "rejections)%s to %s\n",
                manifest.tasks.size(), manifest.filter_stats.candidates,
                manifest.filter_stats.stability_rejections,
                manifest.filter_stats.sensitivity_rejections,
                manifest.shortfall ? " [shortfall]" : "", out.c_str());
    return kExitOk;
}

int cmd_simulate(const std::string& params_path, const std::string& deg_path,
                 const std::string& protocol_path, double c_rate, int cycles,
                 const std::string& out) {
    const ParameterSet params = params_path.empty() ? default_physical_params()
                                                    : load_parameter_file(params_path);
    const Protocol protocol = !protocol_path.empty()
                                  ? load_protocol_file(protocol_path)
                                  : make_cccv_cycle(c_rate, params);
    if (cycles > 0) {
        const ParameterSet deg = deg_path.empty() ? default_degradation_params()
                                                  : load_parameter_file(deg_path);
        const CycleSeries series = run_cycles(params, deg, protocol, cycles);
        std::ofstream f(out);
        f << "cycle,discharge_capacity_ah\n";
        char buf[64];
        for (const auto& c : series.cycles) {
            std::snprintf(buf, sizeof buf, "%.17g", c.discharge_capacity_ah);
            f << c.cycle << "," << buf << "\n";
        }
        std::printf("wrote %zu cycles to %s\n", series.cycles.size(), out.c_str());
    } else {
        std::optional<ParameterSet> deg;
        if (!deg_path.empty()) deg = load_parameter_file(deg_path);
        const SimulationTrace trace = run_protocol(params, protocol, deg);
        save_trace_csv(trace, out);
        std::printf("wrote %zu samples (%s) to %s\n", trace.size(),
                    to_string(trace.event).c_str(), out.c_str());
    }
    return kExitOk;
}

int cmd_calibrate(const CalibrateFlags& f) {
    const ordered_json config = load_config_file(f.config_path);
    RunConfig cfg = build_run_config(f, config);

    if (!f.manifest_path.empty() && !f.task_id.empty()) {
        const BenchmarkManifest manifest = load_manifest(f.manifest_path);
        const BenchmarkTask* task = nullptr;
        for (const auto& t : manifest.tasks) {
            if (t.id == f.task_id) task = &t;
        }
        if (!task) {
            throw CLI::ValidationError("--task-id",
                                       "not in manifest: " + f.task_id);
        }
        cfg.task_id = task->id;
        cfg.theta_init = task->theta_init;
        cfg.protocol = make_cccv_cycle(task->c_rate, task->theta_init);
        cfg.target = load_trace_csv(
            (fs::path(f.manifest_path).parent_path() / task->target_trace).string());
    } else if (!f.target_path.empty()) {
        cfg.task_id = f.task_id.empty() ? "adhoc" : f.task_id;
        cfg.theta_init = f.params_path.empty() ? default_physical_params()
                                               : load_parameter_file(f.params_path);
        cfg.protocol = make_cccv_cycle(f.c_rate, cfg.theta_init);
        cfg.target = load_trace_csv(f.target_path);
    } else {
        throw CLI::ValidationError(
            "--task-id", "give --manifest with --task-id, or --target");
    }
    fill_bounds(cfg.proposer, cfg.theta_init);

    std::unique_ptr<LlmClient> client;
    if (cfg.proposer.kind == ProposerKind::Llm) {
        cfg.proposer.llm = resolve_llm_settings(f.llm, config, true);
        client = std::make_unique<LlmClient>(cfg.proposer.llm);
        fs::create_directories(cfg.out_dir);
        client->set_audit_path((fs::path(cfg.out_dir) / "llm_audit.jsonl").string());
    }

    const RunResult result = run_calibration(cfg, client.get());
    std::printf("%s: %s after %d rounds, best round %d", result.task_id.c_str(),
                to_string(result.reason).c_str(), result.rounds_completed,
                result.best_round);
    if (result.best_total_mape) {
        std::printf(", total MAPE %.4f%%", *result.best_total_mape);
    }
    std::printf(" (%.1fs)\n", result.total_s);
    return result.reason == TerminationReason::Aborted ? kExitAborted : kExitOk;
}

int cmd_run_suite(const CalibrateFlags& f, int parallel) {
    if (f.manifest_path.empty()) {
        throw CLI::ValidationError("--manifest", "required for run-suite");
    }
    const ordered_json config = load_config_file(f.config_path);
    const BenchmarkManifest manifest = load_manifest(f.manifest_path);
    RunConfig cfg = build_run_config(f, config);
    cfg.theta_init = default_physical_params();  // replaced per task

    std::unique_ptr<LlmClient> client;
    if (cfg.proposer.kind == ProposerKind::Llm) {
        cfg.proposer.llm = resolve_llm_settings(f.llm, config, true);
        client = std::make_unique<LlmClient>(cfg.proposer.llm);
        fs::create_directories(cfg.out_dir);
        client->set_audit_path((fs::path(cfg.out_dir) / "llm_audit.jsonl").string());
    }

    const std::vector<RunResult> results =
        batch_run(manifest, fs::path(f.manifest_path).parent_path().string(), cfg,
                  parallel, client.get());
    int aborted = 0;
    for (const auto& r : results) {
        if (r.reason == TerminationReason::Aborted) ++aborted;
    }
    std::printf("completed %zu tasks (%d aborted) under %s\n", results.size(),
                aborted, f.out_dir.c_str());
    return kExitOk;
}

int cmd_evaluate(const std::string& results_dir, const std::string& manifest_path,
                 const std::string& method, const std::string& out_dir) {
    const BenchmarkManifest manifest = load_manifest(manifest_path);
    std::vector<EvalResult> results;
    if (fs::is_directory(results_dir)) {
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(results_dir)) {
            if (entry.is_directory() && fs::exists(entry.path() / "result.json")) {
                dirs.push_back(entry.path());
            }
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            std::ifstream in(dir / "result.json");
            std::ostringstream buf;
            buf << in.rdbuf();
            results.push_back(eval_result_from_run(parse_run_result(buf.str()), method));
        }
    }
    if (results.empty()) {
        std::fprintf(stderr, "warning: no results under %s\n", results_dir.c_str());
    }
    const SuiteReport report = aggregate_report(results, manifest);
    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "report.csv");
        f << suite_report_to_csv(report);
    }
    {
        std::ofstream f(fs::path(out_dir) / "report.txt");
        f << suite_report_to_text(report);
    }
    std::printf("%zu result(s), %zu group row(s), %zu missing task(s); reports in %s\n",
                results.size(), report.rows.size(), report.missing_tasks.size(),
                out_dir.c_str());
    return kExitOk;
}

int cmd_replay(const std::string& run_dir) {
    if (replay_run(run_dir)) {
        std::printf("replay matches %s\n", run_dir.c_str());
        return kExitOk;
    }
    std::fprintf(stderr, "replay diverges from logs in %s\n", run_dir.c_str());
    return 1;
}

int cmd_plot(const std::string& run_dir, int round, const std::string& target_path,
             const std::string& sim_path, const std::string& out) {
    if (!run_dir.empty()) {
        const fs::path src =
            fs::path(run_dir) / "plots" / ("round_" + std::to_string(round) + ".svg");
        if (!fs::exists(src)) {
            throw CLI::ValidationError("--round", "no plot at " + src.string());
        }
        fs::copy_file(src, out, fs::copy_options::overwrite_existing);
    } else if (!target_path.empty()) {
        const SimulationTrace target = load_trace_csv(target_path);
        SimulationTrace sim;
        if (!sim_path.empty()) sim = load_trace_csv(sim_path);
        if (sim.empty()) {
            AlignedTraces aligned;
            aligned.sim = sim;
            aligned.target = target;
            render_overlay(aligned, out);
        } else {
            render_overlay(align_traces(sim, target), out);
        }
    } else {
        throw CLI::ValidationError("--run-dir", "give --run-dir or --target");
    }
    std::printf("wrote %s\n", out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop calibration of battery cell models"};
    app.require_subcommand(1);

    // gen-bench
    std::vector<std::string> base_specs, gb_modes;
    std::vector<double> gb_c_rates;
    int gb_n = 100, gb_workers = 0;
    std::uint64_t gb_seed = 1234;
    std::string gb_out;
    CLI::App* gen = app.add_subcommand("gen-bench", "Generate a benchmark suite");
    gen->add_option("--base", base_specs,
                    "Base chemistry as name=paramfile (default: built-in)");
    gen->add_option("--c-rates", gb_c_rates, "Cycle C-rates (default 0.2 1 2)");
    gen->add_option("--modes", gb_modes, "Perturbation modes (extreme, regular)")
        ->check(CLI::IsMember({"extreme", "regular"}));
    gen->add_option("--n", gb_n, "Tasks per mode (default 100)")
        ->check(CLI::PositiveNumber);
    gen->add_option("--seed", gb_seed, "Suite seed (default 1234)");
    gen->add_option("--out", gb_out, "Output directory")->required();
    gen->add_option("--workers", gb_workers,
                    "Simulation threads (default: hardware)");

    // simulate
    std::string sim_params, sim_deg, sim_protocol, sim_out;
    double sim_c_rate = 1.0;
    int sim_cycles = 0;
    CLI::App* sim = app.add_subcommand("simulate", "Run the forward simulator");
    sim->add_option("--params", sim_params, "Parameter file")
        ->check(CLI::ExistingFile);
    sim->add_option("--degradation", sim_deg, "Degradation parameter file")
        ->check(CLI::ExistingFile);
    sim->add_option("--protocol", sim_protocol, "Protocol file")
        ->check(CLI::ExistingFile);
    sim->add_option("--c-rate", sim_c_rate,
                    "Full-cycle C-rate when no protocol file is given");
    sim->add_option("--cycles", sim_cycles,
                    "Repeat the protocol this many cycles (capacity-curve output)")
        ->check(CLI::NonNegativeNumber);
    sim->add_option("--out", sim_out, "Output CSV")->required();

    // calibrate
    CalibrateFlags cal;
    CLI::App* calibrate = app.add_subcommand("calibrate", "Calibrate one task");
    add_calibrate_flags(calibrate, cal, false);

    // run-suite
    CalibrateFlags suite;
    int suite_parallel = 1;
    CLI::App* run_suite =
        app.add_subcommand("run-suite", "Calibrate every task in a manifest");
    add_calibrate_flags(run_suite, suite, true);
    run_suite->add_option("--parallel", suite_parallel, "Concurrent tasks")
        ->check(CLI::PositiveNumber);

    // evaluate
    std::string ev_results, ev_manifest, ev_method = "run", ev_out;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Aggregate suite reports");
    evaluate->add_option("--results", ev_results, "Directory of run directories")
        ->required();
    evaluate->add_option("--manifest", ev_manifest, "Benchmark manifest JSON")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--method", ev_method, "Method label for the report");
    evaluate->add_option("--out", ev_out, "Report directory (default: results dir)");

    // replay
    std::string rp_dir;
    CLI::App* replay =
        app.add_subcommand("replay", "Recompute best-so-far from logs and compare");
    replay->add_option("--run-dir", rp_dir, "Run directory")
        ->required()
        ->check(CLI::ExistingDirectory);

    // plot
    std::string pl_run_dir, pl_target, pl_sim, pl_out;
    int pl_round = 0;
    CLI::App* plot = app.add_subcommand("plot", "Emit an overlay plot");
    plot->add_option("--run-dir", pl_run_dir, "Run directory holding plots/");
    plot->add_option("--round", pl_round, "Round number within --run-dir");
    plot->add_option("--target", pl_target, "Target trace CSV")
        ->check(CLI::ExistingFile);
    plot->add_option("--sim", pl_sim, "Simulated trace CSV")
        ->check(CLI::ExistingFile);
    plot->add_option("--out", pl_out, "Output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            std::vector<std::pair<std::string, std::string>> bases;
            for (const auto& spec : base_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos) {
                    bases.emplace_back(spec, "");
                } else {
                    bases.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
                }
            }
            return cmd_gen_bench(bases, gb_c_rates, gb_modes, gb_n, gb_seed, gb_out,
                                 gb_workers);
        }
        if (sim->parsed()) {
            return cmd_simulate(sim_params, sim_deg, sim_protocol, sim_c_rate,
                                sim_cycles, sim_out);
        }
        if (calibrate->parsed()) return cmd_calibrate(cal);
        if (run_suite->parsed()) return cmd_run_suite(suite, suite_parallel);
        if (evaluate->parsed()) {
            return cmd_evaluate(ev_results, ev_manifest, ev_method,
                                ev_out.empty() ? ev_results : ev_out);
        }
        if (replay->parsed()) return cmd_replay(rp_dir);
        if (plot->parsed()) {
            return cmd_plot(pl_run_dir, pl_round, pl_target, pl_sim, pl_out);
        }
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "aborted: %s\n", e.what());
        return kExitAborted;
    }
    return kExitOk;
}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellcal/benchmark.hpp"
#include "cellcal/feedback.hpp"
#include "cellcal/llm_client.hpp"
#include "cellcal/memory.hpp"
#include "cellcal/params.hpp"
#include "cellcal/proposer.hpp"
#include "cellcal/protocol.hpp"
#include "cellcal/simulator.hpp"
#include "cellcal/trace.hpp"

namespace cellcal {

struct RunConfig {
    std::string task_id;
    ParameterSet theta_init;
    // Degradation tasks carry SEI parameters and cycle targets; n_cycles > 0
    // switches the simulation to cycling mode.
    std::optional<ParameterSet> degradation_init;
    int n_cycles = 0;
    Protocol protocol;
    SimulationTrace target;
    std::optional<CycleSeries> target_cycles;

    ProposerConfig proposer;
    LossConfig loss;
    int warmup_rounds = 20;
    int search_rounds = 80;
    int convergence_window = 10;
    double convergence_epsilon_pp = 0.1;
    double convergence_floor_pct = 0.01;
    std::uint64_t seed = 1234;
    std::string out_dir;

    bool scalar_only_feedback = false;
    bool no_memory = false;
    bool no_knowledge = false;
    // LLM-proposed warm-up perturbations when the proposer is LLM-backed;
    // otherwise independent uniform +/-20% per search key.
    bool llm_warmup = true;
    std::vector<std::string> knowledge_rules;  // empty -> shipped corpus

    SimOptions sim;
    bool render_plots = true;
    int cycle_feedback_k = 5;
    int context_token_budget = 2000;
};

void validate_run_config(const RunConfig& cfg);

enum class TerminationReason { Converged, BudgetExhausted, Aborted };

std::string to_string(TerminationReason r);

struct RunResult {
    std::string task_id;
    std::map<std::string, double> best_values;
    std::optional<double> best_total_mape;
    int best_round = -1;
    int rounds_completed = 0;
    TerminationReason reason = TerminationReason::BudgetExhausted;
    double simulator_s = 0.0;
    double proposer_s = 0.0;
    double total_s = 0.0;
    std::string run_dir;
};

// True iff the best-so-far history improved by less than epsilon_pp
// percentage points over the trailing window, or the current best is below
// floor_pct.
bool check_convergence(const std::vector<double>& best_history, int window = 10,
                       double epsilon_pp = 0.1, double floor_pct = 0.01);

// Phase 1: N_w perturbation rounds around theta_init recorded into a fresh
// memory store (seeded with knowledge unless ablated), then sensitivity
// summarization. theta_init itself is never changed. When log_lines is
// given, one serialized round per warm-up round is appended to it.
MemoryStore warmup_phase(const RunConfig& cfg, LlmClient* client = nullptr,
                         std::vector<std::string>* log_lines = nullptr);

// Phase 2: the iterative simulate / feedback / propose / project loop.
// Writes rounds.jsonl, best.json, memory.jsonl, and plots into cfg.out_dir.
// Rounds already present in the memory store open the log, either from the
// supplied pre-serialized lines or re-serialized with zero timings, so
// rounds.jsonl always covers the full round history.
RunResult optimize(const RunConfig& cfg, MemoryStore& memory,
                   LlmClient* client = nullptr,
                   const std::vector<std::string>* prior_log_lines = nullptr);

// warmup_phase followed by optimize, plus run.json metadata.
RunResult run_calibration(const RunConfig& cfg, LlmClient* client = nullptr);

// Recomputes best-so-far from rounds.jsonl and compares against best.json
// byte-for-byte. Returns false on any divergence.
bool replay_run(const std::string& run_dir);

// One calibration per manifest task; per-task seed mixes the suite seed with
// the task id. Completed tasks (result.json present) are skipped.
std::vector<RunResult> batch_run(const BenchmarkManifest& manifest,
                                 const std::string& manifest_dir,
                                 const RunConfig& config_template, int parallelism,
                                 LlmClient* client = nullptr);

std::string serialize_run_result(const RunResult& result);
RunResult parse_run_result(const std::string& json_text);

}  // namespace cellcal

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellcal/benchmark.hpp"
#include "cellcal/orchestrator.hpp"
#include "cellcal/params.hpp"
#include "cellcal/protocol.hpp"
#include "cellcal/simulator.hpp"

namespace cellcal {

// MAPE in percent with the shared near-zero mask. Throws std::invalid_argument
// on length mismatch or empty input, std::domain_error when every sample is
// masked.
double mape(const std::vector<double>& sim, const std::vector<double>& obs);

// RMSE in the channel's units, over all samples.
double rmse(const std::vector<double>& sim, const std::vector<double>& obs);

// Log-scale RMS distance over the search keys, so the result does not depend
// on parameter units or magnitudes.
struct ParameterError {
    double normalized = 0.0;  // sqrt(mean of squared log ratios)
    std::map<std::string, double> log_ratios;  // key -> log(hat / star)
};

// Throws std::domain_error when a value is not strictly positive,
// ValidationError when a key is missing.
ParameterError parameter_error(const std::map<std::string, double>& theta_hat,
                               const std::map<std::string, double>& theta_star,
                               const std::vector<std::string>& search_keys);
ParameterError parameter_error(const ParameterSet& theta_hat,
                               const ParameterSet& theta_star,
                               const std::vector<std::string>& search_keys);

struct CorrelationPoint {
    int round = 0;
    double total_mape = 0.0;
    double param_error = 0.0;
};

// Per-task association between the trajectory loss and the parameter-space
// error. Coefficients are absent when a sequence is constant; they are never
// coerced to zero.
struct CaseCorrelation {
    std::optional<double> pearson_r;
    std::optional<double> spearman_rho;
    // True iff the best-so-far curves of both quantities improve on exactly
    // the same rounds.
    bool monotone_co_decrease = false;
};

// Requires at least three points (successful rounds); throws
// std::invalid_argument otherwise.
CaseCorrelation within_case_correlation(const std::vector<CorrelationPoint>& points);

struct CorrelationReport {
    std::vector<std::string> task_ids;
    std::vector<CaseCorrelation> cases;
    std::optional<double> mean_pearson_r;    // over defined coefficients
    std::optional<double> mean_spearman_rho;
    double monotone_fraction = 0.0;
};

CorrelationReport correlation_report(const std::vector<std::string>& task_ids,
                                     const std::vector<CaseCorrelation>& cases);

// Raw per-round data as CSV with header round,total_mape,param_error.
std::string correlation_points_to_csv(const std::vector<CorrelationPoint>& points);

struct HeldOutEntry {
    std::string protocol_id;
    bool failed = false;
    double voltage_mape_pct = 0.0;
};

// Simulates both parameter sets on each protocol and reports the voltage-trace
// MAPE between them, so held-out protocols need no stored targets.
std::vector<HeldOutEntry> held_out_validation(const ParameterSet& theta_hat,
                                              const std::vector<Protocol>& protocols,
                                              const ParameterSet& theta_star,
                                              const SimOptions& options = {});

// One finished calibration, reduced to what the suite tables need.
struct EvalResult {
    std::string task_id;
    std::string method;
    std::optional<double> final_total_mape;
    std::optional<double> final_voltage_rmse_v;
    bool failed = false;
    double total_s = 0.0;
};

// Reads the best round's voltage RMSE back from the run's rounds.jsonl.
EvalResult eval_result_from_run(const RunResult& result, const std::string& method);

struct SuiteRow {
    std::string mode;
    std::string base;
    double c_rate = 0.0;
    std::string method;
    int n = 0;
    int failures = 0;
    std::optional<double> mean_total_mape;
    std::optional<double> std_total_mape;
    std::optional<double> mean_voltage_rmse_v;
    std::optional<double> std_voltage_rmse_v;
    double runtime_s = 0.0;
};

struct SuiteReport {
    std::vector<SuiteRow> rows;
    std::vector<std::string> missing_tasks;  // manifest tasks with no result
};

// Groups results by (mode, base, c_rate, method). Manifest tasks without a
// matching result are listed, never dropped silently.
SuiteReport aggregate_report(const std::vector<EvalResult>& results,
                             const BenchmarkManifest& manifest);

std::string suite_report_to_csv(const SuiteReport& report);
std::string suite_report_to_text(const SuiteReport& report);

}  // namespace cellcal

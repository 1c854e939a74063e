#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cellcal/params.hpp"
#include "cellcal/protocol.hpp"
#include "cellcal/simulator.hpp"

namespace cellcal {

enum class PerturbationMode { Extreme, Regular };

std::string to_string(PerturbationMode m);
PerturbationMode perturbation_mode_from_string(const std::string& s);

enum class OverrideOp { Multiply, Add, Set };

struct ParameterOverride {
    std::string parameter;
    OverrideOp op = OverrideOp::Multiply;
    double amount = 1.0;
};

// A named recipe turning a base chemistry into a hidden ground truth. Extreme
// rules touch exactly one parameter; regular rules touch at least two.
struct PerturbationRule {
    std::string id;
    PerturbationMode mode = PerturbationMode::Extreme;
    std::string description;
    std::vector<ParameterOverride> overrides;
};

// The 20 single-parameter rules: particle radii x{0.5, 2.0}, electrode
// thicknesses x{0.75, 1.5}, porosities +/-0.05, negative Bruggeman set
// {1.5, 2.0, 2.5}, positive Bruggeman set {1.3, 1.8, 2.3}, separator
// thickness x{0.7, 1.3}.
std::vector<PerturbationRule> extreme_rules();

// The 12 predefined multi-parameter design variants.
std::vector<PerturbationRule> regular_combos();

// Applies the rule's overrides and re-validates. Throws ValidationError when
// an override names a missing parameter or the result violates invariants.
ParameterSet apply_perturbation(const ParameterSet& base, const PerturbationRule& rule);

// True iff the parameter set validates and the protocol run ends in a
// non-failure event.
bool stability_filter(const ParameterSet& params, const Protocol& protocol,
                      const SimOptions& options = {});

// True iff the perturbation moves simulated discharge capacity by at least 1%
// relative to the base.
bool sensitivity_filter(const ParameterSet& base, const ParameterSet& perturbed,
                        const Protocol& protocol, const SimOptions& options = {});

struct BenchmarkTask {
    std::string id;
    std::string base;
    std::string rule_id;
    double c_rate = 1.0;
    ParameterSet theta_init;
    ParameterSet theta_star;  // hidden ground truth, for evaluation only
    std::string target_trace;  // CSV path relative to the manifest directory
    std::uint64_t seed = 0;
};

struct RejectionRecord {
    std::string base;
    std::string rule_id;
    double c_rate = 1.0;
    std::string reason;  // "stability" or "sensitivity", with detail
};

struct FilterStats {
    int candidates = 0;
    int stability_rejections = 0;
    int sensitivity_rejections = 0;
    std::vector<RejectionRecord> rejections;
};

struct BenchmarkManifest {
    std::uint64_t suite_seed = 0;
    int n_per_mode = 0;
    bool shortfall = false;
    std::vector<BenchmarkTask> tasks;
    FilterStats filter_stats;
};

struct BaseChemistry {
    std::string name;
    ParameterSet params;
};

struct ManifestOptions {
    std::vector<BaseChemistry> bases;
    std::vector<double> c_rates = {0.2, 1.0, 2.0};
    std::vector<PerturbationMode> modes = {PerturbationMode::Extreme,
                                           PerturbationMode::Regular};
    int n_per_mode = 100;
    std::uint64_t seed = 1234;
    // Target trace CSVs are written under output_dir/traces/. Empty skips
    // writing (paths are still recorded).
    std::string output_dir;
    SimOptions sim;
    int workers = 0;  // 0 -> hardware concurrency
};

// Enumerates base x c_rate x rule per mode, filters for stability and
// sensitivity, and samples n_per_mode tasks per mode with a counter-based
// generator, so the result is a pure function of the inputs and seed.
BenchmarkManifest generate_manifest(const ManifestOptions& options);

// Full serialization including the eval_only ground truth.
std::string serialize_manifest(const BenchmarkManifest& m);
BenchmarkManifest parse_manifest(const std::string& json_text);
void save_manifest(const BenchmarkManifest& m, const std::string& path);
BenchmarkManifest load_manifest(const std::string& path);

// The view handed to proposers: theta_init, bounds, and the target trace
// reference, never theta_star.
std::string serialize_task_public(const BenchmarkTask& task);

}  // namespace cellcal

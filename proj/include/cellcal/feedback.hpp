#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellcal/trace.hpp"

namespace cellcal {

// Weights used to collapse per-channel residuals into a single loss value.
struct LossConfig {
    std::map<std::string, double> protocol_weights;  // protocol id -> weight, default 1
    double weight_voltage = 1.0;
    double weight_current = 1.0;
    double weight_capacity = 1.0;
    // Optional log-space pull toward a reference parameter point.
    double regularization_lambda = 0.0;
    std::map<std::string, double> reference_values;

    double protocol_weight(const std::string& protocol_id) const {
        auto it = protocol_weights.find(protocol_id);
        return it == protocol_weights.end() ? 1.0 : it->second;
    }
};

void validate_loss_config(const LossConfig& cfg);

// Per-channel residuals between a simulated and a target trace. A channel is
// absent when every sample on it was masked or no aligned samples exist.
struct ResidualSet {
    std::optional<double> capacity_mape;
    std::optional<double> voltage_rmse;
    std::optional<double> voltage_mape;
    std::optional<double> current_mape;
    std::optional<double> total_mape;
};

// Curve-shape deltas, always sim minus target. Fields referencing a segment
// that one of the traces lacks are left absent.
struct FeatureSet {
    std::optional<double> cc_charge_time_mismatch_s;
    std::optional<double> plateau_shift_v;
    std::optional<double> cv_fraction_delta;
    std::optional<double> capacity_delta_pct;
    std::optional<double> end_voltage_delta_v;
};

enum class SegmentKind { CcDischarge, CcCharge, ConstantVoltage, Rest, Unknown };

std::string to_string(SegmentKind k);

// One protocol step resampled onto a fixed number of normalized-time points.
struct AlignedStep {
    SegmentKind kind = SegmentKind::Unknown;
    double sim_duration_s = 0.0;
    double target_duration_s = 0.0;
    std::vector<double> sim_voltage, sim_current, sim_capacity;
    std::vector<double> target_voltage, target_current, target_capacity;
};

struct AlignedTraces {
    std::vector<AlignedStep> steps;
    bool step_mismatch = false;
    std::vector<std::string> events;
    double sim_discharge_ah = 0.0;
    double target_discharge_ah = 0.0;
    // Originals kept for plotting against real time.
    SimulationTrace sim;
    SimulationTrace target;
};

inline constexpr int kAlignedPointsPerStep = 500;

struct FeedbackPackage {
    ResidualSet residuals;
    FeatureSet features;
    std::string visual;  // path to the overlay plot, empty when not rendered
    std::vector<std::string> events;
    int round = 0;

    struct CyclePackage {
        int cycle = 0;
        ResidualSet residuals;
        FeatureSet features;
        std::vector<std::string> events;
    };
    std::vector<CyclePackage> cycles;
};

// Resamples each step of both traces onto kAlignedPointsPerStep points of
// normalized step time. On step-count mismatch the whole overlapping time
// range is aligned as a single segment and "step_mismatch" is recorded.
AlignedTraces align_traces(const SimulationTrace& sim, const SimulationTrace& target);

ResidualSet compute_residuals(const AlignedTraces& aligned, const LossConfig& cfg);

FeatureSet extract_features(const AlignedTraces& aligned);

// Picks k informative cycles: always the first and last, the rest greedily by
// largest curvature of the discharge-capacity sequence. Returns cycle numbers
// sorted ascending; k larger than the series returns every cycle.
std::vector<int> select_cycle_indices(const CycleSeries& series, int k);

// Writes a two-panel (current, voltage) overlay plot as SVG. Output bytes are
// a pure function of the input traces.
void render_overlay(const AlignedTraces& aligned, const std::string& path);

// Full pipeline: align, residuals, features, plot. extra_events are appended
// after the simulation-outcome event. path_prefix empty skips rendering,
// otherwise the plot goes to path_prefix + ".svg".
FeedbackPackage build_feedback(const SimulationTrace& sim, const SimulationTrace& target,
                               const std::vector<std::string>& extra_events,
                               const LossConfig& cfg, int round,
                               const std::string& path_prefix);

// Cycle-resolved variant for degradation runs: builds top-level feedback on
// the last common cycle and per-cycle sub-packages for k selected cycles.
FeedbackPackage build_cycle_feedback(const CycleSeries& sim, const CycleSeries& target,
                                     const std::vector<std::string>& extra_events,
                                     const LossConfig& cfg, int round, int k,
                                     const std::string& path_prefix);

std::string serialize_feedback(const FeedbackPackage& pkg);
FeedbackPackage parse_feedback(const std::string& json_text);

// Compact single-object JSON for embedding in logs and memory records.
std::string serialize_residuals(const ResidualSet& r);
ResidualSet parse_residuals(const std::string& json_text);
std::string serialize_features(const FeatureSet& f);
FeatureSet parse_features(const std::string& json_text);

}  // namespace cellcal

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cellcal {

enum class TerminationEvent {
    Completed,
    VoltageCutoff,
    CurrentCutoff,
    SolverFailure,
    ConcentrationBoundViolation,
};

std::string to_string(TerminationEvent e);
TerminationEvent termination_event_from_string(const std::string& s);

inline bool is_success(TerminationEvent e) {
    return e == TerminationEvent::Completed || e == TerminationEvent::VoltageCutoff ||
           e == TerminationEvent::CurrentCutoff;
}

// Sampled output of one protocol run. Sign convention: current > 0 on
// discharge. capacity_ah is the signed trapezoidal integral of current.
struct SimulationTrace {
    std::vector<double> time_s;
    std::vector<double> voltage_v;
    std::vector<double> current_a;
    std::vector<double> capacity_ah;
    std::vector<int> step_index;
    std::vector<double> step_durations_s;  // one entry per executed step
    TerminationEvent event = TerminationEvent::Completed;
    // Step index where a failure occurred, -1 otherwise.
    int failed_step = -1;

    std::size_t size() const { return time_s.size(); }
    bool empty() const { return time_s.empty(); }

    // Discharge capacity in Ah: integral of current over samples where it is
    // positive.
    double discharge_capacity_ah() const;
};

struct CycleRecord {
    int cycle = 0;  // 1-based, contiguous
    SimulationTrace trace;
    double discharge_capacity_ah = 0.0;
};

struct CycleSeries {
    std::vector<CycleRecord> cycles;
};

// CSV with header time_s,voltage_v,current_a,capacity_ah,step_index.
std::string trace_to_csv(const SimulationTrace& trace);
SimulationTrace trace_from_csv(const std::string& csv_text);
void save_trace_csv(const SimulationTrace& trace, const std::string& path);
SimulationTrace load_trace_csv(const std::string& path);

}  // namespace cellcal

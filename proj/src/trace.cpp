#include "cellcal/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cellcal {

std::string to_string(TerminationEvent e) {
    switch (e) {
        case TerminationEvent::Completed: return "completed";
        case TerminationEvent::VoltageCutoff: return "voltage_cutoff";
        case TerminationEvent::CurrentCutoff: return "current_cutoff";
        case TerminationEvent::SolverFailure: return "solver_failure";
        case TerminationEvent::ConcentrationBoundViolation:
            return "concentration_bound_violation";
    }
    return "unknown";
}

TerminationEvent termination_event_from_string(const std::string& s) {
    if (s == "completed") return TerminationEvent::Completed;
    if (s == "voltage_cutoff") return TerminationEvent::VoltageCutoff;
    if (s == "current_cutoff") return TerminationEvent::CurrentCutoff;
    if (s == "solver_failure") return TerminationEvent::SolverFailure;
    if (s == "concentration_bound_violation") {
        return TerminationEvent::ConcentrationBoundViolation;
    }
    throw std::invalid_argument("unknown termination event: " + s);
}

double SimulationTrace::discharge_capacity_ah() const {
    double q = 0.0;
    for (std::size_t i = 1; i < time_s.size(); ++i) {
        const double dt = time_s[i] - time_s[i - 1];
        const double i0 = std::max(0.0, current_a[i - 1]);
        const double i1 = std::max(0.0, current_a[i]);
        q += 0.5 * (i0 + i1) * dt / 3600.0;
    }
    return q;
}

std::string trace_to_csv(const SimulationTrace& trace) {
    std::string out = "time_s,voltage_v,current_a,capacity_ah,step_index\n";
    char line[200];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%d\n",
                      trace.time_s[i], trace.voltage_v[i], trace.current_a[i],
                      trace.capacity_ah[i], trace.step_index[i]);
        out += line;
    }
    return out;
}

SimulationTrace trace_from_csv(const std::string& csv_text) {
    SimulationTrace trace;
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty trace CSV");
    }
    if (line.rfind("time_s,voltage_v,current_a,capacity_ah,step_index", 0) != 0) {
        throw std::runtime_error("unexpected trace CSV header: " + line);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double t, v, i, q;
        int s;
        if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg,%d", &t, &v, &i, &q, &s) != 5) {
            throw std::runtime_error("bad trace CSV row at line " +
                                     std::to_string(lineno));
        }
        trace.time_s.push_back(t);
        trace.voltage_v.push_back(v);
        trace.current_a.push_back(i);
        trace.capacity_ah.push_back(q);
        trace.step_index.push_back(s);
    }
    if (!trace.step_index.empty()) {
        // Step durations are reconstructed from the last sample time of each
        // step; the simulator always emits a sample at the exact step end.
        int current = trace.step_index.front();
        double prev_end = 0.0;
        for (std::size_t i = 1; i < trace.size(); ++i) {
            if (trace.step_index[i] != current) {
                trace.step_durations_s.push_back(trace.time_s[i - 1] - prev_end);
                prev_end = trace.time_s[i - 1];
                current = trace.step_index[i];
            }
        }
        trace.step_durations_s.push_back(trace.time_s.back() - prev_end);
    }
    return trace;
}

void save_trace_csv(const SimulationTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace CSV: " + path);
    out << trace_to_csv(trace);
}

SimulationTrace load_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace CSV: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return trace_from_csv(buf.str());
}

}  // namespace cellcal

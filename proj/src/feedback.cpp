#include "cellcal/feedback.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cellcal/metrics.hpp"

namespace cellcal {

using nlohmann::ordered_json;

void validate_loss_config(const LossConfig& cfg) {
    for (const auto& [id, w] : cfg.protocol_weights) {
        if (w < 0.0) throw std::invalid_argument("negative protocol weight: " + id);
    }
    if (cfg.weight_voltage < 0.0 || cfg.weight_current < 0.0 ||
        cfg.weight_capacity < 0.0) {
        throw std::invalid_argument("negative channel weight");
    }
    if (cfg.weight_voltage + cfg.weight_current + cfg.weight_capacity <= 0.0) {
        throw std::invalid_argument("at least one channel weight must be positive");
    }
    if (cfg.regularization_lambda < 0.0) {
        throw std::invalid_argument("negative regularization strength");
    }
}

std::string to_string(SegmentKind k) {
    switch (k) {
        case SegmentKind::CcDischarge: return "cc_discharge";
        case SegmentKind::CcCharge: return "cc_charge";
        case SegmentKind::ConstantVoltage: return "constant_voltage";
        case SegmentKind::Rest: return "rest";
        case SegmentKind::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

struct StepSlice {
    std::size_t begin = 0;  // inclusive sample range
    std::size_t end = 0;    // exclusive
    double duration_s = 0.0;
};

std::vector<StepSlice> slice_steps(const SimulationTrace& t) {
    std::vector<StepSlice> out;
    if (t.empty()) return out;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= t.size(); ++i) {
        if (i == t.size() || t.step_index[i] != t.step_index[begin]) {
            StepSlice s;
            s.begin = begin;
            s.end = i;
            const int idx = t.step_index[begin];
            s.duration_s = idx < static_cast<int>(t.step_durations_s.size())
                               ? t.step_durations_s[idx]
                               : t.time_s[i - 1] - t.time_s[begin];
            out.push_back(s);
            begin = i;
        }
    }
    return out;
}

SegmentKind classify_segment(const SimulationTrace& t, const StepSlice& s,
                             double global_max_abs_current) {
    double max_abs = 0.0, max_i = -1e300, min_i = 1e300, sum = 0.0;
    for (std::size_t i = s.begin; i < s.end; ++i) {
        const double c = t.current_a[i];
        max_abs = std::max(max_abs, std::abs(c));
        max_i = std::max(max_i, c);
        min_i = std::min(min_i, c);
        sum += c;
    }
    if (max_abs < 1e-6 * global_max_abs_current || max_abs == 0.0) {
        return SegmentKind::Rest;
    }
    if (max_i - min_i > 1e-3 * max_abs) return SegmentKind::ConstantVoltage;
    return sum >= 0.0 ? SegmentKind::CcDischarge : SegmentKind::CcCharge;
}

// Linear interpolation of (times, values) at n points spanning [t0, t1].
std::vector<double> resample(const std::vector<double>& times,
                             const std::vector<double>& values, std::size_t begin,
                             std::size_t end, double t0, double t1, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    if (end - begin == 1 || t1 <= t0) {
        std::fill(out.begin(), out.end(), values[begin]);
        return out;
    }
    std::size_t j = begin;
    for (int k = 0; k < n; ++k) {
        const double t = t0 + (t1 - t0) * static_cast<double>(k) / (n - 1);
        while (j + 2 < end && times[j + 1] <= t) ++j;
        const double ta = times[j], tb = times[j + 1];
        double u = tb > ta ? (t - ta) / (tb - ta) : 0.0;
        u = std::clamp(u, 0.0, 1.0);
        out[static_cast<std::size_t>(k)] = values[j] + u * (values[j + 1] - values[j]);
    }
    return out;
}

double max_abs_current(const SimulationTrace& t) {
    double m = 0.0;
    for (double c : t.current_a) m = std::max(m, std::abs(c));
    return m;
}

AlignedStep resample_pair(const SimulationTrace& sim, std::size_t sb, std::size_t se,
                          double s0, double s1, const SimulationTrace& tgt,
                          std::size_t tb, std::size_t te, double g0, double g1) {
    AlignedStep step;
    const int n = kAlignedPointsPerStep;
    step.sim_voltage = resample(sim.time_s, sim.voltage_v, sb, se, s0, s1, n);
    step.sim_current = resample(sim.time_s, sim.current_a, sb, se, s0, s1, n);
    step.sim_capacity = resample(sim.time_s, sim.capacity_ah, sb, se, s0, s1, n);
    step.target_voltage = resample(tgt.time_s, tgt.voltage_v, tb, te, g0, g1, n);
    step.target_current = resample(tgt.time_s, tgt.current_a, tb, te, g0, g1, n);
    step.target_capacity = resample(tgt.time_s, tgt.capacity_ah, tb, te, g0, g1, n);
    return step;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

AlignedTraces align_traces(const SimulationTrace& sim, const SimulationTrace& target) {
    if (sim.empty() || target.empty()) {
        throw std::invalid_argument("align_traces requires nonempty traces");
    }
    AlignedTraces out;
    out.sim = sim;
    out.target = target;
    out.sim_discharge_ah = sim.discharge_capacity_ah();
    out.target_discharge_ah = target.discharge_capacity_ah();

    const auto sim_steps = slice_steps(sim);
    const auto tgt_steps = slice_steps(target);
    if (sim_steps.size() != tgt_steps.size()) {
        out.step_mismatch = true;
        out.events.push_back("step_mismatch");
        const double overlap = std::min(sim.time_s.back(), target.time_s.back());
        AlignedStep step =
            resample_pair(sim, 0, sim.size(), 0.0, overlap, target, 0, target.size(),
                          0.0, overlap);
        step.kind = SegmentKind::Unknown;
        step.sim_duration_s = overlap;
        step.target_duration_s = overlap;
        out.steps.push_back(std::move(step));
        return out;
    }

    const double tgt_max_i = max_abs_current(target);
    for (std::size_t s = 0; s < tgt_steps.size(); ++s) {
        const auto& ss = sim_steps[s];
        const auto& ts = tgt_steps[s];
        AlignedStep step = resample_pair(sim, ss.begin, ss.end, sim.time_s[ss.begin],
                                         sim.time_s[ss.end - 1], target, ts.begin,
                                         ts.end, target.time_s[ts.begin],
                                         target.time_s[ts.end - 1]);
        step.kind = classify_segment(target, ts, tgt_max_i);
        step.sim_duration_s = ss.duration_s;
        step.target_duration_s = ts.duration_s;
        out.steps.push_back(std::move(step));
    }
    return out;
}

ResidualSet compute_residuals(const AlignedTraces& aligned, const LossConfig& cfg) {
    validate_loss_config(cfg);
    ResidualSet r;
    std::vector<double> sv, si, sq, tv, ti, tq;
    for (const auto& step : aligned.steps) {
        sv.insert(sv.end(), step.sim_voltage.begin(), step.sim_voltage.end());
        si.insert(si.end(), step.sim_current.begin(), step.sim_current.end());
        sq.insert(sq.end(), step.sim_capacity.begin(), step.sim_capacity.end());
        tv.insert(tv.end(), step.target_voltage.begin(), step.target_voltage.end());
        ti.insert(ti.end(), step.target_current.begin(), step.target_current.end());
        tq.insert(tq.end(), step.target_capacity.begin(), step.target_capacity.end());
    }
    if (tv.empty()) return r;
    r.voltage_rmse = series_rmse(sv, tv);
    r.voltage_mape = series_mape_pct(sv, tv);
    r.current_mape = series_mape_pct(si, ti);
    r.capacity_mape = series_mape_pct(sq, tq);

    double total = 0.0;
    bool any = false;
    if (r.voltage_mape) {
        total += cfg.weight_voltage * *r.voltage_mape;
        any = true;
    }
    if (r.current_mape) {
        total += cfg.weight_current * *r.current_mape;
        any = true;
    }
    if (r.capacity_mape) {
        total += cfg.weight_capacity * *r.capacity_mape;
        any = true;
    }
    if (any) r.total_mape = total;
    return r;
}

FeatureSet extract_features(const AlignedTraces& aligned) {
    FeatureSet f;
    const AlignedStep* cc_charge = nullptr;
    const AlignedStep* first_cc = nullptr;
    const AlignedStep* cv = nullptr;
    for (const auto& step : aligned.steps) {
        if (step.kind == SegmentKind::CcCharge && cc_charge == nullptr) {
            cc_charge = &step;
        }
        if ((step.kind == SegmentKind::CcCharge ||
             step.kind == SegmentKind::CcDischarge) &&
            first_cc == nullptr) {
            first_cc = &step;
        }
        if (step.kind == SegmentKind::ConstantVoltage && cv == nullptr) cv = &step;
    }

    if (cc_charge != nullptr) {
        f.cc_charge_time_mismatch_s =
            cc_charge->sim_duration_s - cc_charge->target_duration_s;
    }
    const AlignedStep* plateau = cc_charge != nullptr ? cc_charge : first_cc;
    if (plateau != nullptr) {
        const int n = kAlignedPointsPerStep;
        std::vector<double> diffs;
        diffs.reserve(static_cast<std::size_t>(n / 2));
        for (int k = n / 4; k < 3 * n / 4; ++k) {
            diffs.push_back(plateau->sim_voltage[static_cast<std::size_t>(k)] -
                            plateau->target_voltage[static_cast<std::size_t>(k)]);
        }
        f.plateau_shift_v = median(std::move(diffs));
    }
    if (cv != nullptr && cc_charge != nullptr) {
        const double sim_total = cv->sim_duration_s + cc_charge->sim_duration_s;
        const double tgt_total = cv->target_duration_s + cc_charge->target_duration_s;
        if (sim_total > 0.0 && tgt_total > 0.0) {
            f.cv_fraction_delta = cv->sim_duration_s / sim_total -
                                  cv->target_duration_s / tgt_total;
        }
    }
    if (aligned.target_discharge_ah > 0.0) {
        f.capacity_delta_pct = 100.0 *
                               (aligned.sim_discharge_ah - aligned.target_discharge_ah) /
                               aligned.target_discharge_ah;
    }
    if (!aligned.steps.empty()) {
        const auto& last = aligned.steps.back();
        f.end_voltage_delta_v = last.sim_voltage.back() - last.target_voltage.back();
    }
    return f;
}

std::vector<int> select_cycle_indices(const CycleSeries& series, int k) {
    const auto& cycles = series.cycles;
    const int n = static_cast<int>(cycles.size());
    if (n == 0) throw std::invalid_argument("empty cycle series");
    if (k < 2) throw std::invalid_argument("need k >= 2 cycles");
    std::vector<int> out;
    if (k >= n) {
        for (const auto& c : cycles) out.push_back(c.cycle);
        return out;
    }
    out.push_back(cycles.front().cycle);
    out.push_back(cycles.back().cycle);

    // Interior cycles ranked by |second difference| of discharge capacity.
    std::vector<std::pair<double, int>> ranked;  // (-|d2|, position)
    for (int i = 1; i + 1 < n; ++i) {
        const double d2 = cycles[static_cast<std::size_t>(i + 1)].discharge_capacity_ah -
                          2.0 * cycles[static_cast<std::size_t>(i)].discharge_capacity_ah +
                          cycles[static_cast<std::size_t>(i - 1)].discharge_capacity_ah;
        ranked.emplace_back(-std::abs(d2), i);
    }
    std::sort(ranked.begin(), ranked.end());
    for (int j = 0; j < k - 2 && j < static_cast<int>(ranked.size()); ++j) {
        out.push_back(cycles[static_cast<std::size_t>(ranked[static_cast<std::size_t>(j)].second)].cycle);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

struct PlotPanel {
    double x0, y0, x1, y1;  // pixel corners of the data area
    double tmin, tmax, vmin, vmax;

    double px(double t) const {
        return tmax > tmin ? x0 + (x1 - x0) * (t - tmin) / (tmax - tmin)
                           : 0.5 * (x0 + x1);
    }
    double py(double v) const {
        return vmax > vmin ? y1 - (y1 - y0) * (v - vmin) / (vmax - vmin)
                           : 0.5 * (y0 + y1);
    }
};

void append_polyline(std::string& svg, const PlotPanel& p,
                     const std::vector<double>& t, const std::vector<double>& v,
                     const char* color) {
    if (t.empty()) return;
    // Cap the point count so file size stays bounded on long traces.
    const std::size_t stride = std::max<std::size_t>(1, t.size() / 1000);
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"1.5\" points=\"";
    char buf[64];
    for (std::size_t i = 0; i < t.size(); i += stride) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", p.px(t[i]), p.py(v[i]));
        svg += buf;
    }
    if ((t.size() - 1) % stride != 0) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", p.px(t.back()), p.py(v.back()));
        svg += buf;
    }
    if (!svg.empty() && svg.back() == ' ') svg.pop_back();
    svg += "\"/>\n";
}

void append_axis_labels(std::string& svg, const PlotPanel& p, const char* ylabel) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                  "fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
                  p.x0, p.y0, p.x1 - p.x0, p.y1 - p.y0);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" fill=\"#333333\" "
                  "transform=\"rotate(-90 %.2f %.2f)\">%s</text>\n",
                  p.x0 - 40.0, 0.5 * (p.y0 + p.y1), p.x0 - 40.0,
                  0.5 * (p.y0 + p.y1), ylabel);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" "
                  "fill=\"#333333\">%.6g</text>\n",
                  p.x0 - 36.0, p.y1, p.vmin);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" "
                  "fill=\"#333333\">%.6g</text>\n",
                  p.x0 - 36.0, p.y0 + 10.0, p.vmax);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" "
                  "fill=\"#333333\">%.6g</text>\n",
                  p.x1 - 30.0, p.y1 + 14.0, p.tmax);
    svg += buf;
}

PlotPanel make_panel(double y0, double y1, const std::vector<double>& tt,
                     const std::vector<double>& tv, const std::vector<double>& st,
                     const std::vector<double>& sv) {
    PlotPanel p{60.0, y0, 780.0, y1, 0.0, 1.0, 0.0, 1.0};
    double tmin = 1e300, tmax = -1e300, vmin = 1e300, vmax = -1e300;
    auto fold = [&](const std::vector<double>& t, const std::vector<double>& v) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            tmin = std::min(tmin, t[i]);
            tmax = std::max(tmax, t[i]);
            vmin = std::min(vmin, v[i]);
            vmax = std::max(vmax, v[i]);
        }
    };
    fold(tt, tv);
    fold(st, sv);
    if (tmin > tmax) {
        tmin = 0.0;
        tmax = 1.0;
    }
    if (vmin > vmax) {
        vmin = 0.0;
        vmax = 1.0;
    }
    if (vmax == vmin) {
        vmin -= 0.5;
        vmax += 0.5;
    }
    const double pad = 0.05 * (vmax - vmin);
    p.tmin = tmin;
    p.tmax = tmax > tmin ? tmax : tmin + 1.0;
    p.vmin = vmin - pad;
    p.vmax = vmax + pad;
    return p;
}

}  // namespace

void render_overlay(const AlignedTraces& aligned, const std::string& path) {
    const auto& sim = aligned.sim;
    const auto& tgt = aligned.target;
    std::string svg;
    svg +=
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
        "viewBox=\"0 0 800 600\">\n<rect width=\"800\" height=\"600\" "
        "fill=\"#ffffff\"/>\n";

    const PlotPanel top =
        make_panel(40.0, 280.0, tgt.time_s, tgt.current_a, sim.time_s, sim.current_a);
    const PlotPanel bot =
        make_panel(320.0, 560.0, tgt.time_s, tgt.voltage_v, sim.time_s, sim.voltage_v);
    append_axis_labels(svg, top, "current [A]");
    append_axis_labels(svg, bot, "voltage [V]");
    append_polyline(svg, top, tgt.time_s, tgt.current_a, "#1f77b4");
    append_polyline(svg, top, sim.time_s, sim.current_a, "#d62728");
    append_polyline(svg, bot, tgt.time_s, tgt.voltage_v, "#1f77b4");
    append_polyline(svg, bot, sim.time_s, sim.voltage_v, "#d62728");

    svg +=
        "<text x=\"60\" y=\"24\" font-size=\"12\" fill=\"#1f77b4\">target</text>\n"
        "<text x=\"120\" y=\"24\" font-size=\"12\" fill=\"#d62728\">simulated</text>\n"
        "<text x=\"380\" y=\"590\" font-size=\"12\" fill=\"#333333\">time [s]</text>\n";
    if (sim.empty()) {
        svg +=
            "<text x=\"300\" y=\"300\" font-size=\"14\" fill=\"#d62728\">simulated "
            "trace unavailable</text>\n";
    }
    svg += "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write overlay plot: " + path);
    out << svg;
    if (!out) throw std::runtime_error("failed writing overlay plot: " + path);
}

namespace {

std::vector<std::string> outcome_events(const SimulationTrace& sim,
                                        const std::vector<std::string>& extra) {
    std::vector<std::string> events;
    if (is_success(sim.event)) {
        events.push_back("simulation_success");
    } else {
        std::string e = to_string(sim.event);
        if (sim.failed_step >= 0) e += "@step" + std::to_string(sim.failed_step);
        events.push_back(e);
    }
    events.insert(events.end(), extra.begin(), extra.end());
    return events;
}

}  // namespace

FeedbackPackage build_feedback(const SimulationTrace& sim, const SimulationTrace& target,
                               const std::vector<std::string>& extra_events,
                               const LossConfig& cfg, int round,
                               const std::string& path_prefix) {
    validate_loss_config(cfg);
    FeedbackPackage pkg;
    pkg.round = round;
    pkg.events = outcome_events(sim, extra_events);

    if (!sim.empty() && !target.empty()) {
        AlignedTraces aligned = align_traces(sim, target);
        pkg.events.insert(pkg.events.end(), aligned.events.begin(),
                          aligned.events.end());
        pkg.residuals = compute_residuals(aligned, cfg);
        pkg.features = extract_features(aligned);
        if (!path_prefix.empty()) {
            pkg.visual = path_prefix + ".svg";
            render_overlay(aligned, pkg.visual);
        }
    } else if (!path_prefix.empty()) {
        AlignedTraces aligned;
        aligned.sim = sim;
        aligned.target = target;
        pkg.visual = path_prefix + ".svg";
        render_overlay(aligned, pkg.visual);
    }
    return pkg;
}

FeedbackPackage build_cycle_feedback(const CycleSeries& sim, const CycleSeries& target,
                                     const std::vector<std::string>& extra_events,
                                     const LossConfig& cfg, int round, int k,
                                     const std::string& path_prefix) {
    validate_loss_config(cfg);
    if (sim.cycles.empty() || target.cycles.empty()) {
        throw std::invalid_argument("empty cycle series");
    }
    const std::size_t common = std::min(sim.cycles.size(), target.cycles.size());
    CycleSeries shared;
    shared.cycles.assign(target.cycles.begin(),
                         target.cycles.begin() + static_cast<long>(common));
    const int kk = std::min<int>(k, static_cast<int>(common));
    std::vector<int> picks = kk >= 2 ? select_cycle_indices(shared, kk)
                                     : std::vector<int>{shared.cycles.front().cycle};

    FeedbackPackage pkg =
        build_feedback(sim.cycles[common - 1].trace, target.cycles[common - 1].trace,
                       extra_events, cfg, round, path_prefix);
    if (sim.cycles.size() != target.cycles.size()) {
        pkg.events.push_back("cycle_count_mismatch");
    }
    for (int cycle : picks) {
        const SimulationTrace* st = nullptr;
        const SimulationTrace* tt = nullptr;
        for (const auto& c : sim.cycles) {
            if (c.cycle == cycle) st = &c.trace;
        }
        for (const auto& c : target.cycles) {
            if (c.cycle == cycle) tt = &c.trace;
        }
        if (st == nullptr || tt == nullptr || st->empty() || tt->empty()) continue;
        AlignedTraces aligned = align_traces(*st, *tt);
        FeedbackPackage::CyclePackage cp;
        cp.cycle = cycle;
        cp.residuals = compute_residuals(aligned, cfg);
        cp.features = extract_features(aligned);
        cp.events = aligned.events;
        pkg.cycles.push_back(std::move(cp));
    }
    return pkg;
}

namespace {

void put_opt(ordered_json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
}

ordered_json residuals_to_json(const ResidualSet& r) {
    ordered_json j = ordered_json::object();
    put_opt(j, "capacity_mape", r.capacity_mape);
    put_opt(j, "voltage_rmse", r.voltage_rmse);
    put_opt(j, "voltage_mape", r.voltage_mape);
    put_opt(j, "current_mape", r.current_mape);
    put_opt(j, "total_mape", r.total_mape);
    return j;
}

ordered_json features_to_json(const FeatureSet& f) {
    ordered_json j = ordered_json::object();
    put_opt(j, "cc_charge_time_mismatch_s", f.cc_charge_time_mismatch_s);
    put_opt(j, "plateau_shift_v", f.plateau_shift_v);
    put_opt(j, "cv_fraction_delta", f.cv_fraction_delta);
    put_opt(j, "capacity_delta_pct", f.capacity_delta_pct);
    put_opt(j, "end_voltage_delta_v", f.end_voltage_delta_v);
    return j;
}

std::optional<double> get_opt(const ordered_json& j, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    return j.at(key).get<double>();
}

ResidualSet residuals_from_json(const ordered_json& j) {
    ResidualSet r;
    r.capacity_mape = get_opt(j, "capacity_mape");
    r.voltage_rmse = get_opt(j, "voltage_rmse");
    r.voltage_mape = get_opt(j, "voltage_mape");
    r.current_mape = get_opt(j, "current_mape");
    r.total_mape = get_opt(j, "total_mape");
    return r;
}

FeatureSet features_from_json(const ordered_json& j) {
    FeatureSet f;
    f.cc_charge_time_mismatch_s = get_opt(j, "cc_charge_time_mismatch_s");
    f.plateau_shift_v = get_opt(j, "plateau_shift_v");
    f.cv_fraction_delta = get_opt(j, "cv_fraction_delta");
    f.capacity_delta_pct = get_opt(j, "capacity_delta_pct");
    f.end_voltage_delta_v = get_opt(j, "end_voltage_delta_v");
    return f;
}

}  // namespace

std::string serialize_residuals(const ResidualSet& r) { return residuals_to_json(r).dump(); }

ResidualSet parse_residuals(const std::string& json_text) {
    return residuals_from_json(ordered_json::parse(json_text));
}

std::string serialize_features(const FeatureSet& f) { return features_to_json(f).dump(); }

FeatureSet parse_features(const std::string& json_text) {
    return features_from_json(ordered_json::parse(json_text));
}

std::string serialize_feedback(const FeedbackPackage& pkg) {
    ordered_json j = ordered_json::object();
    j["residuals"] = residuals_to_json(pkg.residuals);
    j["features"] = features_to_json(pkg.features);
    j["visual"] = pkg.visual;
    j["events"] = pkg.events;
    j["round"] = pkg.round;
    if (!pkg.cycles.empty()) {
        ordered_json cycles = ordered_json::array();
        for (const auto& c : pkg.cycles) {
            ordered_json cj = ordered_json::object();
            cj["cycle"] = c.cycle;
            cj["residuals"] = residuals_to_json(c.residuals);
            cj["features"] = features_to_json(c.features);
            cj["events"] = c.events;
            cycles.push_back(std::move(cj));
        }
        j["cycles"] = std::move(cycles);
    }
    return j.dump(2) + "\n";
}

FeedbackPackage parse_feedback(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("bad feedback JSON: ") + e.what());
    }
    FeedbackPackage pkg;
    pkg.residuals = residuals_from_json(j.at("residuals"));
    pkg.features = features_from_json(j.at("features"));
    pkg.visual = j.at("visual").get<std::string>();
    pkg.events = j.at("events").get<std::vector<std::string>>();
    pkg.round = j.at("round").get<int>();
    if (j.contains("cycles")) {
        for (const auto& cj : j.at("cycles")) {
            FeedbackPackage::CyclePackage c;
            c.cycle = cj.at("cycle").get<int>();
            c.residuals = residuals_from_json(cj.at("residuals"));
            c.features = features_from_json(cj.at("features"));
            c.events = cj.at("events").get<std::vector<std::string>>();
            pkg.cycles.push_back(std::move(c));
        }
    }
    return pkg;
}

}  // namespace cellcal

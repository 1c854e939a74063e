#include "cellcal/evaluate.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cellcal/metrics.hpp"

namespace cellcal {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

double mape(const std::vector<double>& sim, const std::vector<double>& obs) {
    if (sim.size() != obs.size()) {
        throw std::invalid_argument("series length mismatch");
    }
    if (sim.empty()) throw std::invalid_argument("empty series");
    const std::optional<double> m = series_mape_pct(sim, obs);
    if (!m) throw std::domain_error("every sample is masked");
    return *m;
}

double rmse(const std::vector<double>& sim, const std::vector<double>& obs) {
    if (sim.size() != obs.size()) {
        throw std::invalid_argument("series length mismatch");
    }
    if (sim.empty()) throw std::invalid_argument("empty series");
    return series_rmse(sim, obs);
}

ParameterError parameter_error(const std::map<std::string, double>& theta_hat,
                               const std::map<std::string, double>& theta_star,
                               const std::vector<std::string>& search_keys) {
    if (search_keys.empty()) throw std::invalid_argument("no search keys");
    ParameterError out;
    double sum_sq = 0.0;
    for (const auto& key : search_keys) {
        const auto hi = theta_hat.find(key);
        const auto si = theta_star.find(key);
        if (hi == theta_hat.end() || si == theta_star.end()) {
            throw ValidationError("unknown parameter: " + key);
        }
        if (hi->second <= 0.0 || si->second <= 0.0) {
            throw std::domain_error("nonpositive value for " + key);
        }
        const double lr = std::log(hi->second / si->second);
        out.log_ratios[key] = lr;
        sum_sq += lr * lr;
    }
    out.normalized = std::sqrt(sum_sq / static_cast<double>(search_keys.size()));
    return out;
}

ParameterError parameter_error(const ParameterSet& theta_hat,
                               const ParameterSet& theta_star,
                               const std::vector<std::string>& search_keys) {
    std::map<std::string, double> h, s;
    for (const auto& key : search_keys) {
        h[key] = theta_hat.value(key);
        s[key] = theta_star.value(key);
    }
    return parameter_error(h, s, search_keys);
}

namespace {

std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// Average ranks, ties shared.
std::vector<double> ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = shared;
        i = j + 1;
    }
    return r;
}

std::vector<double> cummin(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    double best = v.empty() ? 0.0 : v.front();
    for (std::size_t i = 0; i < v.size(); ++i) {
        best = std::min(best, v[i]);
        out[i] = best;
    }
    return out;
}

}  // namespace

CaseCorrelation within_case_correlation(const std::vector<CorrelationPoint>& points) {
    if (points.size() < 3) {
        throw std::invalid_argument("need at least 3 successful rounds");
    }
    std::vector<double> m, p;
    for (const auto& pt : points) {
        m.push_back(pt.total_mape);
        p.push_back(pt.param_error);
    }
    CaseCorrelation out;
    out.pearson_r = pearson(m, p);
    out.spearman_rho = pearson(ranks(m), ranks(p));

    const std::vector<double> bm = cummin(m), bp = cummin(p);
    out.monotone_co_decrease = true;
    for (std::size_t i = 1; i < bm.size(); ++i) {
        if ((bm[i] < bm[i - 1]) != (bp[i] < bp[i - 1])) {
            out.monotone_co_decrease = false;
            break;
        }
    }
    return out;
}

CorrelationReport correlation_report(const std::vector<std::string>& task_ids,
                                     const std::vector<CaseCorrelation>& cases) {
    if (task_ids.size() != cases.size()) {
        throw std::invalid_argument("task id / case count mismatch");
    }
    CorrelationReport out;
    out.task_ids = task_ids;
    out.cases = cases;
    double sr = 0.0, srho = 0.0;
    int nr = 0, nrho = 0, mono = 0;
    for (const auto& c : cases) {
        if (c.pearson_r) {
            sr += *c.pearson_r;
            ++nr;
        }
        if (c.spearman_rho) {
            srho += *c.spearman_rho;
            ++nrho;
        }
        if (c.monotone_co_decrease) ++mono;
    }
    if (nr > 0) out.mean_pearson_r = sr / nr;
    if (nrho > 0) out.mean_spearman_rho = srho / nrho;
    if (!cases.empty()) {
        out.monotone_fraction = static_cast<double>(mono) / cases.size();
    }
    return out;
}

std::string correlation_points_to_csv(const std::vector<CorrelationPoint>& points) {
    std::ostringstream out;
    out << "round,total_mape,param_error\n";
    char buf[64];
    for (const auto& p : points) {
        out << p.round << ",";
        std::snprintf(buf, sizeof buf, "%.17g", p.total_mape);
        out << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", p.param_error);
        out << buf << "\n";
    }
    return out.str();
}

std::vector<HeldOutEntry> held_out_validation(const ParameterSet& theta_hat,
                                              const std::vector<Protocol>& protocols,
                                              const ParameterSet& theta_star,
                                              const SimOptions& options) {
    std::vector<HeldOutEntry> out;
    for (const auto& protocol : protocols) {
        HeldOutEntry entry;
        entry.protocol_id = protocol.id;
        try {
            const SimulationTrace ref =
                run_protocol(theta_star, protocol, std::nullopt, std::nullopt, options);
            const SimulationTrace hat =
                run_protocol(theta_hat, protocol, std::nullopt, std::nullopt, options);
            if (!is_success(ref.event) || !is_success(hat.event)) {
                entry.failed = true;
            } else {
                // Compare on the overlapping time range, resampled onto the
                // reference grid.
                const double t_end = std::min(ref.time_s.back(), hat.time_s.back());
                std::vector<double> rv, hv;
                std::size_t j = 0;
                for (std::size_t i = 0; i < ref.size() && ref.time_s[i] <= t_end; ++i) {
                    const double t = ref.time_s[i];
                    while (j + 1 < hat.size() && hat.time_s[j + 1] <= t) ++j;
                    double v = hat.voltage_v[j];
                    if (j + 1 < hat.size() && hat.time_s[j + 1] > hat.time_s[j]) {
                        const double w =
                            (t - hat.time_s[j]) / (hat.time_s[j + 1] - hat.time_s[j]);
                        if (w > 0.0 && w <= 1.0) {
                            v = hat.voltage_v[j] +
                                w * (hat.voltage_v[j + 1] - hat.voltage_v[j]);
                        }
                    }
                    rv.push_back(ref.voltage_v[i]);
                    hv.push_back(v);
                }
                entry.voltage_mape_pct = mape(hv, rv);
            }
        } catch (const std::exception&) {
            entry.failed = true;
        }
        out.push_back(std::move(entry));
    }
    return out;
}

EvalResult eval_result_from_run(const RunResult& result, const std::string& method) {
    EvalResult out;
    out.task_id = result.task_id;
    out.method = method;
    out.final_total_mape = result.best_total_mape;
    out.failed = result.reason == TerminationReason::Aborted || !result.best_total_mape;
    out.total_s = result.total_s;

    std::ifstream in(fs::path(result.run_dir) / "rounds.jsonl");
    std::string line;
    while (in && std::getline(in, line)) {
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception&) {
            continue;
        }
        if (j.value("round", -1) != result.best_round) continue;
        const auto& res = j.at("residuals");
        if (res.contains("voltage_rmse")) {
            out.final_voltage_rmse_v = res.at("voltage_rmse").get<double>();
        }
        break;
    }
    return out;
}

namespace {

std::string mode_of(const std::string& task_id) {
    const auto pos = task_id.find("__");
    return pos == std::string::npos ? "unknown" : task_id.substr(0, pos);
}

struct Accum {
    std::vector<double> mapes, rmses;
    int n = 0, failures = 0;
    double runtime_s = 0.0;
};

std::pair<std::optional<double>, std::optional<double>> mean_std(
    const std::vector<double>& v) {
    if (v.empty()) return {std::nullopt, std::nullopt};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / v.size())};
}

std::string fmt_opt(const std::optional<double>& v, const char* spec) {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, *v);
    return buf;
}

}  // namespace

SuiteReport aggregate_report(const std::vector<EvalResult>& results,
                             const BenchmarkManifest& manifest) {
    std::map<std::string, const BenchmarkTask*> tasks;
    for (const auto& t : manifest.tasks) tasks[t.id] = &t;

    // Key tuple serialized to keep std::map ordering deterministic.
    std::map<std::tuple<std::string, std::string, double, std::string>, Accum> groups;
    std::map<std::string, int> seen;
    for (const auto& r : results) {
        const auto it = tasks.find(r.task_id);
        if (it == tasks.end()) continue;
        ++seen[r.task_id];
        const BenchmarkTask& t = *it->second;
        Accum& a = groups[{mode_of(t.id), t.base, t.c_rate, r.method}];
        ++a.n;
        a.runtime_s += r.total_s;
        if (r.failed) {
            ++a.failures;
        } else {
            if (r.final_total_mape) a.mapes.push_back(*r.final_total_mape);
            if (r.final_voltage_rmse_v) a.rmses.push_back(*r.final_voltage_rmse_v);
        }
    }

    SuiteReport out;
    for (const auto& t : manifest.tasks) {
        if (!seen.count(t.id)) out.missing_tasks.push_back(t.id);
    }
    for (const auto& [key, a] : groups) {
        SuiteRow row;
        row.mode = std::get<0>(key);
        row.base = std::get<1>(key);
        row.c_rate = std::get<2>(key);
        row.method = std::get<3>(key);
        row.n = a.n;
        row.failures = a.failures;
        std::tie(row.mean_total_mape, row.std_total_mape) = mean_std(a.mapes);
        std::tie(row.mean_voltage_rmse_v, row.std_voltage_rmse_v) = mean_std(a.rmses);
        row.runtime_s = a.runtime_s;
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::string suite_report_to_csv(const SuiteReport& report) {
    std::ostringstream out;
    out << "mode,base,c_rate,method,n,failures,mean_total_mape_pct,"
           "std_total_mape_pct,mean_voltage_rmse_v,std_voltage_rmse_v,runtime_s\n";
    char buf[64];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%g", r.c_rate);
        out << r.mode << "," << r.base << "," << buf << "," << r.method << ","
            << r.n << "," << r.failures << "," << fmt_opt(r.mean_total_mape, "%.6f")
            << "," << fmt_opt(r.std_total_mape, "%.6f") << ","
            << fmt_opt(r.mean_voltage_rmse_v, "%.6f") << ","
            << fmt_opt(r.std_voltage_rmse_v, "%.6f") << ",";
        std::snprintf(buf, sizeof buf, "%.3f", r.runtime_s);
        out << buf << "\n";
    }
    for (const auto& id : report.missing_tasks) {
        out << "# missing," << id << "\n";
    }
    return out.str();
}

std::string suite_report_to_text(const SuiteReport& report) {
    std::vector<std::array<std::string, 8>> rows;
    rows.push_back({"mode", "base", "c_rate", "method", "n", "fail",
                    "total MAPE [%]", "voltage RMSE [V]"});
    char buf[64];
    for (const auto& r : report.rows) {
        std::array<std::string, 8> row;
        row[0] = r.mode;
        row[1] = r.base;
        std::snprintf(buf, sizeof buf, "%g", r.c_rate);
        row[2] = buf;
        row[3] = r.method;
        row[4] = std::to_string(r.n);
        row[5] = std::to_string(r.failures);
        row[6] = r.mean_total_mape
                     ? fmt_opt(r.mean_total_mape, "%.4f") + " +/- " +
                           fmt_opt(r.std_total_mape, "%.4f")
                     : std::string("-");
        row[7] = r.mean_voltage_rmse_v
                     ? fmt_opt(r.mean_voltage_rmse_v, "%.6f") + " +/- " +
                           fmt_opt(r.std_voltage_rmse_v, "%.6f")
                     : std::string("-");
        rows.push_back(std::move(row));
    }
    std::array<std::size_t, 8> width{};
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            width[i] = std::max(width[i], row[i].size());
        }
    }
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << row[i] << std::string(width[i] - row[i].size(), ' ');
            out << (i + 1 < row.size() ? "  " : "");
        }
        out << "\n";
    }
    if (!report.missing_tasks.empty()) {
        out << "\nmissing tasks:\n";
        for (const auto& id : report.missing_tasks) out << "  " << id << "\n";
    }
    return out.str();
}

}  // namespace cellcal

#include "cellcal/benchmark.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "cellcal/rng.hpp"

namespace cellcal {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_string(PerturbationMode m) {
    return m == PerturbationMode::Extreme ? "extreme" : "regular";
}

PerturbationMode perturbation_mode_from_string(const std::string& s) {
    if (s == "extreme") return PerturbationMode::Extreme;
    if (s == "regular") return PerturbationMode::Regular;
    throw std::invalid_argument("unknown perturbation mode: " + s);
}

namespace {

std::string op_name(OverrideOp op) {
    switch (op) {
        case OverrideOp::Multiply: return "multiply";
        case OverrideOp::Add: return "add";
        case OverrideOp::Set: return "set";
    }
    return "multiply";
}

OverrideOp op_from_name(const std::string& s) {
    if (s == "multiply") return OverrideOp::Multiply;
    if (s == "add") return OverrideOp::Add;
    if (s == "set") return OverrideOp::Set;
    throw std::invalid_argument("unknown override op: " + s);
}

PerturbationRule single(const std::string& id, const std::string& description,
                        const std::string& parameter, OverrideOp op, double amount) {
    PerturbationRule r;
    r.id = id;
    r.mode = PerturbationMode::Extreme;
    r.description = description;
    r.overrides.push_back({parameter, op, amount});
    return r;
}

}  // namespace

std::vector<PerturbationRule> extreme_rules() {
    using Op = OverrideOp;
    std::vector<PerturbationRule> rules;
    rules.push_back(single("neg_radius_x0.5", "halved negative particle radius",
                           pname::kNegParticleRadius, Op::Multiply, 0.5));
    rules.push_back(single("neg_radius_x2.0", "doubled negative particle radius",
                           pname::kNegParticleRadius, Op::Multiply, 2.0));
    rules.push_back(single("pos_radius_x0.5", "halved positive particle radius",
                           pname::kPosParticleRadius, Op::Multiply, 0.5));
    rules.push_back(single("pos_radius_x2.0", "doubled positive particle radius",
                           pname::kPosParticleRadius, Op::Multiply, 2.0));
    rules.push_back(single("neg_thickness_x0.75", "thinner negative electrode",
                           pname::kNegThickness, Op::Multiply, 0.75));
    rules.push_back(single("neg_thickness_x1.5", "thicker negative electrode",
                           pname::kNegThickness, Op::Multiply, 1.5));
    rules.push_back(single("pos_thickness_x0.75", "thinner positive electrode",
                           pname::kPosThickness, Op::Multiply, 0.75));
    rules.push_back(single("pos_thickness_x1.5", "thicker positive electrode",
                           pname::kPosThickness, Op::Multiply, 1.5));
    rules.push_back(single("neg_porosity_+0.05", "raised negative porosity",
                           pname::kNegPorosity, Op::Add, 0.05));
    rules.push_back(single("neg_porosity_-0.05", "lowered negative porosity",
                           pname::kNegPorosity, Op::Add, -0.05));
    rules.push_back(single("pos_porosity_+0.05", "raised positive porosity",
                           pname::kPosPorosity, Op::Add, 0.05));
    rules.push_back(single("pos_porosity_-0.05", "lowered positive porosity",
                           pname::kPosPorosity, Op::Add, -0.05));
    rules.push_back(single("neg_bruggeman_1.5", "negative Bruggeman coefficient 1.5",
                           pname::kNegBruggeman, Op::Set, 1.5));
    rules.push_back(single("neg_bruggeman_2.0", "negative Bruggeman coefficient 2.0",
                           pname::kNegBruggeman, Op::Set, 2.0));
    rules.push_back(single("neg_bruggeman_2.5", "negative Bruggeman coefficient 2.5",
                           pname::kNegBruggeman, Op::Set, 2.5));
    rules.push_back(single("pos_bruggeman_1.3", "positive Bruggeman coefficient 1.3",
                           pname::kPosBruggeman, Op::Set, 1.3));
    rules.push_back(single("pos_bruggeman_1.8", "positive Bruggeman coefficient 1.8",
                           pname::kPosBruggeman, Op::Set, 1.8));
    rules.push_back(single("pos_bruggeman_2.3", "positive Bruggeman coefficient 2.3",
                           pname::kPosBruggeman, Op::Set, 2.3));
    rules.push_back(single("sep_thickness_x0.7", "thinner separator",
                           pname::kSepThickness, Op::Multiply, 0.7));
    rules.push_back(single("sep_thickness_x1.3", "thicker separator",
                           pname::kSepThickness, Op::Multiply, 1.3));
    return rules;
}

std::vector<PerturbationRule> regular_combos() {
    using Op = OverrideOp;
    auto combo = [](const std::string& id, const std::string& description,
                    std::vector<ParameterOverride> overrides) {
        PerturbationRule r;
        r.id = id;
        r.mode = PerturbationMode::Regular;
        r.description = description;
        r.overrides = std::move(overrides);
        return r;
    };
    std::vector<PerturbationRule> rules;
    rules.push_back(combo("regular_01", "power-oriented cell with smaller particles and thinner electrodes",
                          {{pname::kNegParticleRadius, Op::Multiply, 0.7},
                           {pname::kPosParticleRadius, Op::Multiply, 0.7},
                           {pname::kNegThickness, Op::Multiply, 0.85},
                           {pname::kPosThickness, Op::Multiply, 0.9}}));
    rules.push_back(combo("regular_02", "energy-oriented cell with thicker, denser electrodes",
                          {{pname::kNegThickness, Op::Multiply, 1.10},
                           {pname::kPosThickness, Op::Multiply, 1.25},
                           {pname::kNegPorosity, Op::Add, -0.02},
                           {pname::kPosPorosity, Op::Add, -0.03}}));
    rules.push_back(combo("regular_03", "cathode with restricted electrolyte transport",
                          {{pname::kPosThickness, Op::Multiply, 1.25},
                           {pname::kPosPorosity, Op::Add, -0.05},
                           {pname::kPosBruggeman, Op::Set, 2.0}}));
    rules.push_back(combo("regular_04", "slow solid diffusion in both electrodes",
                          {{pname::kNegParticleRadius, Op::Multiply, 1.5},
                           {pname::kPosParticleRadius, Op::Multiply, 1.5}}));
    rules.push_back(combo("regular_05", "anode-dominated diffusion limitation",
                          {{pname::kNegParticleRadius, Op::Multiply, 1.8},
                           {pname::kNegThickness, Op::Multiply, 1.15}}));
    rules.push_back(combo("regular_06", "cathode-dominated diffusion limitation",
                          {{pname::kPosParticleRadius, Op::Multiply, 1.8},
                           {pname::kPosThickness, Op::Multiply, 1.15}}));
    rules.push_back(combo("regular_07", "open pore network with low tortuosity",
                          {{pname::kNegPorosity, Op::Add, 0.06},
                           {pname::kPosPorosity, Op::Add, 0.06},
                           {pname::kNegBruggeman, Op::Set, 1.5},
                           {pname::kPosBruggeman, Op::Set, 1.5}}));
    rules.push_back(combo("regular_08", "tight pore network with high tortuosity",
                          {{pname::kNegPorosity, Op::Add, -0.06},
                           {pname::kPosPorosity, Op::Add, -0.06},
                           {pname::kNegBruggeman, Op::Set, 2.0},
                           {pname::kPosBruggeman, Op::Set, 2.0}}));
    rules.push_back(combo("regular_09", "small anode particles with large cathode particles",
                          {{pname::kNegParticleRadius, Op::Multiply, 0.7},
                           {pname::kPosParticleRadius, Op::Multiply, 1.4}}));
    rules.push_back(combo("regular_10", "large anode particles with small cathode particles",
                          {{pname::kNegParticleRadius, Op::Multiply, 1.4},
                           {pname::kPosParticleRadius, Op::Multiply, 0.7}}));
    rules.push_back(combo("regular_11", "thin separator paired with thick electrodes",
                          {{pname::kSepThickness, Op::Multiply, 0.85},
                           {pname::kNegThickness, Op::Multiply, 1.20},
                           {pname::kPosThickness, Op::Multiply, 1.25}}));
    rules.push_back(combo("regular_12", "thick separator with reduced porosities",
                          {{pname::kSepThickness, Op::Multiply, 1.5},
                           {pname::kNegPorosity, Op::Add, -0.04},
                           {pname::kPosPorosity, Op::Add, -0.04}}));
    return rules;
}

ParameterSet apply_perturbation(const ParameterSet& base, const PerturbationRule& rule) {
    ParameterSet out = base;
    for (const auto& ov : rule.overrides) {
        const double old = out.value(ov.parameter);
        double v = old;
        switch (ov.op) {
            case OverrideOp::Multiply: v = old * ov.amount; break;
            case OverrideOp::Add: v = old + ov.amount; break;
            case OverrideOp::Set: v = ov.amount; break;
        }
        out.set_value(ov.parameter, v);
    }
    require_valid_physical(out);
    return out;
}

bool stability_filter(const ParameterSet& params, const Protocol& protocol,
                      const SimOptions& options) {
    try {
        require_valid_physical(params);
        SimulationTrace trace =
            run_protocol(params, protocol, std::nullopt, std::nullopt, options);
        return is_success(trace.event);
    } catch (const ValidationError&) {
        return false;
    }
}

bool sensitivity_filter(const ParameterSet& base, const ParameterSet& perturbed,
                        const Protocol& protocol, const SimOptions& options) {
    const SimulationTrace base_trace =
        run_protocol(base, protocol, std::nullopt, std::nullopt, options);
    const SimulationTrace pert_trace =
        run_protocol(perturbed, protocol, std::nullopt, std::nullopt, options);
    const double q_base = base_trace.discharge_capacity_ah();
    const double q_pert = pert_trace.discharge_capacity_ah();
    if (q_base <= 0.0) return false;
    return std::abs(q_pert - q_base) / q_base >= 0.01;
}

namespace {

std::string rate_tag(double c_rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%gC", c_rate);
    return buf;
}

struct Candidate {
    std::size_t index = 0;  // enumeration index within the mode
    const BaseChemistry* base = nullptr;
    double c_rate = 1.0;
    const PerturbationRule* rule = nullptr;
};

struct CandidateResult {
    bool valid = false;
    std::string reject_stage;   // "stability" or "sensitivity"
    std::string reject_detail;
    ParameterSet theta_star;
    SimulationTrace target;
};

CandidateResult evaluate_candidate(const Candidate& c, const SimOptions& sim) {
    CandidateResult r;
    ParameterSet theta_star;
    try {
        theta_star = apply_perturbation(c.base->params, *c.rule);
    } catch (const ValidationError& e) {
        r.reject_stage = "stability";
        r.reject_detail = e.what();
        return r;
    }
    const Protocol protocol = make_cccv_cycle(c.c_rate, c.base->params);
    SimulationTrace target;
    try {
        target = run_protocol(theta_star, protocol, std::nullopt, std::nullopt, sim);
    } catch (const ValidationError& e) {
        r.reject_stage = "stability";
        r.reject_detail = e.what();
        return r;
    }
    if (!is_success(target.event)) {
        r.reject_stage = "stability";
        r.reject_detail = to_string(target.event);
        return r;
    }
    if (!sensitivity_filter(c.base->params, theta_star, protocol, sim)) {
        r.reject_stage = "sensitivity";
        r.reject_detail = "capacity change below 1%";
        return r;
    }
    r.valid = true;
    r.theta_star = std::move(theta_star);
    r.target = std::move(target);
    return r;
}

}  // namespace

BenchmarkManifest generate_manifest(const ManifestOptions& options) {
    if (options.n_per_mode < 1) {
        throw std::invalid_argument("n_per_mode must be at least 1");
    }
    if (options.bases.empty() || options.c_rates.empty() || options.modes.empty()) {
        throw std::invalid_argument("bases, c_rates, and modes must be nonempty");
    }
    BenchmarkManifest manifest;
    manifest.suite_seed = options.seed;
    manifest.n_per_mode = options.n_per_mode;

    if (!options.output_dir.empty()) {
        fs::create_directories(fs::path(options.output_dir) / "traces");
    }

    for (const auto mode : options.modes) {
        const std::vector<PerturbationRule> rules =
            mode == PerturbationMode::Extreme ? extreme_rules() : regular_combos();
        const std::uint64_t mode_stream = static_cast<std::uint64_t>(mode);

        // Base-major enumeration: appending a new base later leaves every
        // existing candidate's index, and therefore its sampling key, intact.
        std::vector<Candidate> candidates;
        std::size_t index = 0;
        for (const auto& base : options.bases) {
            for (const double c_rate : options.c_rates) {
                for (const auto& rule : rules) {
                    candidates.push_back({index++, &base, c_rate, &rule});
                }
            }
        }
        manifest.filter_stats.candidates += static_cast<int>(candidates.size());

        std::vector<CandidateResult> results(candidates.size());
        unsigned workers = options.workers > 0
                               ? static_cast<unsigned>(options.workers)
                               : std::max(1u, std::thread::hardware_concurrency());
        workers = std::min<unsigned>(workers,
                                     static_cast<unsigned>(candidates.size()));
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= candidates.size()) return;
                results[i] = evaluate_candidate(candidates[i], options.sim);
            }
        };
        std::vector<std::thread> pool;
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
        for (auto& t : pool) t.join();

        // Sample without replacement by ordering the valid pool on a
        // counter-based key of (seed, mode, enumeration index).
        std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& res = results[i];
            const auto& c = candidates[i];
            if (res.valid) {
                keyed.emplace_back(
                    CounterRng::hash(options.seed, mode_stream, c.index), i);
            } else {
                if (res.reject_stage == "stability") {
                    ++manifest.filter_stats.stability_rejections;
                } else {
                    ++manifest.filter_stats.sensitivity_rejections;
                }
                manifest.filter_stats.rejections.push_back(
                    {c.base->name, c.rule->id, c.c_rate,
                     res.reject_stage + ": " + res.reject_detail});
            }
        }
        std::sort(keyed.begin(), keyed.end());
        if (static_cast<int>(keyed.size()) < options.n_per_mode) {
            manifest.shortfall = true;
        }
        keyed.resize(std::min<std::size_t>(
            keyed.size(), static_cast<std::size_t>(options.n_per_mode)));
        // Manifest order follows enumeration order, not key order.
        std::sort(keyed.begin(), keyed.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });

        for (const auto& [key, i] : keyed) {
            const auto& c = candidates[i];
            auto& res = results[i];
            BenchmarkTask task;
            task.id = to_string(mode) + "__" + c.base->name + "__" + c.rule->id +
                      "__" + rate_tag(c.c_rate);
            task.base = c.base->name;
            task.rule_id = c.rule->id;
            task.c_rate = c.c_rate;
            task.theta_init = c.base->params;
            task.theta_star = std::move(res.theta_star);
            task.target_trace = "traces/" + task.id + ".csv";
            task.seed = key;
            if (!options.output_dir.empty()) {
                save_trace_csv(res.target,
                               (fs::path(options.output_dir) / task.target_trace)
                                   .string());
            }
            manifest.tasks.push_back(std::move(task));
        }
    }
    return manifest;
}

namespace {

ordered_json params_to_json(const ParameterSet& p) {
    return ordered_json::parse(serialize_parameters(p));
}

ordered_json task_to_json(const BenchmarkTask& t, bool include_eval_only) {
    ordered_json j = ordered_json::object();
    j["id"] = t.id;
    j["base"] = t.base;
    j["rule_id"] = t.rule_id;
    j["c_rate"] = t.c_rate;
    j["theta_init"] = params_to_json(t.theta_init);
    j["target_trace"] = t.target_trace;
    j["seed"] = t.seed;
    if (include_eval_only) {
        j["eval_only"] = {{"theta_star", params_to_json(t.theta_star)}};
    }
    return j;
}

}  // namespace

std::string serialize_manifest(const BenchmarkManifest& m) {
    ordered_json j = ordered_json::object();
    j["suite_seed"] = m.suite_seed;
    j["n_per_mode"] = m.n_per_mode;
    j["shortfall"] = m.shortfall;
    ordered_json tasks = ordered_json::array();
    for (const auto& t : m.tasks) tasks.push_back(task_to_json(t, true));
    j["tasks"] = std::move(tasks);
    ordered_json rejections = ordered_json::array();
    for (const auto& r : m.filter_stats.rejections) {
        rejections.push_back({{"base", r.base},
                              {"rule_id", r.rule_id},
                              {"c_rate", r.c_rate},
                              {"reason", r.reason}});
    }
    j["filter_stats"] = {
        {"candidates", m.filter_stats.candidates},
        {"stability_rejections", m.filter_stats.stability_rejections},
        {"sensitivity_rejections", m.filter_stats.sensitivity_rejections},
        {"rejections", std::move(rejections)}};
    return j.dump(2) + "\n";
}

BenchmarkManifest parse_manifest(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("bad manifest JSON: ") + e.what());
    }
    BenchmarkManifest m;
    m.suite_seed = j.at("suite_seed").get<std::uint64_t>();
    m.n_per_mode = j.at("n_per_mode").get<int>();
    m.shortfall = j.at("shortfall").get<bool>();
    for (const auto& tj : j.at("tasks")) {
        BenchmarkTask t;
        t.id = tj.at("id").get<std::string>();
        t.base = tj.at("base").get<std::string>();
        t.rule_id = tj.at("rule_id").get<std::string>();
        t.c_rate = tj.at("c_rate").get<double>();
        t.theta_init = parse_parameters(tj.at("theta_init").dump());
        t.target_trace = tj.at("target_trace").get<std::string>();
        t.seed = tj.at("seed").get<std::uint64_t>();
        if (tj.contains("eval_only")) {
            t.theta_star =
                parse_parameters(tj.at("eval_only").at("theta_star").dump());
        }
        m.tasks.push_back(std::move(t));
    }
    const auto& fj = j.at("filter_stats");
    m.filter_stats.candidates = fj.at("candidates").get<int>();
    m.filter_stats.stability_rejections = fj.at("stability_rejections").get<int>();
    m.filter_stats.sensitivity_rejections = fj.at("sensitivity_rejections").get<int>();
    for (const auto& rj : fj.at("rejections")) {
        m.filter_stats.rejections.push_back({rj.at("base").get<std::string>(),
                                             rj.at("rule_id").get<std::string>(),
                                             rj.at("c_rate").get<double>(),
                                             rj.at("reason").get<std::string>()});
    }
    return m;
}

void save_manifest(const BenchmarkManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << serialize_manifest(m);
}

BenchmarkManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str());
}

std::string serialize_task_public(const BenchmarkTask& task) {
    return task_to_json(task, false).dump(2) + "\n";
}

}  // namespace cellcal

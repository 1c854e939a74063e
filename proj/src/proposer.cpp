#include "cellcal/proposer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cellcal/gp.hpp"
#include "cellcal/rng.hpp"
#include "cellcal/sobol.hpp"

namespace cellcal {

using nlohmann::ordered_json;

std::string to_string(ProposerKind k) {
    switch (k) {
        case ProposerKind::Llm: return "llm";
        case ProposerKind::Bo: return "bo";
        case ProposerKind::Random: return "random";
        case ProposerKind::Sobol: return "sobol";
        case ProposerKind::Scripted: return "scripted";
        case ProposerKind::CmaesStub: return "cmaes-stub";
    }
    return "random";
}

ProposerKind proposer_kind_from_string(const std::string& s) {
    if (s == "llm") return ProposerKind::Llm;
    if (s == "bo") return ProposerKind::Bo;
    if (s == "random") return ProposerKind::Random;
    if (s == "sobol") return ProposerKind::Sobol;
    if (s == "scripted") return ProposerKind::Scripted;
    if (s == "cmaes-stub") return ProposerKind::CmaesStub;
    throw std::invalid_argument("unknown proposer kind: " + s);
}

void validate_proposer_config(const ProposerConfig& cfg) {
    if (cfg.search_keys.empty()) {
        throw std::invalid_argument("proposer needs at least one search key");
    }
    for (const auto& key : cfg.search_keys) {
        auto it = cfg.bounds.find(key);
        if (it == cfg.bounds.end()) {
            throw std::invalid_argument("search key without bounds: " + key);
        }
        if (it->second.first > it->second.second) {
            throw std::invalid_argument("inverted bounds for: " + key);
        }
    }
}

namespace {

// Log scaling for strictly positive bounds, linear otherwise.
double to_unit(double v, double lo, double hi) {
    if (hi <= lo) return 0.0;
    if (lo > 0.0) return (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo));
    return (v - lo) / (hi - lo);
}

double from_unit(double u, double lo, double hi) {
    if (hi <= lo) return lo;
    if (lo > 0.0) return std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
    return lo + u * (hi - lo);
}

// Finds top-level balanced {...} spans, string-aware.
std::vector<std::pair<std::size_t, std::size_t>> object_spans(const std::string& text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t j = i;
        for (; j < text.size(); ++j) {
            const char c = text[j];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) break;
            }
        }
        if (j < text.size() && depth == 0) {
            spans.emplace_back(i, j + 1);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return spans;
}

}  // namespace

ParameterUpdate parse_update(const std::string& text,
                             const std::vector<std::string>& search_keys) {
    const auto spans = object_spans(text);
    ordered_json obj;
    bool found = false;
    for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
        try {
            obj = ordered_json::parse(text.substr(it->first, it->second - it->first));
            found = true;
            break;
        } catch (const std::exception&) {
        }
    }
    if (!found) throw UpdateParseError("no well-formed JSON object in response");

    ParameterUpdate update;
    ordered_json params;
    if (obj.contains("updated_params")) {
        params = obj.at("updated_params");
        if (obj.contains("rationale") && obj.at("rationale").is_string()) {
            update.rationale = obj.at("rationale").get<std::string>();
        }
    } else {
        params = ordered_json::object();
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (it.key() == "rationale") {
                if (it->is_string()) update.rationale = it->get<std::string>();
            } else {
                params[it.key()] = *it;
            }
        }
    }
    if (!params.is_object() || params.empty()) {
        throw UpdateParseError("update contains no directives");
    }

    std::vector<std::string> unknown;
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (std::find(search_keys.begin(), search_keys.end(), it.key()) ==
            search_keys.end()) {
            unknown.push_back(it.key());
        }
    }
    if (!unknown.empty()) {
        std::string what = "update names parameters outside the search keys:";
        for (const auto& k : unknown) what += " '" + k + "'";
        throw UnknownKeyError(what);
    }

    for (auto it = params.begin(); it != params.end(); ++it) {
        UpdateDirective d;
        if (it->is_number()) {
            d.kind = UpdateDirective::Kind::Absolute;
            d.value = it->get<double>();
        } else if (it->is_string()) {
            const std::string s = it->get<std::string>();
            if (s.empty() || s[0] != '*') {
                throw UpdateParseError("directive for '" + it.key() +
                                       "' must be a number or \"*factor\": " + s);
            }
            double factor = 0.0;
            try {
                std::size_t pos = 0;
                factor = std::stod(s.substr(1), &pos);
                if (pos != s.size() - 1) throw std::invalid_argument(s);
            } catch (const std::exception&) {
                throw UpdateParseError("bad multiplicative directive: " + s);
            }
            if (factor <= 0.0) {
                throw ProposerError("nonpositive factor for '" + it.key() +
                                    "': " + s);
            }
            d.kind = UpdateDirective::Kind::Multiplicative;
            d.value = factor;
        } else {
            throw UpdateParseError("directive for '" + it.key() +
                                   "' must be a number or \"*factor\"");
        }
        update.directives[it.key()] = d;
    }
    return update;
}

namespace {

// Repairs the coupled physical invariants by adjusting only the given key.
bool repair_key(ParameterSet& p, const std::string& key) {
    const double margin = 1e-9;
    auto clamp_into = [&](double v) {
        const auto& e = p.at(key);
        return std::max(e.lower, std::min(e.upper, v));
    };
    if (key == pname::kNegPorosity &&
        p.value(key) + p.value(pname::kNegActiveFraction) > 1.0) {
        p.set_value(key, clamp_into(1.0 - p.value(pname::kNegActiveFraction) - margin));
        return true;
    }
    if (key == pname::kNegActiveFraction &&
        p.value(key) + p.value(pname::kNegPorosity) > 1.0) {
        p.set_value(key, clamp_into(1.0 - p.value(pname::kNegPorosity) - margin));
        return true;
    }
    if (key == pname::kPosPorosity &&
        p.value(key) + p.value(pname::kPosActiveFraction) > 1.0) {
        p.set_value(key, clamp_into(1.0 - p.value(pname::kPosActiveFraction) - margin));
        return true;
    }
    if (key == pname::kPosActiveFraction &&
        p.value(key) + p.value(pname::kPosPorosity) > 1.0) {
        p.set_value(key, clamp_into(1.0 - p.value(pname::kPosPorosity) - margin));
        return true;
    }
    if (key == pname::kNegInitConcentration &&
        p.value(key) >= p.value(pname::kNegMaxConcentration)) {
        p.set_value(key, clamp_into(p.value(pname::kNegMaxConcentration) *
                                    (1.0 - 1e-6)));
        return true;
    }
    if (key == pname::kPosInitConcentration &&
        p.value(key) >= p.value(pname::kPosMaxConcentration)) {
        p.set_value(key, clamp_into(p.value(pname::kPosMaxConcentration) *
                                    (1.0 - 1e-6)));
        return true;
    }
    if (key == pname::kNegMaxConcentration &&
        p.value(key) <= p.value(pname::kNegInitConcentration)) {
        p.set_value(key, clamp_into(p.value(pname::kNegInitConcentration) *
                                    (1.0 + 1e-6)));
        return true;
    }
    if (key == pname::kPosMaxConcentration &&
        p.value(key) <= p.value(pname::kPosInitConcentration)) {
        p.set_value(key, clamp_into(p.value(pname::kPosInitConcentration) *
                                    (1.0 + 1e-6)));
        return true;
    }
    if (key == pname::kLowerVoltageCutoff &&
        p.value(key) >= p.value(pname::kUpperVoltageCutoff)) {
        p.set_value(key, clamp_into(p.value(pname::kUpperVoltageCutoff) - 1e-3));
        return true;
    }
    if (key == pname::kUpperVoltageCutoff &&
        p.value(key) <= p.value(pname::kLowerVoltageCutoff)) {
        p.set_value(key, clamp_into(p.value(pname::kLowerVoltageCutoff) + 1e-3));
        return true;
    }
    return false;
}

}  // namespace

ParameterSet apply_update(const ParameterSet& theta, const ParameterUpdate& update,
                          double eta, std::vector<std::string>* events) {
    if (eta <= 0.0 || eta > 1.0) {
        throw std::invalid_argument("step size must lie in (0, 1]");
    }
    ParameterSet out = theta;
    for (const auto& [name, d] : update.directives) {
        const ParameterEntry& e = out.at(name);
        const double current = e.value;
        const double target = d.kind == UpdateDirective::Kind::Multiplicative
                                  ? current * d.value
                                  : d.value;
        const double damped = current + eta * (target - current);
        const double clamped = std::max(e.lower, std::min(e.upper, damped));
        if (clamped != damped && events) events->push_back("clamped:" + name);
        out.set_value(name, clamped);
    }

    if (!validate_physical(out).empty()) {
        for (const auto& [name, d] : update.directives) {
            if (repair_key(out, name) && events) {
                events->push_back("repaired:" + name);
            }
        }
    }
    if (!validate_physical(out).empty()) {
        // Last resort: back touched keys out one at a time; theta itself is
        // assumed valid, so this terminates in a valid set.
        for (const auto& [name, d] : update.directives) {
            if (out.value(name) == theta.value(name)) continue;
            out.set_value(name, theta.value(name));
            if (events) events->push_back("reverted:" + name);
            if (validate_physical(out).empty()) break;
        }
    }
    require_valid_physical(out);
    return out;
}

ParameterUpdate random_propose(const ProposerConfig& cfg, int round) {
    validate_proposer_config(cfg);
    ParameterUpdate u;
    for (std::size_t i = 0; i < cfg.search_keys.size(); ++i) {
        const auto& key = cfg.search_keys[i];
        const auto [lo, hi] = cfg.bounds.at(key);
        const double r = static_cast<double>(CounterRng::hash(
                             cfg.seed, static_cast<std::uint64_t>(round), i) >>
                         11) *
                         0x1.0p-53;
        u.directives[key] = {UpdateDirective::Kind::Absolute, lo + (hi - lo) * r};
    }
    u.rationale = "uniform random proposal for round " + std::to_string(round);
    return u;
}

ParameterUpdate sobol_propose(const ProposerConfig& cfg, int round) {
    validate_proposer_config(cfg);
    const int d = static_cast<int>(cfg.search_keys.size());
    const std::uint64_t n =
        (round < 1 ? 1 : static_cast<std::uint64_t>(round)) + cfg.seed % 1024;
    const std::vector<double> p = SobolSequence::point(d, n);
    ParameterUpdate u;
    for (std::size_t i = 0; i < cfg.search_keys.size(); ++i) {
        const auto& key = cfg.search_keys[i];
        const auto [lo, hi] = cfg.bounds.at(key);
        u.directives[key] = {UpdateDirective::Kind::Absolute, lo + (hi - lo) * p[i]};
    }
    u.rationale = "low-discrepancy proposal for round " + std::to_string(round);
    return u;
}

namespace {

ParameterUpdate point_to_update(const std::vector<double>& unit,
                                const ProposerConfig& cfg,
                                const std::string& rationale) {
    ParameterUpdate u;
    for (std::size_t i = 0; i < cfg.search_keys.size(); ++i) {
        const auto& key = cfg.search_keys[i];
        const auto [lo, hi] = cfg.bounds.at(key);
        u.directives[key] = {UpdateDirective::Kind::Absolute,
                             from_unit(unit[i], lo, hi)};
    }
    u.rationale = rationale;
    return u;
}

}  // namespace

ParameterUpdate bo_propose(const std::vector<EvalPoint>& history,
                           const ProposerConfig& cfg) {
    validate_proposer_config(cfg);
    const int d = static_cast<int>(cfg.search_keys.size());
    if (d > 20) {
        throw std::invalid_argument("bo proposer supports at most 20 search keys");
    }
    const std::size_t n = history.size();
    if (n < static_cast<std::size_t>(2 * d)) {
        // Warm start: position depends only on how many points exist.
        return point_to_update(SobolSequence::point(d, n + 1), cfg,
                               "warm-start point " + std::to_string(n + 1));
    }

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), d);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            const auto& key = cfg.search_keys[static_cast<std::size_t>(j)];
            const auto [lo, hi] = cfg.bounds.at(key);
            const double v = history[i].values.at(key);
            X(static_cast<Eigen::Index>(i), j) =
                std::clamp(to_unit(v, lo, hi), 0.0, 1.0);
        }
        y(static_cast<Eigen::Index>(i)) = std::log(history[i].loss + 1e-12);
    }

    GaussianProcess gp;
    bool ok = false;
    try {
        gp.fit(X, y);
        ok = true;
    } catch (const std::exception&) {
        // Jittered retry: identical rows make the covariance singular.
        Eigen::MatrixXd Xj = X;
        for (Eigen::Index i = 0; i < Xj.rows(); ++i) {
            for (Eigen::Index j = 0; j < Xj.cols(); ++j) {
                const double r =
                    static_cast<double>(
                        CounterRng::hash(cfg.seed,
                                         static_cast<std::uint64_t>(i) + 7777,
                                         static_cast<std::uint64_t>(j)) >>
                        11) *
                    0x1.0p-53;
                Xj(i, j) = std::clamp(Xj(i, j) + 1e-6 * (r - 0.5), 0.0, 1.0);
            }
        }
        try {
            gp.fit(Xj, y);
            ok = true;
        } catch (const std::exception&) {
        }
    }
    if (!ok) {
        return point_to_update(SobolSequence::point(d, n + 1), cfg,
                               "fallback low-discrepancy point after surrogate failure");
    }

    const double best = y.minCoeff();
    auto score = [&](const std::vector<double>& x) {
        Eigen::VectorXd xe(d);
        for (int j = 0; j < d; ++j) xe(j) = x[static_cast<std::size_t>(j)];
        double mean = 0.0, var = 0.0;
        gp.predict(xe, mean, var);
        return log_expected_improvement(mean, var, best);
    };

    CounterRng rng(cfg.seed, 0x42c0ULL + n);
    std::vector<double> global_x;
    double global_val = -1e300;
    for (int s = 0; s < cfg.bo_multistart; ++s) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (auto& xi : x) xi = rng.next_double();
        double val = score(x);
        double radius = 0.25;
        for (int it = 0; it < 80; ++it) {
            std::vector<double> cand(x);
            for (auto& ci : cand) {
                ci = std::clamp(ci + radius * (2.0 * rng.next_double() - 1.0), 0.0,
                                1.0);
            }
            const double cval = score(cand);
            if (cval > val) {
                x = std::move(cand);
                val = cval;
            } else {
                radius *= 0.93;
            }
        }
        if (val > global_val) {
            global_val = val;
            global_x = x;
        }
    }
    return point_to_update(global_x, cfg, "surrogate acquisition maximizer");
}

ParameterUpdate scripted_propose(const std::vector<ParameterUpdate>& script,
                                 int round) {
    if (round < 1 || static_cast<std::size_t>(round) > script.size()) {
        throw ProposerError("replay script exhausted at round " +
                            std::to_string(round));
    }
    return script[static_cast<std::size_t>(round - 1)];
}

std::vector<ParameterUpdate> load_replay_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open replay file: " + path);
    std::vector<ParameterUpdate> updates;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        updates.push_back(parse_update_object(line));
    }
    return updates;
}

void save_replay_file(const std::vector<ParameterUpdate>& updates,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write replay file: " + path);
    for (const auto& u : updates) out << serialize_update(u) << "\n";
}

namespace {

std::string read_file_or_empty(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string update_instructions(const ProposerConfig& cfg) {
    std::string s =
        "Propose the next parameter update. The params should be chosen only "
        "from this search-key list:\n";
    for (const auto& key : cfg.search_keys) {
        const auto [lo, hi] = cfg.bounds.at(key);
        char buf[64];
        std::snprintf(buf, sizeof(buf), " (bounds %.6g to %.6g)", lo, hi);
        s += "- " + key + buf + "\n";
    }
    s += "Return the new values as dict (without name) in JSON format: "
         "{\"updated_params\": {<param name>: <number or \"*factor\" string>}, "
         "\"rationale\": <short explanation>}. A value like \"*1.2\" multiplies "
         "the current value by 1.2.\n";
    return s;
}

}  // namespace

std::pair<ParameterUpdate, ChatExchange> llm_propose(const FeedbackPackage& feedback,
                                                     const std::string& context,
                                                     const ProposerConfig& cfg,
                                                     LlmClient& client,
                                                     bool first_round) {
    validate_proposer_config(cfg);
    std::vector<ChatMessage> messages;
    messages.push_back(
        {"system",
         "You are a battery parameter expert. You tune electrochemical cell "
         "model parameters so the simulated charge/discharge curves match a "
         "measured target, reasoning from residuals, curve features, and the "
         "current-vs-time and voltage-vs-time overlay plots."});

    std::string body;
    if (first_round) {
        body += "This is the first calibration round. The simulation was run "
                "with the initial parameter values and compared against the "
                "target data.\n\n";
    } else {
        body += "Calibration continues. Memory and history:\n" + context + "\n";
    }
    body += "Latest feedback package:\n" + serialize_feedback(feedback) + "\n";
    if (first_round && !context.empty()) {
        body += "Background knowledge:\n" + context + "\n";
    }
    body += update_instructions(cfg);

    ChatMessage user{"user", body};
    if (cfg.llm.supports_images && !feedback.visual.empty()) {
        const std::string bytes = read_file_or_empty(feedback.visual);
        if (!bytes.empty()) user.image_base64 = base64_encode(bytes);
    }
    messages.push_back(std::move(user));

    ChatExchange exchange;
    try {
        ChatResult result = client.chat(messages);
        exchange.latency_s = result.latency_s;
        exchange.prompt_tokens = result.prompt_tokens;
        exchange.completion_tokens = result.completion_tokens;
        try {
            ParameterUpdate update = parse_update(result.content, cfg.search_keys);
            exchange.request = messages;
            exchange.response = result.content;
            return {std::move(update), std::move(exchange)};
        } catch (const UpdateParseError&) {
            messages.push_back({"assistant", result.content});
            messages.push_back({"user", "Please return only valid JSON"});
            ChatResult retry = client.chat(messages);
            exchange.latency_s += retry.latency_s;
            exchange.prompt_tokens += retry.prompt_tokens;
            exchange.completion_tokens += retry.completion_tokens;
            exchange.request = messages;
            exchange.response = retry.content;
            ParameterUpdate update = parse_update(retry.content, cfg.search_keys);
            return {std::move(update), std::move(exchange)};
        }
    } catch (const LlmError& e) {
        throw ProposerError(std::string("chat endpoint failure: ") + e.what());
    }
}

namespace {

class LlmProposer : public Proposer {
public:
    LlmProposer(ProposerConfig cfg, LlmClient* client)
        : cfg_(std::move(cfg)), client_(client) {
        if (client_ == nullptr) {
            throw std::invalid_argument("llm proposer needs a chat client");
        }
    }

    ParameterUpdate propose(const ProposeInput& input) override {
        static const FeedbackPackage kEmptyFeedback;
        const FeedbackPackage& fb =
            input.feedback != nullptr ? *input.feedback : kEmptyFeedback;
        auto [update, exchange] =
            llm_propose(fb, input.context, cfg_, *client_, input.first_round);
        exchanges_.push_back(std::move(exchange));
        return update;
    }

    const std::vector<ChatExchange>& exchanges() const override { return exchanges_; }

private:
    ProposerConfig cfg_;
    LlmClient* client_;
    std::vector<ChatExchange> exchanges_;
};

class BoProposer : public Proposer {
public:
    explicit BoProposer(ProposerConfig cfg) : cfg_(std::move(cfg)) {}
    ParameterUpdate propose(const ProposeInput& input) override {
        return bo_propose(input.history, cfg_);
    }

private:
    ProposerConfig cfg_;
};

class RandomProposer : public Proposer {
public:
    explicit RandomProposer(ProposerConfig cfg) : cfg_(std::move(cfg)) {}
    ParameterUpdate propose(const ProposeInput& input) override {
        return random_propose(cfg_, input.round);
    }

private:
    ProposerConfig cfg_;
};

class SobolProposer : public Proposer {
public:
    explicit SobolProposer(ProposerConfig cfg) : cfg_(std::move(cfg)) {}
    ParameterUpdate propose(const ProposeInput& input) override {
        return sobol_propose(cfg_, input.round);
    }

private:
    ProposerConfig cfg_;
};

class ScriptedProposer : public Proposer {
public:
    explicit ScriptedProposer(ProposerConfig cfg) : cfg_(std::move(cfg)) {}
    ParameterUpdate propose(const ProposeInput& input) override {
        return scripted_propose(cfg_.script, input.round);
    }

private:
    ProposerConfig cfg_;
};

class CmaesStubProposer : public Proposer {
public:
    ParameterUpdate propose(const ProposeInput&) override {
        throw ProposerError(
            "the cmaes proposer is a stub; use llm, bo, random, sobol, or "
            "scripted");
    }
};

}  // namespace

std::unique_ptr<Proposer> make_proposer(const ProposerConfig& cfg, LlmClient* client) {
    validate_proposer_config(cfg);
    switch (cfg.kind) {
        case ProposerKind::Llm: return std::make_unique<LlmProposer>(cfg, client);
        case ProposerKind::Bo: return std::make_unique<BoProposer>(cfg);
        case ProposerKind::Random: return std::make_unique<RandomProposer>(cfg);
        case ProposerKind::Sobol: return std::make_unique<SobolProposer>(cfg);
        case ProposerKind::Scripted: return std::make_unique<ScriptedProposer>(cfg);
        case ProposerKind::CmaesStub: return std::make_unique<CmaesStubProposer>();
    }
    throw std::invalid_argument("unknown proposer kind");
}

}  // namespace cellcal

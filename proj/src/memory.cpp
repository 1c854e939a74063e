#include "cellcal/memory.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cellcal {

using nlohmann::ordered_json;

namespace {

ordered_json update_to_json(const ParameterUpdate& u) {
    ordered_json params = ordered_json::object();
    for (const auto& [name, d] : u.directives) {
        if (d.kind == UpdateDirective::Kind::Multiplicative) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "*%.17g", d.value);
            params[name] = std::string(buf);
        } else {
            params[name] = d.value;
        }
    }
    ordered_json j = ordered_json::object();
    j["updated_params"] = std::move(params);
    if (!u.rationale.empty()) j["rationale"] = u.rationale;
    return j;
}

ParameterUpdate update_from_json(const ordered_json& j) {
    ParameterUpdate u;
    if (j.contains("rationale")) u.rationale = j.at("rationale").get<std::string>();
    const auto& params = j.at("updated_params");
    for (auto it = params.begin(); it != params.end(); ++it) {
        UpdateDirective d;
        if (it->is_string()) {
            const std::string s = it->get<std::string>();
            if (s.empty() || s[0] != '*') {
                throw std::runtime_error("bad update directive: " + s);
            }
            d.kind = UpdateDirective::Kind::Multiplicative;
            d.value = std::stod(s.substr(1));
        } else {
            d.kind = UpdateDirective::Kind::Absolute;
            d.value = it->get<double>();
        }
        u.directives[it.key()] = d;
    }
    return u;
}

}  // namespace

std::string serialize_update(const ParameterUpdate& update) {
    return update_to_json(update).dump();
}

ParameterUpdate parse_update_object(const std::string& json_text) {
    ordered_json j = ordered_json::parse(json_text);
    if (!j.contains("updated_params")) {
        ordered_json wrapped = ordered_json::object();
        ordered_json params = ordered_json::object();
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "rationale") {
                wrapped["rationale"] = *it;
            } else {
                params[it.key()] = *it;
            }
        }
        wrapped["updated_params"] = std::move(params);
        return update_from_json(wrapped);
    }
    return update_from_json(j);
}

std::string to_string(KnowledgeKind k) {
    switch (k) {
        case KnowledgeKind::Injected: return "injected";
        case KnowledgeKind::LearnedSensitivity: return "learned_sensitivity";
        case KnowledgeKind::RoundRecordNote: return "round_record";
    }
    return "injected";
}

KnowledgeKind knowledge_kind_from_string(const std::string& s) {
    if (s == "injected") return KnowledgeKind::Injected;
    if (s == "learned_sensitivity") return KnowledgeKind::LearnedSensitivity;
    if (s == "round_record") return KnowledgeKind::RoundRecordNote;
    throw std::invalid_argument("unknown knowledge kind: " + s);
}

bool RoundRecord::success() const {
    return std::find(events.begin(), events.end(), "simulation_success") != events.end();
}

void MemoryStore::add_knowledge(const KnowledgeEntry& entry) {
    if (entry.text.empty()) throw std::invalid_argument("empty knowledge text");
    if (entry.salience < 0.0) throw std::invalid_argument("negative salience");
    knowledge_.push_back(entry);
}

void MemoryStore::record_round(const RoundRecord& record) {
    const int expected = rounds_.empty() ? record.round : rounds_.back().round + 1;
    if (!rounds_.empty() && record.round != expected) {
        throw std::logic_error("round " + std::to_string(record.round) +
                               " breaks the sequence, expected " +
                               std::to_string(expected));
    }
    rounds_.push_back(record);
    if (record.success() && record.residuals.total_mape &&
        (!best_.valid() || *record.residuals.total_mape < best_.total_mape)) {
        best_.round = record.round;
        best_.total_mape = *record.residuals.total_mape;
        best_.values = record.applied_values;
    }
}

MemoryStore init_with_knowledge(const std::vector<std::string>& rule_texts) {
    MemoryStore store;
    std::set<std::string> seen;
    for (const auto& text : rule_texts) {
        if (text.empty() || !seen.insert(text).second) continue;
        KnowledgeEntry e;
        e.kind = KnowledgeKind::Injected;
        e.text = text;
        e.source = "seed";
        store.add_knowledge(e);
    }
    return store;
}

std::vector<std::string> default_knowledge_rules() {
    const std::string path = std::string(CELLCAL_DATA_DIR) + "/knowledge_rules.txt";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open knowledge rules: " + path);
    std::vector<std::string> rules;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') rules.push_back(line);
    }
    return rules;
}

namespace {

std::string format_pct(double pct) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%+.1f%%", pct);
    return buf;
}

std::string capacity_clause(double delta_pct) {
    const double mag = std::abs(delta_pct);
    if (mag < 0.1) return "had a negligible effect on capacity";
    const char* klass = mag < 1.0 ? "slightly" : (mag < 5.0 ? "moderately" : "strongly");
    return std::string(delta_pct > 0.0 ? "increased" : "decreased") + " capacity " +
           klass + " (" + format_pct(delta_pct) + ")";
}

}  // namespace

std::vector<KnowledgeEntry> summarize_warmup(const MemoryStore& store,
                                             const std::vector<RoundRecord>& records,
                                             const WarmupSummarizer& summarizer) {
    (void)store;
    if (records.empty()) {
        throw std::invalid_argument("summarize_warmup needs at least one record");
    }
    std::vector<KnowledgeEntry> out;
    std::set<std::string> seen;
    auto emit = [&](const std::string& text, int round, double salience) {
        if (text.empty() || !seen.insert(text).second) return;
        KnowledgeEntry e;
        e.kind = KnowledgeKind::LearnedSensitivity;
        e.text = text;
        e.source = "warmup";
        e.round = round;
        e.salience = salience;
        out.push_back(e);
    };

    if (summarizer) {
        for (const auto& text : summarizer(records)) emit(text, records.back().round, 1.0);
        return out;
    }

    const RoundRecord* baseline = &records.front();
    for (const auto& r : records) {
        if (r.proposed.empty()) {
            baseline = &r;
            break;
        }
    }

    for (const auto& r : records) {
        if (&r == baseline) continue;
        for (const auto& [name, d] : r.proposed.directives) {
            std::string change;
            std::optional<double> pct;
            auto base_it = baseline->applied_values.find(name);
            auto appl_it = r.applied_values.find(name);
            if (base_it != baseline->applied_values.end() &&
                appl_it != r.applied_values.end() && base_it->second != 0.0) {
                pct = 100.0 * (appl_it->second / base_it->second - 1.0);
            } else if (d.kind == UpdateDirective::Kind::Multiplicative) {
                pct = 100.0 * (d.value - 1.0);
            }
            if (pct) {
                change = "changing " + name + " by " + format_pct(*pct);
            } else {
                char buf[48];
                std::snprintf(buf, sizeof(buf), "%.6g", d.value);
                change = "setting " + name + " to " + buf;
            }

            if (!r.success()) {
                emit(change + " causes simulation failure", r.round, 1.0);
                continue;
            }

            std::string text = change;
            double salience = 0.0;
            if (r.features.capacity_delta_pct &&
                baseline->features.capacity_delta_pct) {
                const double dcap = *r.features.capacity_delta_pct -
                                    *baseline->features.capacity_delta_pct;
                text += " " + capacity_clause(dcap);
                salience = std::abs(dcap);
            } else {
                text += " had no measurable capacity effect";
            }
            if (r.features.cc_charge_time_mismatch_s &&
                baseline->features.cc_charge_time_mismatch_s) {
                const double dcc = *r.features.cc_charge_time_mismatch_s -
                                   *baseline->features.cc_charge_time_mismatch_s;
                if (dcc > 1.0) {
                    text += " and lengthened the CC charge time";
                } else if (dcc < -1.0) {
                    text += " and shortened the CC charge time";
                }
            }
            emit(text, r.round, salience);
        }
    }
    return out;
}

namespace {

std::string best_line(const BestSoFar& best) {
    if (!best.valid()) return "BEST SO FAR: none yet";
    char head[96];
    std::snprintf(head, sizeof(head), "BEST SO FAR: round %d, total MAPE %.4f%%,",
                  best.round, best.total_mape);
    std::string line = head;
    line += " values {";
    bool first = true;
    for (const auto& [name, v] : best.values) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        if (!first) line += ", ";
        line += name + ": " + buf;
        first = false;
    }
    line += "}";
    return line;
}

std::string round_line(const RoundRecord& r) {
    std::string line = "round " + std::to_string(r.round) + ": " +
                       serialize_update(r.proposed);
    if (r.residuals.total_mape) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), " -> total MAPE %.4f%%",
                      *r.residuals.total_mape);
        line += buf;
    }
    if (!r.events.empty()) {
        line += " (";
        for (std::size_t i = 0; i < r.events.size(); ++i) {
            if (i) line += ", ";
            line += r.events[i];
        }
        line += ")";
    }
    return line;
}

}  // namespace

std::string render_context(const MemoryStore& store, int token_budget) {
    if (token_budget <= 0) throw std::invalid_argument("token budget must be positive");
    const std::size_t char_budget = static_cast<std::size_t>(token_budget) * 4;

    std::vector<std::string> injected, learned;
    for (const auto& e : store.knowledge()) {
        (e.kind == KnowledgeKind::Injected ? injected : learned)
            .push_back("- " + e.text);
    }
    std::vector<std::string> round_lines;
    for (const auto& r : store.rounds()) round_lines.push_back(round_line(r));
    const std::string best = best_line(store.best());

    auto total_length = [&](std::size_t ni, std::size_t nl, std::size_t nr) {
        std::size_t n = best.size() + 1;
        if (ni) n += 16;  // section headers
        if (nl) n += 15;
        if (nr) n += 15;
        for (std::size_t i = 0; i < ni; ++i) n += injected[i].size() + 1;
        for (std::size_t i = learned.size() - nl; i < learned.size(); ++i) {
            n += learned[i].size() + 1;
        }
        for (std::size_t i = round_lines.size() - nr; i < round_lines.size(); ++i) {
            n += round_lines[i].size() + 1;
        }
        return n;
    };

    // Keep the newest suffix of each section; drop rounds first, then learned
    // rules, then injected knowledge. The best-so-far line never drops.
    std::size_t ni = injected.size(), nl = learned.size(), nr = round_lines.size();
    while (total_length(ni, nl, nr) > char_budget) {
        if (nr > 0) {
            --nr;
        } else if (nl > 0) {
            --nl;
        } else if (ni > 0) {
            --ni;
        } else {
            break;
        }
    }
    // Rounds and learned rules keep their newest suffix; injected knowledge
    // keeps its leading entries.
    std::string out;
    if (ni > 0) {
        out += "TEXT KNOWLEDGE:\n";
        for (std::size_t i = 0; i < ni; ++i) out += injected[i] + "\n";
    }
    if (nl > 0) {
        out += "LEARNED RULES:\n";
        for (std::size_t i = learned.size() - nl; i < learned.size(); ++i) {
            out += learned[i] + "\n";
        }
    }
    out += best + "\n";
    if (nr > 0) {
        out += "RECENT ROUNDS:\n";
        for (std::size_t i = round_lines.size() - nr; i < round_lines.size(); ++i) {
            out += round_lines[i] + "\n";
        }
    }
    return out;
}

std::string knowledge_entry_to_json_line(const KnowledgeEntry& entry) {
    ordered_json j = ordered_json::object();
    j["type"] = "knowledge";
    j["kind"] = to_string(entry.kind);
    j["text"] = entry.text;
    j["source"] = entry.source;
    if (entry.round) j["round"] = *entry.round;
    j["salience"] = entry.salience;
    return j.dump();
}

std::string round_record_to_json_line(const RoundRecord& record) {
    ordered_json j = ordered_json::object();
    j["type"] = "round";
    j["round"] = record.round;
    j["proposed"] = update_to_json(record.proposed);
    j["applied_values"] = record.applied_values;
    j["residuals"] = ordered_json::parse(serialize_residuals(record.residuals));
    j["features"] = ordered_json::parse(serialize_features(record.features));
    j["events"] = record.events;
    j["rationale"] = record.rationale;
    return j.dump();
}

std::string memory_to_jsonl(const MemoryStore& store) {
    std::string out;
    for (const auto& e : store.knowledge()) out += knowledge_entry_to_json_line(e) + "\n";
    for (const auto& r : store.rounds()) out += round_record_to_json_line(r) + "\n";
    return out;
}

MemoryStore memory_from_jsonl(const std::string& text) {
    MemoryStore store;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("bad memory JSONL line " +
                                     std::to_string(lineno) + ": " + e.what());
        }
        const std::string type = j.at("type").get<std::string>();
        if (type == "knowledge") {
            KnowledgeEntry e;
            e.kind = knowledge_kind_from_string(j.at("kind").get<std::string>());
            e.text = j.at("text").get<std::string>();
            e.source = j.at("source").get<std::string>();
            if (j.contains("round")) e.round = j.at("round").get<int>();
            e.salience = j.at("salience").get<double>();
            store.add_knowledge(e);
        } else if (type == "round") {
            RoundRecord r;
            r.round = j.at("round").get<int>();
            r.proposed = update_from_json(j.at("proposed"));
            r.applied_values =
                j.at("applied_values").get<std::map<std::string, double>>();
            r.residuals = parse_residuals(j.at("residuals").dump());
            r.features = parse_features(j.at("features").dump());
            r.events = j.at("events").get<std::vector<std::string>>();
            r.rationale = j.at("rationale").get<std::string>();
            store.record_round(r);
        } else {
            throw std::runtime_error("unknown memory record type: " + type);
        }
    }
    return store;
}

void save_memory_file(const MemoryStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write memory file: " + path);
    out << memory_to_jsonl(store);
}

MemoryStore load_memory_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open memory file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return memory_from_jsonl(buf.str());
}

}  // namespace cellcal

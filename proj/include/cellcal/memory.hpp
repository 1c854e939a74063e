#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellcal/feedback.hpp"
#include "cellcal/update.hpp"

namespace cellcal {

enum class KnowledgeKind { Injected, LearnedSensitivity, RoundRecordNote };

std::string to_string(KnowledgeKind k);
KnowledgeKind knowledge_kind_from_string(const std::string& s);

struct KnowledgeEntry {
    KnowledgeKind kind = KnowledgeKind::Injected;
    std::string text;
    std::string source;
    std::optional<int> round;
    double salience = 1.0;
};

struct RoundRecord {
    int round = 0;
    ParameterUpdate proposed;
    std::map<std::string, double> applied_values;  // search keys after projection
    ResidualSet residuals;
    FeatureSet features;
    std::vector<std::string> events;
    std::string rationale;

    bool success() const;
};

struct BestSoFar {
    int round = -1;
    double total_mape = 0.0;
    std::map<std::string, double> values;

    bool valid() const { return round >= 0; }
};

// Per-run memory: seeded knowledge, learned rules, and round history with a
// running best. Single writer per run.
class MemoryStore {
public:
    const std::vector<KnowledgeEntry>& knowledge() const { return knowledge_; }
    const std::vector<RoundRecord>& rounds() const { return rounds_; }
    const BestSoFar& best() const { return best_; }

    void add_knowledge(const KnowledgeEntry& entry);

    // Appends a round. Throws std::logic_error unless record.round continues
    // the sequence. Best-so-far moves only on a strict improvement by a
    // successful round.
    void record_round(const RoundRecord& record);

private:
    std::vector<KnowledgeEntry> knowledge_;
    std::vector<RoundRecord> rounds_;
    BestSoFar best_;
};

// Fresh store seeded with one injected entry per distinct rule text.
MemoryStore init_with_knowledge(const std::vector<std::string>& rule_texts);

// Shipped domain-knowledge corpus (data/knowledge_rules.txt, one rule per
// line).
std::vector<std::string> default_knowledge_rules();

using WarmupSummarizer =
    std::function<std::vector<std::string>(const std::vector<RoundRecord>&)>;

// Turns warm-up outcomes into learned sensitivity rules. With a summarizer
// its returned strings are used verbatim; otherwise a built-in heuristic
// derives one rule per perturbed parameter by comparing each record against
// the unperturbed baseline record (the one with an empty proposed update,
// else the first record). Effects below 0.1% capacity change are reported as
// negligible.
std::vector<KnowledgeEntry> summarize_warmup(const MemoryStore& store,
                                             const std::vector<RoundRecord>& records,
                                             const WarmupSummarizer& summarizer = {});

// Deterministic prompt context: injected knowledge, learned rules,
// best-so-far, then recent rounds newest-last. Oldest content is dropped
// first to fit roughly token_budget * 4 characters; the best-so-far line is
// always kept.
std::string render_context(const MemoryStore& store, int token_budget);

// JSONL persistence: one object per knowledge entry or round record.
std::string knowledge_entry_to_json_line(const KnowledgeEntry& entry);
std::string round_record_to_json_line(const RoundRecord& record);
std::string memory_to_jsonl(const MemoryStore& store);
MemoryStore memory_from_jsonl(const std::string& text);
void save_memory_file(const MemoryStore& store, const std::string& path);
MemoryStore load_memory_file(const std::string& path);

}  // namespace cellcal

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "cellcal/memory.hpp"

using namespace cellcal;

namespace {

RoundRecord make_round(int round, double total_mape, bool success = true) {
    RoundRecord r;
    r.round = round;
    r.applied_values = {{"p", 1.0 + round * 0.1}};
    r.residuals.total_mape = total_mape;
    r.events = {success ? "simulation_success" : "voltage_cutoff@step0"};
    return r;
}

}  // namespace

TEST_CASE("round sequence must stay contiguous") {
    MemoryStore store;
    store.record_round(make_round(1, 5.0));
    store.record_round(make_round(2, 4.0));
    CHECK_THROWS_AS(store.record_round(make_round(4, 3.0)), std::logic_error);
    CHECK_THROWS_AS(store.record_round(make_round(2, 3.0)), std::logic_error);
}

TEST_CASE("best-so-far moves only on strict improvement by a success") {
    MemoryStore store;
    store.record_round(make_round(1, 5.0));
    CHECK(store.best().round == 1);
    store.record_round(make_round(2, 5.0));  // tie, keeps the earlier round
    CHECK(store.best().round == 1);
    store.record_round(make_round(3, 1.0, false));  // failure never wins
    CHECK(store.best().round == 1);
    store.record_round(make_round(4, 2.5));
    CHECK(store.best().round == 4);
    CHECK(store.best().total_mape == doctest::Approx(2.5));
}

TEST_CASE("injected knowledge is deduplicated") {
    const MemoryStore store = init_with_knowledge({"rule a", "rule b", "rule a"});
    CHECK(store.knowledge().size() == 2);
    for (const auto& e : store.knowledge()) {
        CHECK(e.kind == KnowledgeKind::Injected);
    }
}

TEST_CASE("shipped knowledge corpus loads and skips comments") {
    const std::vector<std::string> rules = default_knowledge_rules();
    CHECK(rules.size() >= 5);
    for (const auto& r : rules) {
        CHECK(!r.empty());
        CHECK(r.front() != '#');
    }
}

TEST_CASE("context rendering orders sections and pins the best line") {
    MemoryStore store = init_with_knowledge({"porosity affects resistance"});
    KnowledgeEntry learned;
    learned.kind = KnowledgeKind::LearnedSensitivity;
    learned.text = "radius strongly reduces capacity";
    store.add_knowledge(learned);
    store.record_round(make_round(1, 5.0));
    store.record_round(make_round(2, 3.0));

    const std::string ctx = render_context(store, 2000);
    const auto knowledge_pos = ctx.find("TEXT KNOWLEDGE:");
    const auto learned_pos = ctx.find("LEARNED RULES:");
    const auto best_pos = ctx.find("BEST SO FAR:");
    const auto rounds_pos = ctx.find("RECENT ROUNDS:");
    REQUIRE(knowledge_pos != std::string::npos);
    REQUIRE(learned_pos != std::string::npos);
    REQUIRE(best_pos != std::string::npos);
    REQUIRE(rounds_pos != std::string::npos);
    CHECK(knowledge_pos < learned_pos);
    CHECK(learned_pos < best_pos);
    CHECK(best_pos < rounds_pos);
    CHECK(ctx.find("porosity affects resistance") != std::string::npos);

    // Tight budgets drop rounds and knowledge but never the best line.
    const std::string tiny = render_context(store, 20);
    CHECK(tiny.find("BEST SO FAR:") != std::string::npos);
    CHECK(tiny.size() < ctx.size());
}

TEST_CASE("warm-up summarization derives one rule per perturbed parameter") {
    MemoryStore store;
    std::vector<RoundRecord> records;

    RoundRecord baseline;  // unperturbed point, empty update
    baseline.round = 1;
    baseline.applied_values = {{"zz_param", 1.0}};
    baseline.residuals.total_mape = 2.0;
    baseline.residuals.capacity_mape = 0.0;
    baseline.events = {"simulation_success"};
    store.record_round(baseline);
    records.push_back(baseline);

    RoundRecord perturbed;
    perturbed.round = 2;
    perturbed.proposed.directives["zz_param"] = {UpdateDirective::Kind::Multiplicative, 1.2};
    perturbed.applied_values = {{"zz_param", 1.2}};
    perturbed.residuals.total_mape = 6.0;
    perturbed.residuals.capacity_mape = 3.0;
    perturbed.events = {"simulation_success"};
    store.record_round(perturbed);
    records.push_back(perturbed);

    const std::vector<KnowledgeEntry> rules = summarize_warmup(store, records);
    REQUIRE(!rules.empty());
    bool mentions_key = false;
    for (const auto& r : rules) {
        CHECK(r.kind == KnowledgeKind::LearnedSensitivity);
        if (r.text.find("zz_param") != std::string::npos) mentions_key = true;
    }
    CHECK(mentions_key);
}

TEST_CASE("a custom summarizer is used verbatim") {
    MemoryStore store;
    store.record_round(make_round(1, 2.0));
    const std::vector<KnowledgeEntry> rules = summarize_warmup(
        store, store.rounds(),
        [](const std::vector<RoundRecord>&) {
            return std::vector<std::string>{"custom rule"};
        });
    REQUIRE(rules.size() == 1);
    CHECK(rules.front().text == "custom rule");
}

TEST_CASE("JSONL persistence round trip") {
    namespace fs = std::filesystem;
    MemoryStore store = init_with_knowledge({"rule a"});
    store.record_round(make_round(1, 5.0));
    store.record_round(make_round(2, 3.0, false));

    const std::string text = memory_to_jsonl(store);
    const MemoryStore back = memory_from_jsonl(text);
    CHECK(memory_to_jsonl(back) == text);
    CHECK(back.rounds().size() == 2);
    CHECK(back.best().round == store.best().round);

    const fs::path path = fs::temp_directory_path() / "cellcal_memory_test.jsonl";
    save_memory_file(store, path.string());
    const MemoryStore loaded = load_memory_file(path.string());
    CHECK(memory_to_jsonl(loaded) == text);
    fs::remove(path);
}

TEST_CASE("update serialization round trip") {
    ParameterUpdate u;
    u.directives["a"] = {UpdateDirective::Kind::Absolute, 3.5};
    u.directives["b"] = {UpdateDirective::Kind::Multiplicative, 1.2};
    u.rationale = "test";
    const ParameterUpdate back = parse_update_object(serialize_update(u));
    CHECK(serialize_update(back) == serialize_update(u));
    CHECK(back.directives.at("a").kind == UpdateDirective::Kind::Absolute);
    CHECK(back.directives.at("b").kind == UpdateDirective::Kind::Multiplicative);
    CHECK(back.directives.at("b").value == doctest::Approx(1.2));
}

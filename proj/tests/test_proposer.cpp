#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

// glibc's resolv.h, pulled in transitively above, defines _res as a macro
// that collides with an Eigen parameter name.
#ifdef _res
#undef _res
#endif

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cellcal/gp.hpp"
#include "cellcal/params.hpp"
#include "cellcal/proposer.hpp"
#include "cellcal/sobol.hpp"

using namespace cellcal;

namespace {

const std::vector<std::string> kKeys = {"a", "b"};

ProposerConfig make_config(ProposerKind kind) {
    ProposerConfig cfg;
    cfg.kind = kind;
    cfg.search_keys = kKeys;
    cfg.bounds = {{"a", {1.0, 10.0}}, {"b", {0.1, 100.0}}};
    cfg.seed = 42;
    return cfg;
}

}  // namespace

TEST_CASE("parse_update accepts factors, absolutes, and wrappers") {
    const auto keys = std::vector<std::string>{"a", "b"};

    ParameterUpdate u = parse_update(R"({"a": "*1.2", "b": 3.5})", keys);
    CHECK(u.directives.at("a").kind == UpdateDirective::Kind::Multiplicative);
    CHECK(u.directives.at("a").value == doctest::Approx(1.2));
    CHECK(u.directives.at("b").kind == UpdateDirective::Kind::Absolute);
    CHECK(u.directives.at("b").value == doctest::Approx(3.5));

    u = parse_update(
        R"(Reasoning here. {"updated_params": {"a": "*0.9"}, "rationale": "shrink"})",
        keys);
    CHECK(u.directives.size() == 1);
    CHECK(u.rationale == "shrink");

    // The last well-formed object wins when the reply contains several.
    u = parse_update(R"(first {"a": 1.0} then {"a": 2.0})", keys);
    CHECK(u.directives.at("a").value == doctest::Approx(2.0));

    // Braces inside strings do not confuse the scanner.
    u = parse_update(R"({"rationale": "note } brace", "updated_params": {"a": 2.0}})",
                     keys);
    CHECK(u.directives.at("a").value == doctest::Approx(2.0));
}

TEST_CASE("parse_update failure modes") {
    const auto keys = std::vector<std::string>{"a"};
    CHECK_THROWS_AS(parse_update("no json here", keys), UpdateParseError);
    CHECK_THROWS_AS(parse_update("{broken", keys), UpdateParseError);
    CHECK_THROWS_AS(parse_update(R"({"unknown_key": 1.0})", keys), UnknownKeyError);
    CHECK_THROWS_AS(parse_update(R"({"a": "*-2.0"})", keys), ProposerError);
    CHECK_THROWS_AS(parse_update(R"({"a": "*0"})", keys), ProposerError);
}

TEST_CASE("apply_update damps, clamps, and repairs") {
    ParameterSet theta = default_physical_params();
    const double porosity = theta.value(pname::kNegPorosity);

    ParameterUpdate u;
    u.directives[pname::kNegPorosity] = {UpdateDirective::Kind::Absolute,
                                         porosity + 0.1};
    ParameterSet moved = apply_update(theta, u, 0.5);
    CHECK(moved.value(pname::kNegPorosity) == doctest::Approx(porosity + 0.05));

    // Multiplicative directive with full step.
    u.directives[pname::kNegPorosity] = {UpdateDirective::Kind::Multiplicative, 1.1};
    moved = apply_update(theta, u, 1.0);
    CHECK(moved.value(pname::kNegPorosity) == doctest::Approx(porosity * 1.1));

    // A huge factor clamps to the upper bound and records an event.
    std::vector<std::string> events;
    u.directives.clear();
    u.directives[pname::kNegParticleRadius] = {UpdateDirective::Kind::Multiplicative,
                                               100.0};
    moved = apply_update(theta, u, 1.0, &events);
    CHECK(moved.value(pname::kNegParticleRadius) ==
          doctest::Approx(theta.at(pname::kNegParticleRadius).upper));
    CHECK(!events.empty());

    // The result always validates, even when the directive would break a
    // coupled invariant.
    ParameterSet tight = theta;
    tight.set_value(pname::kNegActiveFraction, 0.55);
    tight.set_value(pname::kNegPorosity, 0.40);
    REQUIRE(validate_physical(tight).empty());
    u.directives.clear();
    u.directives[pname::kNegPorosity] = {UpdateDirective::Kind::Absolute, 0.6};
    events.clear();
    moved = apply_update(tight, u, 1.0, &events);
    CHECK(validate_physical(moved).empty());
    CHECK(!events.empty());
}

TEST_CASE("random and sobol proposals stay in bounds and are deterministic") {
    for (const ProposerKind kind : {ProposerKind::Random, ProposerKind::Sobol}) {
        const ProposerConfig cfg = make_config(kind);
        for (int round = 1; round <= 5; ++round) {
            const ParameterUpdate a = kind == ProposerKind::Random
                                          ? random_propose(cfg, round)
                                          : sobol_propose(cfg, round);
            const ParameterUpdate b = kind == ProposerKind::Random
                                          ? random_propose(cfg, round)
                                          : sobol_propose(cfg, round);
            CHECK(serialize_update(a) == serialize_update(b));
            for (const auto& key : kKeys) {
                REQUIRE(a.directives.count(key) == 1);
                const UpdateDirective& d = a.directives.at(key);
                CHECK(d.kind == UpdateDirective::Kind::Absolute);
                CHECK(d.value >= cfg.bounds.at(key).first);
                CHECK(d.value <= cfg.bounds.at(key).second);
            }
        }
    }
}

TEST_CASE("sobol sequence matches its closed-form points") {
    SobolSequence seq(2);
    for (std::uint64_t n = 1; n <= 8; ++n) {
        CHECK(seq.next() == SobolSequence::point(2, n));
    }
    // First dimension is the van der Corput sequence in base 2.
    CHECK(SobolSequence::point(1, 1)[0] == doctest::Approx(0.5));
    CHECK(SobolSequence::point(1, 2)[0] == doctest::Approx(0.75));
    CHECK(SobolSequence::point(1, 3)[0] == doctest::Approx(0.25));
    CHECK_THROWS(SobolSequence(SobolSequence::kMaxDimension + 1));
}

TEST_CASE("scripted proposer replays and then fails") {
    std::vector<ParameterUpdate> script(2);
    script[0].directives["a"] = {UpdateDirective::Kind::Absolute, 2.0};
    script[1].directives["a"] = {UpdateDirective::Kind::Multiplicative, 1.5};
    CHECK(scripted_propose(script, 1).directives.at("a").value == doctest::Approx(2.0));
    CHECK(scripted_propose(script, 2).directives.at("a").kind ==
          UpdateDirective::Kind::Multiplicative);
    CHECK_THROWS_AS(scripted_propose(script, 3), ProposerError);
}

TEST_CASE("replay file round trip") {
    namespace fs = std::filesystem;
    std::vector<ParameterUpdate> script(2);
    script[0].directives["a"] = {UpdateDirective::Kind::Absolute, 2.0};
    script[0].rationale = "step one";
    script[1].directives["b"] = {UpdateDirective::Kind::Multiplicative, 1.2};
    const fs::path path = fs::temp_directory_path() / "cellcal_script_test.jsonl";
    save_replay_file(script, path.string());
    const std::vector<ParameterUpdate> back = load_replay_file(path.string());
    REQUIRE(back.size() == 2);
    CHECK(serialize_update(back[0]) == serialize_update(script[0]));
    CHECK(serialize_update(back[1]) == serialize_update(script[1]));
    fs::remove(path);
}

TEST_CASE("BO warm start follows the low-discrepancy sequence") {
    const ProposerConfig cfg = make_config(ProposerKind::Bo);
    std::vector<EvalPoint> history;
    // With d = 2 the warm start covers the first 2 * d = 4 proposals.
    for (int n = 0; n < 4; ++n) {
        const ParameterUpdate u = bo_propose(history, cfg);
        const std::vector<double> expected =
            SobolSequence::point(2, static_cast<std::uint64_t>(n) + 1);
        int i = 0;
        for (const auto& key : kKeys) {
            const auto [lo, hi] = cfg.bounds.at(key);
            const double v = u.directives.at(key).value;
            CHECK(v >= lo);
            CHECK(v <= hi);
            // Log-scaled placement for positive bounds.
            const double unit = std::log(v / lo) / std::log(hi / lo);
            CHECK(unit == doctest::Approx(expected[static_cast<std::size_t>(i)])
                              .epsilon(1e-9));
            ++i;
        }
        EvalPoint pt;
        for (const auto& key : kKeys) pt.values[key] = u.directives.at(key).value;
        pt.loss = 1.0 + n;
        history.push_back(pt);
    }
}

TEST_CASE("BO model phase proposes in bounds, deterministically") {
    const ProposerConfig cfg = make_config(ProposerKind::Bo);
    std::vector<EvalPoint> history;
    // Quadratic loss with minimum at a = 3, b = 10.
    for (int n = 0; n < 8; ++n) {
        const std::vector<double> u = SobolSequence::point(2, static_cast<std::uint64_t>(n) + 1);
        EvalPoint pt;
        pt.values["a"] = 1.0 + 9.0 * u[0];
        pt.values["b"] = 0.1 + 99.9 * u[1];
        const double da = std::log(pt.values["a"] / 3.0);
        const double db = std::log(pt.values["b"] / 10.0);
        pt.loss = da * da + db * db;
        history.push_back(pt);
    }
    const ParameterUpdate a = bo_propose(history, cfg);
    const ParameterUpdate b = bo_propose(history, cfg);
    CHECK(serialize_update(a) == serialize_update(b));
    for (const auto& key : kKeys) {
        const double v = a.directives.at(key).value;
        CHECK(v >= cfg.bounds.at(key).first);
        CHECK(v <= cfg.bounds.at(key).second);
    }
}

TEST_CASE("GP recovers a smooth function and EI stays finite in the tail") {
    Eigen::MatrixXd X(9, 1);
    Eigen::VectorXd y(9);
    for (int i = 0; i < 9; ++i) {
        X(i, 0) = i / 8.0;
        y(i) = std::sin(3.0 * X(i, 0));
    }
    GaussianProcess gp;
    gp.fit(X, y);
    REQUIRE(gp.fitted());
    double mean = 0.0, var = 0.0;
    Eigen::VectorXd x(1);
    x(0) = 0.4;
    gp.predict(x, mean, var);
    CHECK(mean == doctest::Approx(std::sin(1.2)).epsilon(0.05));
    CHECK(var >= 0.0);

    // Deep-tail log EI is finite and decreasing in the mean.
    const double near = log_expected_improvement(1.0, 0.01, 0.9);
    const double far = log_expected_improvement(5.0, 0.01, 0.9);
    CHECK(std::isfinite(near));
    CHECK(std::isfinite(far));
    CHECK(far < near);
}

namespace {

struct MockServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::vector<std::string> request_bodies;
    std::vector<std::string> replies;
    std::atomic<std::size_t> call{0};

    explicit MockServer(std::vector<std::string> canned) : replies(std::move(canned)) {
        server.Post("/v1/chat/completions",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        const std::size_t i =
                            std::min(call.fetch_add(1), replies.size() - 1);
                        request_bodies.push_back(req.body);
                        nlohmann::json reply = {
                            {"choices",
                             {{{"message",
                                {{"role", "assistant"}, {"content", replies[i]}}}}}},
                            {"usage",
                             {{"prompt_tokens", 10}, {"completion_tokens", 5}}}};
                        res.set_content(reply.dump(), "application/json");
                    });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~MockServer() {
        server.stop();
        thread.join();
    }
};

}  // namespace

TEST_CASE("LLM proposer parses a good reply on the first try") {
    MockServer mock({R"({"updated_params": {"a": "*1.2"}, "rationale": "ok"})"});
    ProposerConfig cfg = make_config(ProposerKind::Llm);
    cfg.llm.base_url = "http://127.0.0.1:" + std::to_string(mock.port);
    LlmClient client(cfg.llm);

    FeedbackPackage feedback;
    feedback.residuals.total_mape = 4.2;
    feedback.events = {"simulation_success"};
    const auto [update, exchange] = llm_propose(feedback, "CTX", cfg, client, true);
    CHECK(update.directives.at("a").kind == UpdateDirective::Kind::Multiplicative);
    CHECK(update.directives.at("a").value == doctest::Approx(1.2));
    CHECK(update.rationale == "ok");
    REQUIRE(mock.request_bodies.size() == 1);
    CHECK(mock.request_bodies[0].find("You are a battery parameter expert") !=
          std::string::npos);
    CHECK(mock.request_bodies[0].find("CTX") != std::string::npos);
}

TEST_CASE("LLM proposer reprompts once on malformed output") {
    MockServer mock({"not json at all", R"({"a": 2.5})"});
    ProposerConfig cfg = make_config(ProposerKind::Llm);
    cfg.llm.base_url = "http://127.0.0.1:" + std::to_string(mock.port);
    LlmClient client(cfg.llm);

    FeedbackPackage feedback;
    const auto [update, exchange] = llm_propose(feedback, "", cfg, client, false);
    CHECK(update.directives.at("a").value == doctest::Approx(2.5));
    REQUIRE(mock.request_bodies.size() == 2);
    CHECK(mock.request_bodies[1].find("Please return only valid JSON") !=
          std::string::npos);
}

TEST_CASE("LLM proposer gives up after the reprompt") {
    MockServer mock({"still not json", "also not json"});
    ProposerConfig cfg = make_config(ProposerKind::Llm);
    cfg.llm.base_url = "http://127.0.0.1:" + std::to_string(mock.port);
    LlmClient client(cfg.llm);
    FeedbackPackage feedback;
    CHECK_THROWS_AS(llm_propose(feedback, "", cfg, client, false), ProposerError);
}

TEST_CASE("chat exchanges are audited verbatim") {
    namespace fs = std::filesystem;
    MockServer mock({R"({"a": 1.5})"});
    ProposerConfig cfg = make_config(ProposerKind::Llm);
    cfg.llm.base_url = "http://127.0.0.1:" + std::to_string(mock.port);
    LlmClient client(cfg.llm);
    const fs::path audit = fs::temp_directory_path() / "cellcal_audit_test.jsonl";
    fs::remove(audit);
    client.set_audit_path(audit.string());

    FeedbackPackage feedback;
    (void)llm_propose(feedback, "", cfg, client, true);

    std::ifstream in(audit);
    REQUIRE(in.good());
    std::string line;
    REQUIRE(std::getline(in, line));
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("request"));
    CHECK(j.contains("response"));
    CHECK(j.contains("status"));
    fs::remove(audit);
}

TEST_CASE("make_proposer wires every kind") {
    for (const ProposerKind kind :
         {ProposerKind::Bo, ProposerKind::Random, ProposerKind::Sobol}) {
        const ProposerConfig cfg = make_config(kind);
        const std::unique_ptr<Proposer> p = make_proposer(cfg);
        ProposeInput in;
        in.round = 1;
        const ParameterUpdate u = p->propose(in);
        CHECK(u.directives.size() == kKeys.size());
    }
    ProposerConfig cfg = make_config(ProposerKind::Scripted);
    cfg.script.resize(1);
    cfg.script[0].directives["a"] = {UpdateDirective::Kind::Absolute, 2.0};
    const std::unique_ptr<Proposer> p = make_proposer(cfg);
    ProposeInput in;
    in.round = 1;
    CHECK(p->propose(in).directives.at("a").value == doctest::Approx(2.0));
}

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cellcal/feedback.hpp"
#include "cellcal/llm_client.hpp"
#include "cellcal/params.hpp"
#include "cellcal/update.hpp"

namespace cellcal {

enum class ProposerKind { Llm, Bo, Random, Sobol, Scripted, CmaesStub };

std::string to_string(ProposerKind k);
ProposerKind proposer_kind_from_string(const std::string& s);

struct ProposerConfig {
    ProposerKind kind = ProposerKind::Random;
    std::vector<std::string> search_keys;
    std::map<std::string, std::pair<double, double>> bounds;  // name -> [lo, hi]
    std::uint64_t seed = 1234;
    LlmSettings llm;
    std::vector<ParameterUpdate> script;
    // Recorded in run metadata; the implementation is fixed to these choices.
    std::string bo_kernel = "matern52";
    std::string bo_acquisition = "log_ei";
    int bo_multistart = 64;
};

// Throws std::invalid_argument on empty search keys or keys without bounds.
void validate_proposer_config(const ProposerConfig& cfg);

class ProposerError : public std::runtime_error {
public:
    explicit ProposerError(const std::string& what) : std::runtime_error(what) {}
};

class UpdateParseError : public ProposerError {
public:
    explicit UpdateParseError(const std::string& what) : ProposerError(what) {}
};

class UnknownKeyError : public ProposerError {
public:
    explicit UnknownKeyError(const std::string& what) : ProposerError(what) {}
};

// Verbatim record of one proposal exchange with the model endpoint.
struct ChatExchange {
    std::vector<ChatMessage> request;
    std::string response;
    double latency_s = 0.0;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

// Extracts the last well-formed JSON object from free text and converts it to
// a ParameterUpdate. Accepts {"updated_params": {...}} or a bare directive
// dict; numbers are absolute values, strings "*x" multiplicative factors.
// Throws UpdateParseError / UnknownKeyError / ProposerError.
ParameterUpdate parse_update(const std::string& text,
                             const std::vector<std::string>& search_keys);

// Damped, projected application: each directive moves its parameter by the
// fraction eta of the proposed change, then clamps to bounds. Coupled
// invariant violations are repaired (or the key reverted) with an event
// recorded, so the result always validates.
ParameterSet apply_update(const ParameterSet& theta, const ParameterUpdate& update,
                          double eta, std::vector<std::string>* events = nullptr);

struct EvalPoint {
    std::map<std::string, double> values;  // search keys only
    double loss = 0.0;
};

// Prompts the configured chat endpoint with memory context plus serialized
// feedback and parses the reply; one reprompt on malformed output.
std::pair<ParameterUpdate, ChatExchange> llm_propose(const FeedbackPackage& feedback,
                                                     const std::string& context,
                                                     const ProposerConfig& cfg,
                                                     LlmClient& client,
                                                     bool first_round);

// Low-discrepancy warm start until 2 * d points exist, then a Gaussian
// process surrogate on log-scaled parameters with log-EI multistart search.
ParameterUpdate bo_propose(const std::vector<EvalPoint>& history,
                           const ProposerConfig& cfg);

ParameterUpdate random_propose(const ProposerConfig& cfg, int round);
ParameterUpdate sobol_propose(const ProposerConfig& cfg, int round);

// Returns script[round - 1]; rounds are 1-based. Throws ProposerError when
// the script is exhausted.
ParameterUpdate scripted_propose(const std::vector<ParameterUpdate>& script, int round);

std::vector<ParameterUpdate> load_replay_file(const std::string& path);
void save_replay_file(const std::vector<ParameterUpdate>& updates,
                      const std::string& path);

struct ProposeInput {
    int round = 0;
    bool first_round = false;
    const FeedbackPackage* feedback = nullptr;
    std::string context;
    std::vector<EvalPoint> history;
};

class Proposer {
public:
    virtual ~Proposer() = default;
    virtual ParameterUpdate propose(const ProposeInput& input) = 0;
    virtual const std::vector<ChatExchange>& exchanges() const {
        static const std::vector<ChatExchange> kEmpty;
        return kEmpty;
    }
};

// client may be null for non-LLM kinds.
std::unique_ptr<Proposer> make_proposer(const ProposerConfig& cfg,
                                        LlmClient* client = nullptr);

}  // namespace cellcal

#pragma once

#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellcal {

struct LlmSettings {
    std::string base_url = "http://127.0.0.1:8080";
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    // Environment variable holding the bearer token; empty value sends no
    // Authorization header.
    std::string api_key_env = "CELLCAL_LLM_API_KEY";
    double temperature = -1.0;  // < 0 leaves the endpoint default
    int max_retries = 2;
    double backoff_initial_s = 0.5;
    double timeout_s = 60.0;
    bool supports_images = false;
};

// Settings with base URL, path, and model overridden from CELLCAL_LLM_BASE_URL,
// CELLCAL_LLM_PATH, and CELLCAL_LLM_MODEL when present.
LlmSettings llm_settings_from_env();

struct ChatMessage {
    std::string role;
    std::string text;
    std::string image_base64;  // optional inline attachment
    std::string image_mime = "image/svg+xml";
};

struct ChatResult {
    std::string content;
    double latency_s = 0.0;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

class LlmError : public std::runtime_error {
public:
    explicit LlmError(const std::string& what) : std::runtime_error(what) {}
};

// Minimal chat-completions client. Retries transport errors and retryable
// HTTP statuses with exponential backoff; every request/response pair is
// appended verbatim to the audit file when one is configured.
class LlmClient {
public:
    explicit LlmClient(LlmSettings settings);

    const LlmSettings& settings() const { return settings_; }
    void set_audit_path(const std::string& path) { audit_path_ = path; }

    // Throws LlmError once retries are exhausted or on a non-retryable
    // status.
    ChatResult chat(const std::vector<ChatMessage>& messages);

private:
    LlmSettings settings_;
    std::string audit_path_;
    std::mutex audit_mutex_;
};

std::string base64_encode(const std::string& bytes);

}  // namespace cellcal

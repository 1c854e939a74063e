#include "cellcal/llm_client.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace cellcal {

using nlohmann::ordered_json;

LlmSettings llm_settings_from_env() {
    LlmSettings s;
    if (const char* v = std::getenv("CELLCAL_LLM_BASE_URL")) s.base_url = v;
    if (const char* v = std::getenv("CELLCAL_LLM_PATH")) s.path = v;
    if (const char* v = std::getenv("CELLCAL_LLM_MODEL")) s.model = v;
    return s;
}

std::string base64_encode(const std::string& bytes) {
    static const char table[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                           static_cast<unsigned char>(bytes[i + 2]);
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += table[(v >> 6) & 63];
        out += table[v & 63];
        i += 3;
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += table[(v >> 6) & 63];
        out += "=";
    }
    return out;
}

LlmClient::LlmClient(LlmSettings settings) : settings_(std::move(settings)) {}

namespace {

ordered_json message_to_json(const ChatMessage& m) {
    ordered_json j = ordered_json::object();
    j["role"] = m.role;
    if (m.image_base64.empty()) {
        j["content"] = m.text;
    } else {
        ordered_json parts = ordered_json::array();
        parts.push_back({{"type", "text"}, {"text", m.text}});
        parts.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url", "data:" + m.image_mime + ";base64," + m.image_base64}}}});
        j["content"] = std::move(parts);
    }
    return j;
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

}  // namespace

ChatResult LlmClient::chat(const std::vector<ChatMessage>& messages) {
    ordered_json body = ordered_json::object();
    body["model"] = settings_.model;
    ordered_json msgs = ordered_json::array();
    for (const auto& m : messages) msgs.push_back(message_to_json(m));
    body["messages"] = std::move(msgs);
    if (settings_.temperature >= 0.0) body["temperature"] = settings_.temperature;
    const std::string payload = body.dump();

    httplib::Client client(settings_.base_url);
    client.set_connection_timeout(static_cast<int>(settings_.timeout_s), 0);
    client.set_read_timeout(static_cast<int>(settings_.timeout_s), 0);
    httplib::Headers headers;
    if (!settings_.api_key_env.empty()) {
        if (const char* key = std::getenv(settings_.api_key_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }

    std::string last_error;
    for (int attempt = 0; attempt <= settings_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay =
                settings_.backoff_initial_s * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        const auto t0 = std::chrono::steady_clock::now();
        auto result = client.Post(settings_.path, headers, payload, "application/json");
        const double latency =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();

        const int status = result ? result->status : 0;
        const std::string response_body = result ? result->body : std::string{};
        if (!audit_path_.empty()) {
            std::lock_guard<std::mutex> lock(audit_mutex_);
            std::ofstream out(audit_path_, std::ios::app);
            if (out) {
                ordered_json line = ordered_json::object();
                line["attempt"] = attempt;
                line["request"] = body;
                line["status"] = status;
                line["response"] = response_body;
                line["latency_s"] = latency;
                out << line.dump() << "\n";
            }
        }

        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status != 200) {
            last_error = "HTTP " + std::to_string(result->status);
            if (retryable_status(result->status)) continue;
            throw LlmError("chat request failed: " + last_error);
        }

        ordered_json rj;
        try {
            rj = ordered_json::parse(result->body);
        } catch (const std::exception& e) {
            throw LlmError(std::string("bad chat response JSON: ") + e.what());
        }
        ChatResult out;
        out.latency_s = latency;
        try {
            out.content = rj.at("choices").at(0).at("message").at("content")
                              .get<std::string>();
        } catch (const std::exception& e) {
            throw LlmError(std::string("chat response missing content: ") + e.what());
        }
        if (rj.contains("usage")) {
            out.prompt_tokens = rj["usage"].value("prompt_tokens", 0);
            out.completion_tokens = rj["usage"].value("completion_tokens", 0);
        }
        return out;
    }
    throw LlmError("chat request failed after " +
                   std::to_string(settings_.max_retries + 1) + " attempts: " +
                   last_error);
}

}  // namespace cellcal

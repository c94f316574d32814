#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "buildevo/common.hpp"
#include "buildevo/dsl/parse.hpp"

// The LLM boundary. Provider is the only interface the evolution loop sees;
// implementations are the HTTP client below (OpenAI-compatible chat
// completions) and the deterministic mock (mock_provider.hpp). The API key
// is read exclusively from the environment, never from config files.

namespace buildevo {

enum class PromptOperator { init, crossover, mutation, reflect_short, reflect_long };

inline const char* to_string(PromptOperator op) {
    switch (op) {
        case PromptOperator::init: return "init";
        case PromptOperator::crossover: return "crossover";
        case PromptOperator::mutation: return "mutation";
        case PromptOperator::reflect_short: return "reflect_short";
        case PromptOperator::reflect_long: return "reflect_long";
    }
    return "?";
}

inline bool is_code_operator(PromptOperator op) {
    return op == PromptOperator::init || op == PromptOperator::crossover ||
           op == PromptOperator::mutation;
}

struct PromptBundle {
    std::string system;
    std::string user;
    PromptOperator op = PromptOperator::init;
    int token_budget_hint = 0;
};

struct ProviderResponse {
    std::string raw_text;
    std::optional<std::string> extracted;  // DSL source or reflection text
    int64_t latency_ms = 0;
    int attempt = 1;
};

struct ProviderUnavailable : std::runtime_error {
    explicit ProviderUnavailable(const std::string& why)
        : std::runtime_error("provider unavailable: " + why) {}
};

struct ResponseEmpty : std::runtime_error {
    ResponseEmpty() : std::runtime_error("provider returned an empty message") {}
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual ProviderResponse complete(const PromptBundle& bundle) = 0;
    virtual std::string name() const = 0;
};

// Returns the content of the first ``` fenced block (language tag ignored);
// without fences, the whole text only when it parses as a DSL program.
inline std::optional<std::string> extract_code(std::string_view raw) {
    const size_t open = raw.find("```");
    if (open != std::string_view::npos) {
        size_t begin = raw.find('\n', open);
        if (begin == std::string_view::npos) return std::nullopt;
        ++begin;
        const size_t close = raw.find("```", begin);
        if (close == std::string_view::npos) return std::nullopt;
        return std::string(trim(raw.substr(begin, close - begin)));
    }
    std::string whole(trim(raw));
    if (dsl::try_parse(whole)) return whole;
    return std::nullopt;
}

// Fills the extraction field by operator kind: code operators get the first
// fenced block, reflections the trimmed text.
inline ProviderResponse make_response(PromptOperator op, std::string raw, int attempt,
                                      int64_t latency_ms) {
    ProviderResponse r;
    r.raw_text = std::move(raw);
    r.attempt = attempt;
    r.latency_ms = latency_ms;
    if (is_code_operator(op)) {
        r.extracted = extract_code(r.raw_text);
    } else {
        std::string t(trim(r.raw_text));
        if (!t.empty()) r.extracted = std::move(t);
    }
    return r;
}

// ── HTTP implementation ─────────────────────────────────────────

struct HttpResult {
    int status = 0;
    std::string body;
    std::string error;  // transport-level failure; empty on an HTTP response
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& base_url, const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body, int timeout_sec) = 0;
};

struct HttpProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o-mini";
    std::string api_key;
    double temperature = 0.7;
    int timeout_sec = 60;
    int max_attempts = 3;
    int backoff_initial_ms = 1000;  // doubles per retry

    static HttpProviderConfig from_env() {
        HttpProviderConfig c;
        if (const char* v = std::getenv("BUILDEVO_BASE_URL")) c.base_url = v;
        if (const char* v = std::getenv("BUILDEVO_MODEL")) c.model = v;
        if (const char* v = std::getenv("BUILDEVO_API_KEY")) c.api_key = v;
        return c;
    }
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

class HttpProvider : public Provider {
public:
    HttpProvider(HttpProviderConfig config, std::shared_ptr<HttpTransport> transport,
                 SleepFn sleep = default_sleep)
        : config_(std::move(config)),
          transport_(std::move(transport)),
          sleep_(std::move(sleep)) {}

    std::string name() const override { return "http"; }

    ProviderResponse complete(const PromptBundle& bundle) override {
        nlohmann::ordered_json body;
        body["model"] = config_.model;
        body["messages"] = {{{"role", "system"}, {"content", bundle.system}},
                            {{"role", "user"}, {"content", bundle.user}}};
        body["temperature"] = config_.temperature;
        const std::string payload = body.dump();
        std::vector<std::pair<std::string, std::string>> headers;
        if (!config_.api_key.empty())
            headers.emplace_back("Authorization", "Bearer " + config_.api_key);

        std::string last_error;
        int backoff_ms = config_.backoff_initial_ms;
        for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
            const auto t0 = std::chrono::steady_clock::now();
            HttpResult res = transport_->post(config_.base_url, "/chat/completions",
                                              headers, payload, config_.timeout_sec);
            const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count();
            if (res.error.empty() && res.status == 200) {
                std::optional<std::string> content;
                try {
                    const auto j = nlohmann::json::parse(res.body);
                    content = j.at("choices").at(0).at("message").at("content")
                                  .get<std::string>();
                } catch (const std::exception& e) {
                    last_error = std::string("malformed response body: ") + e.what();
                }
                if (content) {
                    if (trim(*content).empty()) throw ResponseEmpty();
                    return make_response(bundle.op, std::move(*content), attempt, latency);
                }
            } else {
                last_error = !res.error.empty()
                                 ? res.error
                                 : "HTTP status " + std::to_string(res.status);
            }
            if (attempt < config_.max_attempts) {
                sleep_(std::chrono::milliseconds(backoff_ms));
                backoff_ms *= 2;
            }
        }
        throw ProviderUnavailable(last_error);
    }

private:
    static void default_sleep(std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    }

    HttpProviderConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    SleepFn sleep_;
};

}  // namespace buildevo

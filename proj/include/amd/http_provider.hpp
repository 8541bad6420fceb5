#pragma once

#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "amd/embedder.hpp"
#include "amd/errors.hpp"
#include "amd/llm.hpp"

namespace amd {

namespace detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

inline SplitUrl split_url(const std::string& url) {
    size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("endpoint is not a URL: '" + url + "'");
    size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Connection-level failures and 5xx are retryable; 4xx will not heal.
inline nlohmann::json post_json(const std::string& endpoint, const nlohmann::json& body,
                                const std::string& api_key, int timeout_sec) {
    auto url = split_url(endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(timeout_sec, 0);
    client.set_read_timeout(timeout_sec, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status >= 500)
        throw TransportError("server error " + std::to_string(res->status) + " from " + endpoint);
    if (res->status != 200)
        throw Error("provider returned status " + std::to_string(res->status) + ": " + res->body);
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw Error("provider returned non-JSON body");
    return parsed;
}

}  // namespace detail

// Chat-completion transport. Request/response schema documented in
// docs/provider-protocol.md (schema version 1).
class HttpLlmProvider : public LlmProvider {
public:
    explicit HttpLlmProvider(LlmProviderConfig config) : config_(std::move(config)) {}

    std::string complete(const ChatRequest& request) override {
        nlohmann::json body{
            {"version", 1},
            {"model", config_.model_id},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_tokens},
            {"messages",
             {{{"role", "system"}, {"content", request.system}},
              {{"role", "user"}, {"content", request.user}}}}};
        nlohmann::json response =
            detail::post_json(config_.endpoint, body, config_.api_key, config_.timeout_sec);
        if (response.contains("content") && response["content"].is_string())
            return response["content"].get<std::string>();
        // OpenAI-compatible fallback shape.
        if (response.contains("choices") && response["choices"].is_array() &&
            !response["choices"].empty()) {
            const auto& msg = response["choices"][0];
            if (msg.contains("message") && msg["message"].contains("content"))
                return msg["message"]["content"].get<std::string>();
        }
        throw Error("chat response has neither 'content' nor 'choices[0].message.content'");
    }

private:
    LlmProviderConfig config_;
};

// Batched embedding transport; same protocol document, schema version 1.
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(EmbeddingProviderConfig config) : config_(std::move(config)) {}

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
        nlohmann::json body{{"version", 1}, {"model", config_.model_id}, {"input", texts}};
        nlohmann::json response =
            detail::post_json(config_.endpoint, body, config_.api_key, config_.timeout_sec);
        if (!response.contains("data") || !response["data"].is_array())
            throw Error("embedding response missing 'data' array");
        std::vector<std::vector<double>> out(texts.size());
        std::vector<bool> filled(texts.size(), false);
        for (const auto& item : response["data"]) {
            size_t index = item.at("index").get<size_t>();
            if (index >= out.size()) throw Error("embedding response index out of range");
            out[index] = item.at("embedding").get<std::vector<double>>();
            filled[index] = true;
        }
        for (size_t i = 0; i < filled.size(); ++i)
            if (!filled[i]) throw Error("embedding response missing index " + std::to_string(i));
        return out;
    }

    uint32_t dimension() const override { return config_.dimension; }

private:
    EmbeddingProviderConfig config_;
};

inline std::unique_ptr<LlmProvider> make_llm_provider(const LlmProviderConfig& config) {
    if (config.endpoint == "scripted-mock") {
        if (config.fixture_path.empty())
            throw Error("scripted-mock LLM provider needs a fixture file");
        return std::make_unique<ScriptedLlmProvider>(config.fixture_path);
    }
    return std::make_unique<HttpLlmProvider>(config);
}

inline std::unique_ptr<Embedder> make_embedder(const EmbeddingProviderConfig& config) {
    if (config.endpoint == "hash-mock") return std::make_unique<HashMockEmbedder>(config.dimension);
    if (config.endpoint == "scripted-mock") {
        if (config.fixture_path.empty())
            throw Error("scripted-mock embedder needs a fixture file");
        return std::make_unique<ScriptedEmbedder>(config.fixture_path);
    }
    return std::make_unique<HttpEmbedder>(config);
}

}  // namespace amd

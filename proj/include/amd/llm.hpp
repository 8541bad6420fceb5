#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "amd/errors.hpp"
#include "amd/util.hpp"

namespace amd {

// One chat-completion style exchange. `tag` identifies the calling agent
// ("question" / "answer" / "feedback"); transports may ignore it.
struct ChatRequest {
    std::string system;
    std::string user;
    std::string tag;
};

struct LlmProviderConfig {
    std::string endpoint = "scripted-mock";  // URL or "scripted-mock"
    std::string model_id = "scripted-mock";
    double temperature = 0.5;
    int max_tokens = 512;
    int timeout_sec = 60;
    int max_retries = 2;
    int backoff_ms = 200;
    std::string fixture_path;
    std::string api_key;

    void validate() const {
        if (temperature < 0.0) throw Error("temperature must be >= 0");
        if (max_tokens <= 0) throw Error("max_tokens must be > 0");
        if (max_retries < 0) throw Error("max_retries must be >= 0");
    }
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

// Deterministic canned responses for tests and the bundled toy pipeline.
//
// Fixture format:
//   {"version":1,"responses":[
//     {"agent":"question","match":"solar power","response":"...","fail_times":0}, ...]}
// The first entry whose agent filter and user-message substring both match
// wins; `fail_times` makes the first N matching calls raise a transport
// error (for retry-path tests).
class ScriptedLlmProvider : public LlmProvider {
public:
    ScriptedLlmProvider() = default;

    explicit ScriptedLlmProvider(const std::filesystem::path& fixture_path) {
        nlohmann::json doc = nlohmann::json::parse(read_file(fixture_path));
        for (const auto& item : doc.at("responses")) {
            Entry e;
            e.agent = item.value("agent", std::string());
            e.match = item.value("match", std::string());
            e.response = item.value("response", std::string());
            e.fail_times = item.value("fail_times", 0);
            entries_.push_back(std::move(e));
        }
    }

    void add_response(std::string agent, std::string match, std::string response, int fail_times = 0) {
        std::lock_guard<std::mutex> lock(mutex_);
        entries_.push_back({std::move(agent), std::move(match), std::move(response), fail_times, 0});
    }

    std::string complete(const ChatRequest& request) override {
        ++calls_;
        std::lock_guard<std::mutex> lock(mutex_);
        for (auto& entry : entries_) {
            if (!entry.agent.empty() && entry.agent != request.tag) continue;
            if (!entry.match.empty() && request.user.find(entry.match) == std::string::npos) continue;
            if (entry.failed < entry.fail_times) {
                ++entry.failed;
                throw TransportError("scripted transport failure (" + std::to_string(entry.failed) +
                                     "/" + std::to_string(entry.fail_times) + ")");
            }
            return entry.response;
        }
        throw Error("no scripted response matches agent='" + request.tag + "' user message");
    }

    size_t call_count() const { return calls_.load(); }
    void reset_call_count() { calls_ = 0; }

private:
    struct Entry {
        std::string agent;
        std::string match;
        std::string response;
        int fail_times = 0;
        int failed = 0;
    };

    std::vector<Entry> entries_;
    std::mutex mutex_;
    std::atomic<size_t> calls_{0};
};

}  // namespace amd

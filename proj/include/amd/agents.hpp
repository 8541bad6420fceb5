#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "amd/errors.hpp"
#include "amd/llm.hpp"
#include "amd/prompts.hpp"
#include "amd/types.hpp"
#include "amd/util.hpp"

namespace amd {

enum class SocraticDimension { clarification, assumption_probing, implication_probing };

inline constexpr std::array<SocraticDimension, 3> kDimensions = {
    SocraticDimension::clarification,
    SocraticDimension::assumption_probing,
    SocraticDimension::implication_probing,
};

inline const char* to_string(SocraticDimension d) {
    switch (d) {
        case SocraticDimension::clarification: return "clarification";
        case SocraticDimension::assumption_probing: return "assumption_probing";
        case SocraticDimension::implication_probing: return "implication_probing";
    }
    return "?";
}

inline SocraticDimension dimension_from_string(std::string_view s) {
    for (auto d : kDimensions)
        if (s == to_string(d)) return d;
    throw ParseError("unknown socratic dimension '" + std::string(s) + "'");
}

struct SubQuestion {
    SocraticDimension dimension;
    std::string text;
};

struct PseudoAnswer {
    SocraticDimension dimension;
    std::string text;
};

enum class Verdict { kept, rewritten };

struct RefinedAnswer {
    SocraticDimension dimension;
    std::string text;
    Verdict verdict = Verdict::kept;
};

// One query's full expansion: three sub-questions, three pseudo-answers and
// three refined answers, slot-aligned by dimension.
struct ExpansionRecord {
    std::string query_id;
    std::string initial_query;
    std::array<SubQuestion, 3> sub_questions;
    std::array<PseudoAnswer, 3> pseudo_answers;
    std::array<RefinedAnswer, 3> refined_answers;
    std::string config_hash;
    bool feedback_applied = false;  // whether the feedback stage was enabled

    nlohmann::json to_json() const {
        nlohmann::json sq = nlohmann::json::array();
        nlohmann::json pa = nlohmann::json::array();
        nlohmann::json ra = nlohmann::json::array();
        for (int i = 0; i < 3; ++i) {
            sq.push_back({{"dimension", to_string(sub_questions[i].dimension)},
                          {"text", sub_questions[i].text}});
            pa.push_back({{"dimension", to_string(pseudo_answers[i].dimension)},
                          {"text", pseudo_answers[i].text}});
            ra.push_back({{"dimension", to_string(refined_answers[i].dimension)},
                          {"text", refined_answers[i].text},
                          {"verdict", refined_answers[i].verdict == Verdict::kept ? "kept" : "rewritten"}});
        }
        return nlohmann::json{{"query_id", query_id},
                              {"initial_query", initial_query},
                              {"sub_questions", sq},
                              {"pseudo_answers", pa},
                              {"refined_answers", ra},
                              {"config_hash", config_hash},
                              {"feedback_applied", feedback_applied}};
    }

    static ExpansionRecord from_json(const nlohmann::json& obj) {
        ExpansionRecord rec;
        rec.query_id = obj.at("query_id").get<std::string>();
        rec.initial_query = obj.at("initial_query").get<std::string>();
        rec.config_hash = obj.at("config_hash").get<std::string>();
        rec.feedback_applied = obj.at("feedback_applied").get<bool>();
        const auto& sq = obj.at("sub_questions");
        const auto& pa = obj.at("pseudo_answers");
        const auto& ra = obj.at("refined_answers");
        if (sq.size() != 3 || pa.size() != 3 || ra.size() != 3)
            throw ParseError("expansion record arrays must have exactly 3 items");
        for (int i = 0; i < 3; ++i) {
            rec.sub_questions[i] = {dimension_from_string(sq[i].at("dimension").get<std::string>()),
                                    sq[i].at("text").get<std::string>()};
            rec.pseudo_answers[i] = {dimension_from_string(pa[i].at("dimension").get<std::string>()),
                                     pa[i].at("text").get<std::string>()};
            std::string verdict = ra[i].at("verdict").get<std::string>();
            if (verdict != "kept" && verdict != "rewritten")
                throw ParseError("bad verdict '" + verdict + "'");
            rec.refined_answers[i] = {dimension_from_string(ra[i].at("dimension").get<std::string>()),
                                      ra[i].at("text").get<std::string>(),
                                      verdict == "kept" ? Verdict::kept : Verdict::rewritten};
            if (rec.sub_questions[i].dimension != kDimensions[i] ||
                rec.pseudo_answers[i].dimension != kDimensions[i] ||
                rec.refined_answers[i].dimension != kDimensions[i])
                throw ParseError("expansion record dimensions out of order");
        }
        return rec;
    }

    friend bool operator==(const ExpansionRecord& a, const ExpansionRecord& b) {
        return a.to_json() == b.to_json();
    }
};

// Covers everything that changes agent outputs: model, template version,
// sampling parameters and the feedback flag.
inline std::string expansion_config_hash(const LlmProviderConfig& config,
                                         const std::string& template_version, bool feedback_enabled) {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.6g", config.temperature);
    std::string canon = config.model_id + '\x1f' + template_version + '\x1f' + temp + '\x1f' +
                        std::to_string(config.max_tokens) + '\x1f' + (feedback_enabled ? "1" : "0");
    return to_hex(fnv1a64(canon));
}

namespace detail {

// Pulls the first parseable JSON object out of an LLM reply: a fenced block
// if present, otherwise the outermost {...} span. Surrounding prose is fine.
inline std::optional<nlohmann::json> extract_structured_object(const std::string& text,
                                                               std::string& error) {
    auto try_parse = [&](std::string_view candidate) -> std::optional<nlohmann::json> {
        nlohmann::json parsed = nlohmann::json::parse(candidate, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
        return parsed;
    };
    size_t fence = text.find("```");
    if (fence != std::string::npos) {
        size_t body_start = text.find('\n', fence);
        if (body_start != std::string::npos) {
            size_t fence_end = text.find("```", body_start);
            if (fence_end != std::string::npos) {
                if (auto parsed = try_parse(
                        trim(std::string_view(text).substr(body_start, fence_end - body_start))))
                    return parsed;
            }
        }
    }
    size_t open = text.find('{');
    size_t close = text.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        if (auto parsed = try_parse(std::string_view(text).substr(open, close - open + 1)))
            return parsed;
    }
    error = "no parseable JSON object found in reply";
    return std::nullopt;
}

struct SlotAttempt {
    std::array<std::string, 3> slots{};  // empty string = missing
    int filled = 0;
};

inline SlotAttempt parse_slot_response(const std::string& response, std::string& error) {
    SlotAttempt attempt;
    auto obj = extract_structured_object(response, error);
    if (!obj) return attempt;
    for (int i = 0; i < 3; ++i) {
        const char* key = to_string(kDimensions[i]);
        if (!obj->contains(key)) continue;
        const auto& v = (*obj)[key];
        if (!v.is_string()) continue;
        std::string text = std::string(trim(v.get<std::string>()));
        if (text.empty()) continue;
        attempt.slots[i] = std::move(text);
        ++attempt.filled;
    }
    if (attempt.filled < 3 && error.empty())
        error = "reply is missing or has empty keys; got " + std::to_string(attempt.filled) + "/3";
    return attempt;
}

}  // namespace detail

// Append-only JSONL expansion cache keyed by a content hash of
// (query text, config hash). A corrupt trailing line (truncated write) is
// tolerated on load; corruption elsewhere is an error.
class ExpansionCache {
public:
    explicit ExpansionCache(std::filesystem::path path, const WarningSink& warnings = warn_stderr)
        : path_(std::move(path)) {
        std::ifstream in(path_);
        if (!in) return;  // fresh cache
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(in, line))
            if (!trim(line).empty()) lines.push_back(line);
        for (size_t i = 0; i < lines.size(); ++i) {
            nlohmann::json obj = nlohmann::json::parse(lines[i], nullptr, false);
            if (obj.is_discarded() || !obj.contains("key") || !obj.contains("record")) {
                if (i + 1 == lines.size()) {
                    emit_warning(warnings, path_.string() + ": dropping corrupt trailing cache line");
                    break;
                }
                throw ParseError(path_.string() + ": corrupt cache line " + std::to_string(i + 1));
            }
            try {
                entries_[obj.at("key").get<std::string>()] = ExpansionRecord::from_json(obj.at("record"));
            } catch (const ParseError& e) {
                if (i + 1 == lines.size()) {
                    emit_warning(warnings, path_.string() + ": dropping corrupt trailing cache line");
                    break;
                }
                throw ParseError(path_.string() + ": corrupt cache line " + std::to_string(i + 1) +
                                 ": " + e.what());
            }
        }
    }

    static std::string key_for(const std::string& query_text, const std::string& config_hash) {
        return config_hash + "-" + to_hex(fnv1a64(query_text));
    }

    // A hit is only trusted if the stored record really is for this query
    // text and config (the hash key alone is not proof).
    std::optional<ExpansionRecord> lookup(const std::string& query_text,
                                          const std::string& config_hash) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key_for(query_text, config_hash));
        if (it == entries_.end()) return std::nullopt;
        if (it->second.initial_query != query_text || it->second.config_hash != config_hash)
            return std::nullopt;
        return it->second;
    }

    void put(const ExpansionRecord& record) {
        std::lock_guard<std::mutex> lock(mutex_);
        std::string key = key_for(record.initial_query, record.config_hash);
        nlohmann::json line{{"key", key}, {"record", record.to_json()}};
        std::ofstream out(path_, std::ios::app);
        if (!out) throw Error("cannot append to cache file " + path_.string());
        out << line.dump() << '\n';
        out.flush();
        if (!out) throw Error("cache append failed: " + path_.string());
        entries_[key] = record;
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

    const std::filesystem::path& file_path() const { return path_; }

private:
    std::filesystem::path path_;
    std::map<std::string, ExpansionRecord> entries_;
    mutable std::mutex mutex_;
};

struct ExpandFailure {
    std::string query_id;
    std::string message;
};

struct BatchResult {
    std::map<std::string, ExpansionRecord> records;
    std::vector<ExpandFailure> failures;
    size_t expanded = 0;    // computed fresh this run
    size_t cache_hits = 0;  // served from the cache
};

// Runs the three-stage expansion pipeline over one provider. Within a query
// the stages are strictly sequential; expand_batch runs independent queries
// with bounded concurrency.
class AgentPipeline {
public:
    AgentPipeline(LlmProvider& provider, LlmProviderConfig config,
                  PromptTemplates templates = PromptTemplates::builtin())
        : provider_(provider), config_(std::move(config)), templates_(std::move(templates)) {
        config_.validate();
    }

    const LlmProviderConfig& config() const { return config_; }
    const PromptTemplates& templates() const { return templates_; }

    std::string config_hash(bool feedback_enabled) const {
        return expansion_config_hash(config_, templates_.version, feedback_enabled);
    }

    // One provider call that must yield three sub-questions. Parse failures
    // are retried with a repair instruction; slots still missing afterwards
    // fall back to the initial query itself.
    std::array<SubQuestion, 3> generate_subquestions(const std::string& initial_query) {
        if (initial_query.empty()) throw Error("initial query must be nonempty");
        std::string user = render_template(templates_.question.user, {{"query", initial_query}});
        auto attempt = call_slot_agent("question", templates_.question.system, user);
        std::array<SubQuestion, 3> out;
        for (int i = 0; i < 3; ++i)
            out[i] = {kDimensions[i],
                      attempt.slots[i].empty() ? initial_query : attempt.slots[i]};
        return out;
    }

    // One provider call answering all three sub-questions; a slot that stays
    // unanswered after retries falls back to its sub-question text.
    std::array<PseudoAnswer, 3> generate_answers(const std::array<SubQuestion, 3>& sub_questions) {
        std::string user = render_template(
            templates_.answer.user, {{"clarification_question", sub_questions[0].text},
                                     {"assumption_question", sub_questions[1].text},
                                     {"implication_question", sub_questions[2].text}});
        auto attempt = call_slot_agent("answer", templates_.answer.system, user);
        std::array<PseudoAnswer, 3> out;
        for (int i = 0; i < 3; ++i)
            out[i] = {kDimensions[i],
                      attempt.slots[i].empty() ? sub_questions[i].text : attempt.slots[i]};
        return out;
    }

    // One provider call reviewing all three pairs against the initial query.
    // Every slot comes back either kept verbatim or rewritten; any failure
    // degrades to passing the pseudo-answers through unchanged.
    std::array<RefinedAnswer, 3> refine_answers(const std::string& initial_query,
                                                const std::array<SubQuestion, 3>& sub_questions,
                                                const std::array<PseudoAnswer, 3>& pseudo_answers) {
        detail::SlotAttempt attempt;
        try {
            std::string user = render_template(
                templates_.feedback.user, {{"query", initial_query},
                                           {"clarification_question", sub_questions[0].text},
                                           {"clarification_answer", pseudo_answers[0].text},
                                           {"assumption_question", sub_questions[1].text},
                                           {"assumption_answer", pseudo_answers[1].text},
                                           {"implication_question", sub_questions[2].text},
                                           {"implication_answer", pseudo_answers[2].text}});
            attempt = call_slot_agent("feedback", templates_.feedback.system, user);
        } catch (const TransportError&) {
            attempt = {};  // passthrough below
        }
        std::array<RefinedAnswer, 3> out;
        for (int i = 0; i < 3; ++i) {
            const std::string& original = pseudo_answers[i].text;
            const std::string& text = attempt.slots[i].empty() ? original : attempt.slots[i];
            out[i] = {kDimensions[i], text, text == original ? Verdict::kept : Verdict::rewritten};
        }
        return out;
    }

    ExpansionRecord expand_query(const QueryRecord& query, bool feedback_enabled,
                                 ExpansionCache* cache = nullptr) {
        std::string hash = config_hash(feedback_enabled);
        if (cache) {
            if (auto hit = cache->lookup(query.text, hash)) {
                hit->query_id = query.query_id;
                return *hit;
            }
        }
        ExpansionRecord record = run_pipeline(query, feedback_enabled, hash);
        if (cache) cache->put(record);
        return record;
    }

    // Independent per-query pipelines, at most max_in_flight provider
    // requests at once. Queries sharing (text, config) are expanded once.
    // Cache entries are committed in input order, so cache bytes are
    // deterministic for a deterministic provider.
    BatchResult expand_batch(const std::vector<QueryRecord>& queries, bool feedback_enabled,
                             ExpansionCache* cache, size_t max_in_flight = 1) {
        if (max_in_flight < 1) throw Error("max_in_flight must be >= 1");
        std::string hash = config_hash(feedback_enabled);

        struct Task {
            std::string text;
            bool ok = false;
            bool from_cache = false;
            ExpansionRecord record;
            std::string error;
            bool done = false;
        };
        std::vector<Task> tasks;
        std::map<std::string, size_t> task_by_text;
        for (const auto& q : queries) {
            if (task_by_text.emplace(q.text, tasks.size()).second) tasks.push_back(Task{q.text});
        }

        std::atomic<size_t> next{0};
        std::mutex commit_mutex;
        size_t commit_idx = 0;
        auto worker = [&]() {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= tasks.size()) break;
                Task local = tasks[i];
                try {
                    if (cache) {
                        if (auto hit = cache->lookup(local.text, hash)) {
                            local.ok = true;
                            local.from_cache = true;
                            local.record = std::move(*hit);
                        }
                    }
                    if (!local.ok) {
                        QueryRecord rep{"", local.text};
                        local.record = run_pipeline(rep, feedback_enabled, hash);
                        local.ok = true;
                    }
                } catch (const std::exception& e) {
                    local.error = e.what();
                }
                local.done = true;
                std::lock_guard<std::mutex> lock(commit_mutex);
                tasks[i] = std::move(local);
                while (commit_idx < tasks.size() && tasks[commit_idx].done) {
                    Task& ready = tasks[commit_idx];
                    if (ready.ok && !ready.from_cache && cache) cache->put(ready.record);
                    ++commit_idx;
                }
            }
        };
        size_t n_workers = std::min(max_in_flight, std::max<size_t>(tasks.size(), 1));
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();

        BatchResult result;
        for (const auto& q : queries) {
            const Task& task = tasks[task_by_text.at(q.text)];
            if (task.ok) {
                ExpansionRecord record = task.record;
                record.query_id = q.query_id;
                result.records.emplace(q.query_id, std::move(record));
            } else {
                result.failures.push_back({q.query_id, task.error});
            }
        }
        for (const Task& task : tasks) {
            if (!task.ok) continue;
            if (task.from_cache) ++result.cache_hits;
            else ++result.expanded;
        }
        return result;
    }

private:
    ExpansionRecord run_pipeline(const QueryRecord& query, bool feedback_enabled,
                                 const std::string& hash) {
        ExpansionRecord record;
        record.query_id = query.query_id;
        record.initial_query = query.text;
        record.config_hash = hash;
        record.feedback_applied = feedback_enabled;
        record.sub_questions = generate_subquestions(query.text);
        record.pseudo_answers = generate_answers(record.sub_questions);
        if (feedback_enabled) {
            record.refined_answers =
                refine_answers(query.text, record.sub_questions, record.pseudo_answers);
        } else {
            for (int i = 0; i < 3; ++i)
                record.refined_answers[i] = {kDimensions[i], record.pseudo_answers[i].text,
                                             Verdict::kept};
        }
        return record;
    }

    // Shared retry ladder: up to 1 + max_retries provider calls. Parse
    // failures append a repair instruction and retry immediately; transport
    // failures back off, and exhaust into a hard TransportError.
    detail::SlotAttempt call_slot_agent(const std::string& tag, const std::string& system,
                                        const std::string& user) {
        detail::SlotAttempt best;
        best.filled = -1;
        std::string repair;
        const int attempts = 1 + config_.max_retries;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            std::string response;
            try {
                response = provider_.complete({system, user + repair, tag});
            } catch (const TransportError&) {
                if (attempt + 1 == attempts) throw;
                if (config_.backoff_ms > 0)
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(config_.backoff_ms * (attempt + 1)));
                continue;
            }
            std::string error;
            auto parsed = detail::parse_slot_response(response, error);
            if (parsed.filled == 3) return parsed;
            if (parsed.filled > best.filled) best = parsed;
            repair = "\n\nYour previous reply could not be fully parsed (" + error +
                     "). Reply again with only one fenced JSON object with exactly the string keys "
                     "\"clarification\", \"assumption_probing\" and \"implication_probing\".";
        }
        if (best.filled < 0) best = {};
        return best;
    }

    LlmProvider& provider_;
    LlmProviderConfig config_;
    PromptTemplates templates_;
};

// JSONL expansion files: one ExpansionRecord per line, input query order.
inline void write_expansions(const std::vector<QueryRecord>& queries, const BatchResult& batch,
                             const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& q : queries) {
        auto it = batch.records.find(q.query_id);
        if (it != batch.records.end()) out << it->second.to_json().dump() << '\n';
    }
    atomic_write_file(path, out.str());
}

inline std::vector<ExpansionRecord> load_expansions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open expansions file: " + path.string());
    std::vector<ExpansionRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
        records.push_back(ExpansionRecord::from_json(obj));
    }
    return records;
}

}  // namespace amd

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "amd/errors.hpp"
#include "amd/tokenizer.hpp"
#include "amd/types.hpp"
#include "amd/util.hpp"

namespace amd {

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

struct Posting {
    uint32_t ordinal;
    uint32_t tf;
};

// Term-at-a-time BM25 engine over an in-memory inverted index. Immutable
// after build/load; concurrent searches over a shared index are safe.
//
// Scoring uses the smoothed, always-nonnegative IDF
//   idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
// and the usual tf saturation tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)).
class IndexBuilder;

class InvertedIndex {
public:
    size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    const std::string& doc_id(uint32_t ordinal) const { return doc_ids_.at(ordinal); }
    uint32_t doc_length(uint32_t ordinal) const { return doc_lengths_.at(ordinal); }
    const TokenizerConfig& tokenizer_config() const { return tok_config_; }
    const Bm25Params& params() const { return params_; }

    std::optional<uint32_t> ordinal_of(const std::string& doc_id) const {
        auto it = ordinal_by_id_.find(doc_id);
        if (it == ordinal_by_id_.end()) return std::nullopt;
        return it->second;
    }

    const std::vector<Posting>* postings_for(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? nullptr : &it->second;
    }

    double idf(const std::string& term) const {
        auto* plist = postings_for(term);
        size_t df = plist ? plist->size() : 0;
        if (df == 0) return 0.0;
        double n = static_cast<double>(doc_count());
        return std::log(1.0 + (n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5));
    }

    // Sum over query tokens (duplicates count twice); terms absent from the
    // document contribute 0.
    double bm25_score(const std::vector<std::string>& query_tokens, uint32_t ordinal,
                      const Bm25Params& params) const {
        if (ordinal >= doc_count()) throw Error("doc ordinal out of range");
        double score = 0.0;
        double norm = length_norm(ordinal, params);
        for (const auto& token : query_tokens) {
            auto* plist = postings_for(token);
            if (!plist) continue;
            auto it = std::lower_bound(plist->begin(), plist->end(), ordinal,
                                       [](const Posting& p, uint32_t o) { return p.ordinal < o; });
            if (it == plist->end() || it->ordinal != ordinal) continue;
            double tf = it->tf;
            score += idf(token) * tf * (params.k1 + 1.0) / (tf + norm);
        }
        return score;
    }

    double bm25_score(const std::vector<std::string>& query_tokens, uint32_t ordinal) const {
        return bm25_score(query_tokens, ordinal, params_);
    }

    // Top-k by BM25 score descending, ties broken by ascending doc_id;
    // zero-score documents are excluded, so fewer than k may come back.
    Ranking search_tokens(const std::vector<std::string>& query_tokens, size_t k,
                          const Bm25Params& params) const {
        Ranking out;
        if (k == 0 || doc_count() == 0) return out;
        std::vector<double> scores(doc_count(), 0.0);
        std::vector<uint32_t> touched;
        std::vector<bool> seen(doc_count(), false);
        for (const auto& token : query_tokens) {
            auto* plist = postings_for(token);
            if (!plist) continue;
            double term_idf = idf(token);
            for (const Posting& p : *plist) {
                double tf = p.tf;
                scores[p.ordinal] += term_idf * tf * (params.k1 + 1.0) / (tf + length_norm(p.ordinal, params));
                if (!seen[p.ordinal]) {
                    seen[p.ordinal] = true;
                    touched.push_back(p.ordinal);
                }
            }
        }
        out.reserve(std::min(k, touched.size()));
        auto better = [&](uint32_t a, uint32_t b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return doc_ids_[a] < doc_ids_[b];
        };
        std::sort(touched.begin(), touched.end(), better);
        for (uint32_t ordinal : touched) {
            if (out.size() >= k) break;
            if (scores[ordinal] <= 0.0) continue;
            out.push_back({doc_ids_[ordinal], scores[ordinal]});
        }
        return out;
    }

    Ranking search(const std::string& query_text, size_t k) const {
        return search_tokens(tokenize(query_text, tok_config_), k, params_);
    }

    Ranking search(const std::string& query_text, size_t k, const Bm25Params& params) const {
        return search_tokens(tokenize(query_text, tok_config_), k, params);
    }

    // --- persistence -------------------------------------------------------

    static constexpr uint32_t kFormatVersion = 1;

    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        {
            std::ofstream out(dir / "postings.bin", std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + (dir / "postings.bin").string());
            out.write("AMDSPOST", 8);
            write_u32(out, kFormatVersion);
            write_u64(out, postings_.size());
            for (const auto& [term, plist] : postings_) {
                write_u32(out, static_cast<uint32_t>(term.size()));
                out.write(term.data(), static_cast<std::streamsize>(term.size()));
                write_u64(out, plist.size());
                for (const Posting& p : plist) {
                    write_u32(out, p.ordinal);
                    write_u32(out, p.tf);
                }
            }
        }
        {
            std::ofstream out(dir / "docs.bin", std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + (dir / "docs.bin").string());
            out.write("AMDSDOCS", 8);
            write_u32(out, kFormatVersion);
            write_u64(out, doc_ids_.size());
            for (size_t i = 0; i < doc_ids_.size(); ++i) {
                write_u32(out, static_cast<uint32_t>(doc_ids_[i].size()));
                out.write(doc_ids_[i].data(), static_cast<std::streamsize>(doc_ids_[i].size()));
                write_u32(out, doc_lengths_[i]);
            }
        }
        nlohmann::json meta{{"format_version", kFormatVersion},
                            {"kind", "sparse"},
                            {"doc_count", doc_ids_.size()},
                            {"avg_doc_length", avg_doc_length_},
                            {"tokenizer",
                             {{"lowercase", tok_config_.lowercase},
                              {"stopwords", tok_config_.stopword_list},
                              {"stemmer", to_string(tok_config_.stemmer)}}},
                            {"bm25", {{"k1", params_.k1}, {"b", params_.b}}}};
        atomic_write_file(dir / "meta.json", meta.dump(2) + "\n");
    }

    static InvertedIndex load(const std::filesystem::path& dir) {
        InvertedIndex index;
        nlohmann::json meta = nlohmann::json::parse(read_file(dir / "meta.json"));
        if (meta.at("kind").get<std::string>() != "sparse")
            throw Error(dir.string() + " is not a sparse index (kind=" +
                        meta.at("kind").get<std::string>() + ")");
        if (meta.at("format_version").get<uint32_t>() != kFormatVersion)
            throw Error("unsupported sparse index format_version");
        index.tok_config_.lowercase = meta.at("tokenizer").at("lowercase").get<bool>();
        for (const auto& w : meta.at("tokenizer").at("stopwords"))
            index.tok_config_.stopword_list.insert(w.get<std::string>());
        index.tok_config_.stemmer = stemmer_from_string(meta.at("tokenizer").at("stemmer").get<std::string>());
        index.params_.k1 = meta.at("bm25").at("k1").get<double>();
        index.params_.b = meta.at("bm25").at("b").get<double>();
        {
            std::ifstream in(dir / "docs.bin", std::ios::binary);
            if (!in) throw Error("cannot open " + (dir / "docs.bin").string());
            if (read_bytes(in, 8) != "AMDSDOCS") throw Error("bad docs.bin magic");
            if (read_u32(in) != kFormatVersion) throw Error("unsupported docs.bin version");
            uint64_t count = read_u64(in);
            index.doc_ids_.reserve(count);
            index.doc_lengths_.reserve(count);
            for (uint64_t i = 0; i < count; ++i) {
                uint32_t len = read_u32(in);
                std::string id = read_bytes(in, len);
                uint32_t doc_len = read_u32(in);
                index.ordinal_by_id_.emplace(id, static_cast<uint32_t>(i));
                index.doc_ids_.push_back(std::move(id));
                index.doc_lengths_.push_back(doc_len);
            }
        }
        {
            std::ifstream in(dir / "postings.bin", std::ios::binary);
            if (!in) throw Error("cannot open " + (dir / "postings.bin").string());
            if (read_bytes(in, 8) != "AMDSPOST") throw Error("bad postings.bin magic");
            if (read_u32(in) != kFormatVersion) throw Error("unsupported postings.bin version");
            uint64_t term_count = read_u64(in);
            for (uint64_t t = 0; t < term_count; ++t) {
                uint32_t len = read_u32(in);
                std::string term = read_bytes(in, len);
                uint64_t n = read_u64(in);
                std::vector<Posting> plist;
                plist.reserve(n);
                for (uint64_t i = 0; i < n; ++i) {
                    uint32_t ordinal = read_u32(in);
                    uint32_t tf = read_u32(in);
                    if (ordinal >= index.doc_ids_.size()) throw Error("posting ordinal out of range");
                    plist.push_back({ordinal, tf});
                }
                index.postings_.emplace(std::move(term), std::move(plist));
            }
        }
        index.recompute_stats();
        return index;
    }

private:
    friend class IndexBuilder;

    double length_norm(uint32_t ordinal, const Bm25Params& params) const {
        double rel = avg_doc_length_ > 0.0 ? doc_lengths_[ordinal] / avg_doc_length_ : 0.0;
        return params.k1 * (1.0 - params.b + params.b * rel);
    }

    void recompute_stats() {
        double total = 0.0;
        for (uint32_t len : doc_lengths_) total += len;
        avg_doc_length_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
    }

    std::map<std::string, std::vector<Posting>> postings_;  // per term, sorted by ordinal
    std::vector<uint32_t> doc_lengths_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, uint32_t> ordinal_by_id_;
    double avg_doc_length_ = 0.0;
    TokenizerConfig tok_config_;
    Bm25Params params_;
};

// Single-writer index construction; documents stream through one at a time.
class IndexBuilder {
public:
    explicit IndexBuilder(TokenizerConfig config) { index_.tok_config_ = std::move(config); }

    void add(const Document& doc) {
        if (doc.doc_id.empty()) throw Error("document with empty doc_id");
        uint32_t ordinal = static_cast<uint32_t>(index_.doc_ids_.size());
        if (!index_.ordinal_by_id_.emplace(doc.doc_id, ordinal).second)
            throw Error("duplicate doc_id '" + doc.doc_id + "'");
        index_.doc_ids_.push_back(doc.doc_id);
        // Title and body are indexed as one field.
        std::string field = doc.title.empty() ? doc.text : doc.title + " " + doc.text;
        auto tokens = tokenize(field, index_.tok_config_);
        index_.doc_lengths_.push_back(static_cast<uint32_t>(tokens.size()));
        std::map<std::string, uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, freq] : tf) index_.postings_[term].push_back({ordinal, freq});
    }

    InvertedIndex finish(Bm25Params params = {}) {
        index_.params_ = params;
        index_.recompute_stats();
        return std::move(index_);
    }

private:
    InvertedIndex index_;
};

// Convenience wrapper over IndexBuilder for in-memory corpora.
inline InvertedIndex build_index(const std::vector<Document>& docs, TokenizerConfig config,
                                 Bm25Params params = {}) {
    IndexBuilder builder(std::move(config));
    for (const auto& doc : docs) builder.add(doc);
    return builder.finish(params);
}

}  // namespace amd

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "amd/agents.hpp"
#include "amd/dense.hpp"
#include "amd/embedder.hpp"
#include "amd/errors.hpp"
#include "amd/inverted_index.hpp"
#include "amd/types.hpp"
#include "amd/util.hpp"

namespace amd {

struct SparseExpandedQuery {
    std::string text;
};

struct DenseExpandedQuery {
    DenseVector vector;
};

struct RrfConfig {
    int k = 60;                 // rank damping constant
    int per_list_depth = 1000;  // retrieval depth per list and fused output cap

    void validate() const {
        if (k < 0) throw Error("rrf k must be >= 0");
        if (per_list_depth < 1) throw Error("rrf per_list_depth must be >= 1");
    }
};

inline constexpr const char* kSepToken = " [SEP] ";

// Sparse concatenation: three copies of the initial query followed by the
// refined answers in dimension order, " [SEP] " between every adjacent pair.
// Empty answer slots are skipped with a warning.
inline SparseExpandedQuery build_sparse_query(const ExpansionRecord& record,
                                              const WarningSink& warnings = warn_stderr) {
    std::vector<const std::string*> parts;
    parts.push_back(&record.initial_query);
    parts.push_back(&record.initial_query);
    parts.push_back(&record.initial_query);
    for (const auto& answer : record.refined_answers) {
        if (answer.text.empty()) {
            emit_warning(warnings, "query '" + record.query_id + "': empty refined answer slot (" +
                                       to_string(answer.dimension) + ") skipped");
            continue;
        }
        parts.push_back(&answer.text);
    }
    SparseExpandedQuery out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out.text += kSepToken;
        out.text += *parts[i];
    }
    return out;
}

// Dense fusion: q* = 0.7 * emb(Q) + 0.3 * mean_i emb(a'_i). Answers embed
// with the query role; they act as query surrogates.
inline DenseExpandedQuery build_dense_query(const ExpansionRecord& record, Embedder& provider,
                                            const EmbeddingProviderConfig& config) {
    std::vector<std::string> texts{record.initial_query};
    for (const auto& answer : record.refined_answers) texts.push_back(answer.text);
    auto vectors = embed(texts, EmbedRole::query, provider, config);
    size_t dim = vectors[0].dimension();
    const double n_answers = static_cast<double>(record.refined_answers.size());
    std::vector<double> fused(dim, 0.0);
    for (size_t d = 0; d < dim; ++d) {
        double sum = 0.0;
        for (size_t i = 1; i < vectors.size(); ++i) sum += vectors[i].values[d];
        fused[d] = 0.7 * vectors[0].values[d] + 0.3 * (sum / n_answers);
    }
    return DenseExpandedQuery{DenseVector::of(std::move(fused))};
}

// Reciprocal rank fusion: score(d) = sum over lists containing d of
// 1/(k + rank). Per-document contributions are summed in a canonical order
// (ranks descending), so shuffling the input lists leaves the output
// bit-identical. Output sorted by fused score descending, ties by ascending
// doc_id, truncated to per_list_depth.
inline Ranking fuse_rrf(const std::vector<Ranking>& lists, const RrfConfig& config = {}) {
    config.validate();
    if (lists.empty()) throw Error("fuse_rrf needs at least one input list");
    std::map<std::string, std::vector<int>> ranks_by_doc;
    for (const auto& list : lists) {
        std::set<std::string> in_this_list;
        for (size_t pos = 0; pos < list.size(); ++pos) {
            const std::string& doc = list[pos].doc_id;
            if (!in_this_list.insert(doc).second)
                throw Error("document '" + doc + "' appears twice in one input list");
            ranks_by_doc[doc].push_back(static_cast<int>(pos + 1));
        }
    }
    Ranking fused;
    fused.reserve(ranks_by_doc.size());
    for (auto& [doc, ranks] : ranks_by_doc) {
        std::sort(ranks.begin(), ranks.end(), std::greater<>());
        double score = 0.0;
        for (int r : ranks) score += 1.0 / (static_cast<double>(config.k) + static_cast<double>(r));
        fused.push_back({doc, score});
    }
    std::sort(fused.begin(), fused.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (fused.size() > static_cast<size_t>(config.per_list_depth))
        fused.resize(static_cast<size_t>(config.per_list_depth));
    return fused;
}

// RRF retrieval mode: one expanded query per refined answer
// (Q_init [SEP] a'_i), each retrieved with BM25 at per_list_depth, fused.
inline Ranking run_rrf_mode(const ExpansionRecord& record, const InvertedIndex& index,
                            const RrfConfig& config = {}) {
    config.validate();
    std::vector<Ranking> lists;
    lists.reserve(record.refined_answers.size());
    for (const auto& answer : record.refined_answers) {
        std::string expanded = record.initial_query + kSepToken + answer.text;
        lists.push_back(index.search(expanded, static_cast<size_t>(config.per_list_depth)));
    }
    return fuse_rrf(lists, config);
}

}  // namespace amd

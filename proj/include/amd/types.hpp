#pragma once

#include <map>
#include <string>
#include <vector>

namespace amd {

struct Document {
    std::string doc_id;  // nonempty, unique within a corpus
    std::string title;   // may be empty
    std::string text;    // stored verbatim
};

struct QueryRecord {
    std::string query_id;
    std::string text;
};

// query_id -> (doc_id -> relevance grade >= 0). Queries with no judged
// documents are simply absent.
using QrelsForQuery = std::map<std::string, int>;
using Qrels = std::map<std::string, QrelsForQuery>;

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

// One query's retrieval result, sorted by score descending (ties broken by
// ascending doc_id everywhere in this toolkit).
using Ranking = std::vector<ScoredDoc>;

// Keyed by query_id; std::map keeps serialization order deterministic.
using RunRankings = std::map<std::string, Ranking>;

}  // namespace amd

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "amd/errors.hpp"
#include "amd/types.hpp"
#include "amd/util.hpp"

namespace amd {

// Emits standard six-column TREC run lines `qid Q0 docid rank score tag`.
// Each ranking must already be sorted by score descending; ranks become
// 1..n contiguous. Scores are serialized with 6 significant digits.
inline void write_run(const RunRankings& rankings, const std::string& tag,
                      const std::filesystem::path& path) {
    if (tag.empty() || tag.find_first_of(" \t") != std::string::npos)
        throw Error("run tag must be nonempty and contain no whitespace: '" + tag + "'");
    std::ostringstream out;
    for (const auto& [qid, ranking] : rankings) {
        double prev = std::numeric_limits<double>::infinity();
        int rank = 0;
        for (const auto& entry : ranking) {
            if (std::isnan(entry.score))
                throw Error("NaN score for (" + qid + ", " + entry.doc_id + ")");
            if (entry.score > prev)
                throw Error("ranking for query '" + qid + "' is not sorted by score descending");
            prev = entry.score;
            ++rank;
            out << qid << " Q0 " << entry.doc_id << ' ' << rank << ' ' << format_score(entry.score)
                << ' ' << tag << '\n';
        }
    }
    atomic_write_file(path, out.str());
}

// Reads a six-column TREC run file back into per-query rankings, restoring
// order from the rank column and validating that ranks are 1..n contiguous
// with no repeated (qid, docid) pair.
inline RunRankings read_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open run file: " + path.string());
    std::map<std::string, std::map<int, ScoredDoc>> by_rank;
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_whitespace(line);
        if (fields.size() != 6)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 6 fields, got " + std::to_string(fields.size()));
        const std::string& qid = fields[0];
        const std::string& docid = fields[2];
        int rank = 0;
        double score = 0.0;
        try {
            rank = std::stoi(fields[3]);
            score = std::stod(fields[4]);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad rank or score");
        }
        if (rank < 1)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": rank must be >= 1");
        if (!seen.emplace(qid, docid).second)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": duplicate (" + qid +
                             ", " + docid + ") pair");
        if (!by_rank[qid].emplace(rank, ScoredDoc{docid, score}).second)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": duplicate rank " +
                             std::to_string(rank) + " for query '" + qid + "'");
    }
    RunRankings rankings;
    for (auto& [qid, ranked] : by_rank) {
        Ranking ranking;
        int expected = 1;
        for (auto& [rank, entry] : ranked) {
            if (rank != expected)
                throw ParseError(path.string() + ": query '" + qid + "' has a rank gap at " +
                                 std::to_string(expected));
            ++expected;
            ranking.push_back(std::move(entry));
        }
        rankings.emplace(qid, std::move(ranking));
    }
    return rankings;
}

}  // namespace amd

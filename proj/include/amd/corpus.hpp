#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "amd/errors.hpp"
#include "amd/types.hpp"
#include "amd/util.hpp"

namespace amd {

namespace detail {

inline std::string json_id_field(const nlohmann::json& obj, const char* key) {
    const auto& v = obj.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ParseError(std::string("field '") + key + "' is not a string");
}

}  // namespace detail

// Streams a BEIR JSON-lines corpus (fields `_id`, `title`, `text`) one
// document at a time; memory stays bounded regardless of corpus size.
class CorpusReader {
public:
    explicit CorpusReader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
        if (!in_) throw Error("cannot open corpus file: " + path_);
    }

    std::optional<Document> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (trim(line).empty()) continue;
            return parse_line(line);
        }
        return std::nullopt;
    }

    size_t line_number() const { return line_no_; }

private:
    Document parse_line(const std::string& line) {
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path_ + ":" + std::to_string(line_no_) + ": malformed JSON: " + e.what());
        }
        Document doc;
        try {
            if (!obj.contains("_id")) throw ParseError("missing field '_id'");
            doc.doc_id = detail::json_id_field(obj, "_id");
            doc.title = obj.value("title", std::string());
            doc.text = obj.value("text", std::string());
        } catch (const std::exception& e) {
            throw ParseError(path_ + ":" + std::to_string(line_no_) + ": " + e.what());
        }
        if (doc.doc_id.empty())
            throw ParseError(path_ + ":" + std::to_string(line_no_) + ": empty '_id'");
        if (!seen_.insert(doc.doc_id).second)
            throw ParseError(path_ + ":" + std::to_string(line_no_) + ": duplicate doc id '" + doc.doc_id + "'");
        return doc;
    }

    std::string path_;
    std::ifstream in_;
    size_t line_no_ = 0;
    std::unordered_set<std::string> seen_;
};

inline std::vector<Document> load_corpus(const std::filesystem::path& path) {
    CorpusReader reader(path);
    std::vector<Document> docs;
    while (auto doc = reader.next()) docs.push_back(std::move(*doc));
    return docs;
}

// Accepts BEIR queries JSON-lines (`_id`, `text`) or TREC tab-separated
// `qid<TAB>text`; the two are distinguished by the first non-blank byte.
inline std::vector<QueryRecord> load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open queries file: " + path.string());
    std::vector<QueryRecord> queries;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = trim(line);
        if (body.empty()) continue;
        QueryRecord q;
        if (body.front() == '{') {
            nlohmann::json obj;
            try {
                obj = nlohmann::json::parse(body);
                if (!obj.contains("_id")) throw ParseError("missing field '_id'");
                q.query_id = detail::json_id_field(obj, "_id");
                q.text = obj.value("text", std::string());
            } catch (const std::exception& e) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        } else {
            size_t tab = line.find('\t');
            if (tab == std::string::npos)
                throw ParseError(path.string() + ":" + std::to_string(line_no) +
                                 ": expected `qid<TAB>text`");
            q.query_id = std::string(trim(line.substr(0, tab)));
            q.text = std::string(trim(line.substr(tab + 1)));
        }
        if (q.query_id.empty())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty query id");
        if (q.text.empty())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty query text for '" +
                             q.query_id + "'");
        if (!seen.insert(q.query_id).second)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": duplicate query id '" +
                             q.query_id + "'");
        queries.push_back(std::move(q));
    }
    return queries;
}

// TREC qrels `qid iter docid grade` (whitespace-separated) or BEIR TSV with a
// `query-id  corpus-id  score` header. Repeated (qid, docid) pairs keep the
// last grade and emit a warning.
inline Qrels load_qrels(const std::filesystem::path& path, const WarningSink& warnings = warn_stderr) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open qrels file: " + path.string());
    Qrels qrels;
    std::string line;
    size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_whitespace(line);
        if (first_content_line) {
            first_content_line = false;
            if (!fields.empty() && (fields[0] == "query-id" || fields[0] == "qid")) continue;  // header
        }
        std::string qid, docid, grade_text;
        if (fields.size() == 4) {
            qid = fields[0];
            docid = fields[2];
            grade_text = fields[3];
        } else if (fields.size() == 3) {
            qid = fields[0];
            docid = fields[1];
            grade_text = fields[2];
        } else {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 3 or 4 fields, got " + std::to_string(fields.size()));
        }
        size_t consumed = 0;
        int grade = 0;
        try {
            grade = std::stoi(grade_text, &consumed);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-integer grade '" +
                             grade_text + "'");
        }
        if (consumed != grade_text.size())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-integer grade '" +
                             grade_text + "'");
        if (grade < 0)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": negative grade '" +
                             grade_text + "'");
        auto& for_query = qrels[qid];
        auto [it, inserted] = for_query.emplace(docid, grade);
        if (!inserted) {
            emit_warning(warnings, path.string() + ":" + std::to_string(line_no) + ": duplicate qrels entry (" +
                                       qid + ", " + docid + "), keeping last grade " + grade_text);
            it->second = grade;
        }
    }
    return qrels;
}

}  // namespace amd

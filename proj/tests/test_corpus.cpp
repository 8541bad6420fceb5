#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "amd/corpus.hpp"
#include "amd/run_file.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("amd_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

}  // namespace

TEST_CASE("load_corpus reads BEIR JSONL in order") {
    TempDir dir;
    write_text(dir.path / "corpus.jsonl",
               R"({"_id":"d1","title":"Solar","text":"solar power basics"})" "\n"
               R"({"_id":"d2","title":"","text":"wind turbines"})" "\n"
               "\n"
               R"({"_id":"d3","title":"Coal","text":"coal plants"})" "\n");
    auto docs = amd::load_corpus(dir.path / "corpus.jsonl");
    REQUIRE(docs.size() == 3);
    CHECK(docs[0].doc_id == "d1");
    CHECK(docs[0].title == "Solar");
    CHECK(docs[1].title.empty());
    CHECK(docs[2].doc_id == "d3");
}

TEST_CASE("load_corpus reports the offending line") {
    TempDir dir;
    write_text(dir.path / "bad.jsonl",
               R"({"_id":"d1","text":"ok"})" "\n"
               R"({"title":"no id","text":"boom"})" "\n");
    CHECK_THROWS_WITH(amd::load_corpus(dir.path / "bad.jsonl"),
                      Catch::Matchers::ContainsSubstring(":2:"));

    write_text(dir.path / "dup.jsonl",
               R"({"_id":"d1","text":"a"})" "\n"
               R"({"_id":"d1","text":"b"})" "\n");
    CHECK_THROWS_WITH(amd::load_corpus(dir.path / "dup.jsonl"),
                      Catch::Matchers::ContainsSubstring("duplicate doc id 'd1'"));

    write_text(dir.path / "mangled.jsonl", "{not json\n");
    CHECK_THROWS_AS(amd::load_corpus(dir.path / "mangled.jsonl"), amd::ParseError);
}

TEST_CASE("CorpusReader streams one document at a time") {
    TempDir dir;
    std::string lines;
    for (int i = 0; i < 100; ++i)
        lines += R"({"_id":"d)" + std::to_string(i) + R"(","text":"t"})" "\n";
    write_text(dir.path / "corpus.jsonl", lines);
    amd::CorpusReader reader(dir.path / "corpus.jsonl");
    size_t count = 0;
    while (auto doc = reader.next()) ++count;
    CHECK(count == 100);
}

TEST_CASE("load_queries accepts TREC TSV and BEIR JSONL") {
    TempDir dir;
    write_text(dir.path / "q.tsv", "q1\twhat causes inflation\nq2\tsolar power\n");
    auto tsv = amd::load_queries(dir.path / "q.tsv");
    REQUIRE(tsv.size() == 2);
    CHECK(tsv[0].query_id == "q1");
    CHECK(tsv[1].text == "solar power");

    write_text(dir.path / "q.jsonl",
               R"({"_id":"7","text":"honeybee decline"})" "\n");
    auto jsonl = amd::load_queries(dir.path / "q.jsonl");
    REQUIRE(jsonl.size() == 1);
    CHECK(jsonl[0].query_id == "7");

    write_text(dir.path / "dup.tsv", "q1\ta\nq1\tb\n");
    CHECK_THROWS_WITH(amd::load_queries(dir.path / "dup.tsv"),
                      Catch::Matchers::ContainsSubstring("duplicate query id"));

    write_text(dir.path / "empty.tsv", "q1\t\n");
    CHECK_THROWS_WITH(amd::load_queries(dir.path / "empty.tsv"),
                      Catch::Matchers::ContainsSubstring("empty query text"));
}

TEST_CASE("load_qrels parses TREC format with last-wins duplicates") {
    TempDir dir;
    write_text(dir.path / "qrels.txt", "q1 0 d1 2\nq1 0 d2 0\nq2 0 d1 1\n");
    auto qrels = amd::load_qrels(dir.path / "qrels.txt", nullptr);
    CHECK(qrels.at("q1").at("d1") == 2);
    CHECK(qrels.at("q1").at("d2") == 0);
    CHECK(qrels.at("q2").size() == 1);

    write_text(dir.path / "dup.txt", "q1 0 d1 1\nq1 0 d1 2\n");
    std::vector<std::string> warnings;
    auto dup = amd::load_qrels(dir.path / "dup.txt",
                               [&](const std::string& w) { warnings.push_back(w); });
    CHECK(dup.at("q1").at("d1") == 2);
    REQUIRE(warnings.size() == 1);
    CHECK_THAT(warnings[0], Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("load_qrels accepts BEIR TSV with header") {
    TempDir dir;
    write_text(dir.path / "qrels.tsv", "query-id\tcorpus-id\tscore\nq1\td9\t1\n");
    auto qrels = amd::load_qrels(dir.path / "qrels.tsv", nullptr);
    CHECK(qrels.at("q1").at("d9") == 1);
}

TEST_CASE("load_qrels rejects bad grades") {
    TempDir dir;
    write_text(dir.path / "neg.txt", "q1 0 d1 -1\n");
    CHECK_THROWS_WITH(amd::load_qrels(dir.path / "neg.txt", nullptr),
                      Catch::Matchers::ContainsSubstring("negative grade"));
    write_text(dir.path / "nan.txt", "q1 0 d1 x\n");
    CHECK_THROWS_WITH(amd::load_qrels(dir.path / "nan.txt", nullptr),
                      Catch::Matchers::ContainsSubstring("non-integer grade"));
    write_text(dir.path / "frac.txt", "q1 0 d1 1.5\n");
    CHECK_THROWS_AS(amd::load_qrels(dir.path / "frac.txt", nullptr), amd::ParseError);
}

TEST_CASE("write_run emits six-column TREC lines") {
    TempDir dir;
    amd::RunRankings rankings{{"q1", {{"d2", 0.9}, {"d1", 0.5}}}};
    amd::write_run(rankings, "amd", dir.path / "out.run");
    std::ifstream in(dir.path / "out.run");
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l1 == "q1 Q0 d2 1 0.9 amd");
    CHECK(l2 == "q1 Q0 d1 2 0.5 amd");
}

TEST_CASE("write_run of empty map yields empty file") {
    TempDir dir;
    amd::write_run({}, "amd", dir.path / "empty.run");
    CHECK(fs::file_size(dir.path / "empty.run") == 0);
}

TEST_CASE("write_run rejects NaN and unsorted scores") {
    TempDir dir;
    amd::RunRankings nan_run{{"q1", {{"d1", std::nan("")}}}};
    CHECK_THROWS_WITH(amd::write_run(nan_run, "t", dir.path / "x.run"),
                      Catch::Matchers::ContainsSubstring("NaN"));
    amd::RunRankings unsorted{{"q1", {{"d1", 0.1}, {"d2", 0.9}}}};
    CHECK_THROWS_WITH(amd::write_run(unsorted, "t", dir.path / "x.run"),
                      Catch::Matchers::ContainsSubstring("not sorted"));
}

TEST_CASE("read_run validates rank structure") {
    TempDir dir;
    write_text(dir.path / "gap.run", "q1 Q0 d1 1 0.9 t\nq1 Q0 d2 3 0.5 t\n");
    CHECK_THROWS_WITH(amd::read_run(dir.path / "gap.run"),
                      Catch::Matchers::ContainsSubstring("rank gap"));
    write_text(dir.path / "dup.run", "q1 Q0 d1 1 0.9 t\nq1 Q0 d1 2 0.5 t\n");
    CHECK_THROWS_WITH(amd::read_run(dir.path / "dup.run"),
                      Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("run files round-trip 100 random rankings") {
    TempDir dir;
    std::mt19937_64 rng(7);
    amd::RunRankings rankings;
    for (int q = 0; q < 100; ++q) {
        std::string qid = "q" + std::to_string(q);
        size_t n = 1 + rng() % 50;
        amd::Ranking ranking;
        double score = 1000.0;
        for (size_t i = 0; i < n; ++i) {
            score -= std::uniform_real_distribution<double>(0.001, 5.0)(rng);
            ranking.push_back({"doc" + std::to_string(i), score});
        }
        rankings.emplace(qid, std::move(ranking));
    }
    amd::write_run(rankings, "roundtrip", dir.path / "rt.run");
    auto loaded = amd::read_run(dir.path / "rt.run");
    REQUIRE(loaded.size() == rankings.size());
    for (const auto& [qid, ranking] : rankings) {
        const auto& got = loaded.at(qid);
        REQUIRE(got.size() == ranking.size());
        for (size_t i = 0; i < ranking.size(); ++i) {
            CHECK(got[i].doc_id == ranking[i].doc_id);
            // identical up to 6-significant-digit text round-trip
            CHECK(amd::format_score(got[i].score) == amd::format_score(ranking[i].score));
        }
    }
    // writing the parsed rankings again reproduces the file byte for byte
    amd::write_run(loaded, "roundtrip", dir.path / "rt2.run");
    CHECK(amd::read_file(dir.path / "rt.run") == amd::read_file(dir.path / "rt2.run"));
}

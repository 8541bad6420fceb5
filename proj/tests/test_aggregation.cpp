#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "amd/aggregation.hpp"

using amd::build_dense_query;
using amd::build_sparse_query;
using amd::ExpansionRecord;
using amd::fuse_rrf;
using amd::Ranking;
using amd::RrfConfig;

namespace {

ExpansionRecord record_with(const std::string& query, const std::string& a1, const std::string& a2,
                            const std::string& a3) {
    ExpansionRecord record;
    record.query_id = "q1";
    record.initial_query = query;
    for (int i = 0; i < 3; ++i) {
        record.sub_questions[i] = {amd::kDimensions[i], "q" + std::to_string(i)};
        record.pseudo_answers[i] = {amd::kDimensions[i], "p" + std::to_string(i)};
    }
    record.refined_answers[0] = {amd::kDimensions[0], a1, amd::Verdict::kept};
    record.refined_answers[1] = {amd::kDimensions[1], a2, amd::Verdict::kept};
    record.refined_answers[2] = {amd::kDimensions[2], a3, amd::Verdict::kept};
    record.config_hash = "test";
    return record;
}

// Exact rational RRF oracle; denominators stay small enough for int64.
struct Fraction {
    long long num = 0;
    long long den = 1;
    void add_unit(long long d) {  // += 1/d
        num = num * d + den;
        den *= d;
    }
    bool operator>(const Fraction& other) const {
        return static_cast<__int128>(num) * other.den > static_cast<__int128>(other.num) * den;
    }
    bool operator==(const Fraction& other) const {
        return static_cast<__int128>(num) * other.den == static_cast<__int128>(other.num) * den;
    }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Ranking rrf_oracle(const std::vector<Ranking>& lists, const RrfConfig& config) {
    std::map<std::string, Fraction> table;
    for (const auto& list : lists)
        for (size_t pos = 0; pos < list.size(); ++pos)
            table[list[pos].doc_id].add_unit(config.k + static_cast<long long>(pos) + 1);
    std::vector<std::pair<std::string, Fraction>> scored(table.begin(), table.end());
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (!(a.second == b.second)) return a.second > b.second;
        return a.first < b.first;
    });
    Ranking out;
    for (const auto& [doc, frac] : scored) {
        if (out.size() >= static_cast<size_t>(config.per_list_depth)) break;
        out.push_back({doc, frac.value()});
    }
    return out;
}

std::vector<Ranking> random_lists(std::mt19937_64& rng, size_t n_lists, size_t pool, size_t max_len) {
    std::vector<Ranking> lists(n_lists);
    for (auto& list : lists) {
        std::vector<int> docs(pool);
        std::iota(docs.begin(), docs.end(), 0);
        std::shuffle(docs.begin(), docs.end(), rng);
        size_t len = 1 + rng() % max_len;
        double score = 100.0;
        for (size_t i = 0; i < std::min(len, docs.size()); ++i) {
            score -= 1.0;
            list.push_back({"d" + std::to_string(docs[i]), score});
        }
    }
    return lists;
}

}  // namespace

TEST_CASE("sparse expansion concatenates with [SEP] separators") {
    auto record = record_with("solar power", "A", "B", "C");
    CHECK(build_sparse_query(record, nullptr).text ==
          "solar power [SEP] solar power [SEP] solar power [SEP] A [SEP] B [SEP] C");
}

TEST_CASE("empty answer slots shrink the separator count with a warning") {
    auto record = record_with("Q", "", "", "");
    std::vector<std::string> warnings;
    auto out = build_sparse_query(record, [&](const std::string& w) { warnings.push_back(w); });
    CHECK(out.text == "Q [SEP] Q [SEP] Q");
    CHECK(warnings.size() == 3);

    auto partial = record_with("Q", "A", "", "C");
    auto partial_out = build_sparse_query(partial, nullptr);
    CHECK(partial_out.text == "Q [SEP] Q [SEP] Q [SEP] A [SEP] C");
}

TEST_CASE("sparse expansion splits back into its components") {
    std::mt19937_64 rng(11);
    auto random_text = [&](size_t max_words) {
        std::string text;
        size_t n = 1 + rng() % max_words;
        for (size_t i = 0; i < n; ++i) {
            if (i) text += ' ';
            text += "w" + std::to_string(rng() % 50);
        }
        return text;
    };
    for (int round = 0; round < 100; ++round) {
        auto record = record_with(random_text(6), random_text(12), random_text(12), random_text(12));
        auto text = build_sparse_query(record, nullptr).text;
        std::vector<std::string> parts;
        size_t start = 0;
        while (true) {
            size_t sep = text.find(" [SEP] ", start);
            if (sep == std::string::npos) {
                parts.push_back(text.substr(start));
                break;
            }
            parts.push_back(text.substr(start, sep - start));
            start = sep + 7;
        }
        REQUIRE(parts.size() == 6);
        CHECK(parts[0] == record.initial_query);
        CHECK(parts[1] == record.initial_query);
        CHECK(parts[2] == record.initial_query);
        CHECK(parts[3] == record.refined_answers[0].text);
        CHECK(parts[4] == record.refined_answers[1].text);
        CHECK(parts[5] == record.refined_answers[2].text);
    }
}

TEST_CASE("sparse expansion token count decomposes under a SEP-ignoring tokenizer") {
    amd::TokenizerConfig config;
    config.stopword_list = {"sep"};
    std::mt19937_64 rng(13);
    for (int round = 0; round < 50; ++round) {
        auto word = [&]() { return "t" + std::to_string(rng() % 30); };
        std::string q = word() + " " + word();
        std::string a1 = word(), a2 = word() + " " + word() + " " + word(), a3 = word();
        auto record = record_with(q, a1, a2, a3);
        auto expanded = build_sparse_query(record, nullptr).text;
        size_t expected = 3 * amd::tokenize(q, config).size() + amd::tokenize(a1, config).size() +
                          amd::tokenize(a2, config).size() + amd::tokenize(a3, config).size();
        CHECK(amd::tokenize(expanded, config).size() == expected);
    }
}

TEST_CASE("dense fusion trivial substitutions") {
    amd::EmbeddingProviderConfig config;
    config.dimension = 2;
    config.batch_size = 16;

    struct FixedEmbedder : amd::Embedder {
        std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
            std::vector<std::vector<double>> out;
            for (const auto& text : texts) {
                if (text == "query: Q") out.push_back({1.0, 0.0});
                else out.push_back({0.0, 1.0});
            }
            return out;
        }
        uint32_t dimension() const override { return 2; }
    } embedder;

    auto record = record_with("Q", "a", "b", "c");
    auto fused = build_dense_query(record, embedder, config).vector;
    CHECK(fused.values[0] == 0.7);  // exact
    CHECK(fused.values[1] == 0.3);  // exact

    struct ConstantEmbedder : amd::Embedder {
        std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
            return std::vector<std::vector<double>>(texts.size(), {0.25, -0.5});
        }
        uint32_t dimension() const override { return 2; }
    } constant;
    auto convex = build_dense_query(record, constant, config).vector;
    CHECK_THAT(convex.values[0], Catch::Matchers::WithinAbs(0.25, 1e-15));
    CHECK_THAT(convex.values[1], Catch::Matchers::WithinAbs(-0.5, 1e-15));
}

TEST_CASE("dense fusion matches an independent recomputation on random vectors") {
    amd::HashMockEmbedder embedder(24);
    amd::EmbeddingProviderConfig config;
    config.dimension = 24;
    std::mt19937_64 rng(7);
    for (int round = 0; round < 100; ++round) {
        auto record = record_with("query " + std::to_string(rng() % 1000),
                                  "ans a " + std::to_string(rng() % 1000),
                                  "ans b " + std::to_string(rng() % 1000),
                                  "ans c " + std::to_string(rng() % 1000));
        auto fused = build_dense_query(record, embedder, config).vector;

        auto q = amd::embed({record.initial_query}, amd::EmbedRole::query, embedder, config)[0];
        std::vector<amd::DenseVector> answers;
        for (const auto& a : record.refined_answers)
            answers.push_back(amd::embed({a.text}, amd::EmbedRole::query, embedder, config)[0]);
        double max_norm = 0.0;
        for (const auto& a : answers) max_norm = std::max(max_norm, a.norm);
        for (size_t d = 0; d < 24; ++d) {
            double expected = 0.7 * q.values[d] +
                              0.3 * ((answers[0].values[d] + answers[1].values[d] +
                                      answers[2].values[d]) / 3.0);
            CHECK_THAT(fused.values[d], Catch::Matchers::WithinAbs(expected, 1e-9));
        }
        // triangle inequality bound from the weights
        CHECK(fused.norm <= 0.7 * q.norm + 0.3 * max_norm + 1e-12);
    }
}

TEST_CASE("rrf closed-form checks") {
    Ranking l1{{"a", 3.0}, {"b", 2.0}};
    Ranking l2{{"a", 5.0}, {"c", 1.0}};
    Ranking l3{{"a", 9.0}, {"b", 8.0}};
    auto fused = fuse_rrf({l1, l2, l3}, RrfConfig{60, 1000});
    REQUIRE(!fused.empty());
    CHECK(fused[0].doc_id == "a");
    CHECK_THAT(fused[0].score, Catch::Matchers::WithinAbs(3.0 / 61.0, 1e-6));

    // doc "b": ranks 2 and 2 of two lists -> in this fixture use a fresh setup
    Ranking m1{{"x", 2.0}, {"d", 1.0}};
    Ranking m2{{"d", 2.0}, {"y", 1.0}};
    Ranking m3{{"z", 1.0}};
    auto partial = fuse_rrf({m1, m2, m3}, RrfConfig{60, 1000});
    double expected = 1.0 / 61.0 + 1.0 / 62.0;  // ranks 1 and 2
    bool found = false;
    for (const auto& entry : partial)
        if (entry.doc_id == "d") {
            found = true;
            CHECK_THAT(entry.score, Catch::Matchers::WithinAbs(expected, 1e-6));
        }
    CHECK(found);
}

TEST_CASE("rrf rejects duplicates and validates config") {
    Ranking bad{{"a", 2.0}, {"a", 1.0}};
    CHECK_THROWS_WITH(fuse_rrf({bad}), Catch::Matchers::ContainsSubstring("twice"));
    CHECK_THROWS_AS(fuse_rrf({}), amd::Error);
    CHECK_THROWS_AS(fuse_rrf({Ranking{}}, RrfConfig{-1, 10}), amd::Error);
    CHECK_THROWS_AS(fuse_rrf({Ranking{}}, RrfConfig{60, 0}), amd::Error);
}

TEST_CASE("rrf equals the exact-rational oracle on random triples") {
    std::mt19937_64 rng(20250809);
    for (int round = 0; round < 500; ++round) {
        RrfConfig config;
        config.k = static_cast<int>(rng() % 100);
        config.per_list_depth = 1 + static_cast<int>(rng() % 50);
        auto lists = random_lists(rng, 3, 25, 40);
        auto got = fuse_rrf(lists, config);
        auto expected = rrf_oracle(lists, config);
        INFO("round " << round << " k=" << config.k << " depth=" << config.per_list_depth);
        REQUIRE(got.size() == expected.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].doc_id == expected[i].doc_id);
            CHECK_THAT(got[i].score, Catch::Matchers::WithinAbs(expected[i].score, 1e-9));
        }

        // permutation invariance: reversed list order, bit-identical output
        std::vector<Ranking> reversed(lists.rbegin(), lists.rend());
        auto shuffled = fuse_rrf(reversed, config);
        REQUIRE(shuffled.size() == got.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(shuffled[i].doc_id == got[i].doc_id);
            CHECK(shuffled[i].score == got[i].score);
        }

        // monotonicity: moving a doc up one rank never lowers its score
        size_t target = rng() % lists.size();
        if (lists[target].size() >= 2) {
            size_t pos = 1 + rng() % (lists[target].size() - 1);
            auto doc = lists[target][pos].doc_id;
            auto find_score = [&](const Ranking& fused_list) {
                for (const auto& e : fused_list)
                    if (e.doc_id == doc) return e.score;
                return 0.0;
            };
            double before = find_score(fuse_rrf(lists, RrfConfig{config.k, 1000000}));
            std::swap(lists[target][pos - 1], lists[target][pos]);
            double after = find_score(fuse_rrf(lists, RrfConfig{config.k, 1000000}));
            CHECK(after >= before);
        }
    }
}

TEST_CASE("rrf output depth is capped") {
    std::mt19937_64 rng(3);
    auto lists = random_lists(rng, 3, 30, 30);
    auto fused = fuse_rrf(lists, RrfConfig{60, 5});
    CHECK(fused.size() <= 5);
}

TEST_CASE("run_rrf_mode fuses one search per refined answer") {
    std::vector<amd::Document> docs{
        {"d1", "", "solar panels efficiency"},
        {"d2", "", "photovoltaic cells"},
        {"d3", "", "wind turbines"},
        {"d4", "", "solar thermal storage"},
    };
    auto index = amd::build_index(docs, amd::TokenizerConfig{});
    auto record = record_with("solar", "photovoltaic", "thermal storage", "wind");
    RrfConfig config{60, 10};
    auto fused = run_rrf_mode(record, index, config);

    std::vector<Ranking> manual;
    for (const auto& answer : record.refined_answers)
        manual.push_back(index.search(record.initial_query + " [SEP] " + answer.text, 10));
    auto expected = fuse_rrf(manual, config);
    REQUIRE(fused.size() == expected.size());
    for (size_t i = 0; i < fused.size(); ++i) {
        CHECK(fused[i].doc_id == expected[i].doc_id);
        CHECK(fused[i].score == expected[i].score);
    }
    CHECK(!fused.empty());
}

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amd/errors.hpp"
#include "amd/types.hpp"
#include "amd/util.hpp"

namespace amd {

enum class MetricKind { ndcg, recall };

struct MetricSpec {
    MetricKind kind = MetricKind::ndcg;
    int cutoff = 10;
    int rel_threshold = 1;  // recall only: grade >= threshold counts as relevant

    std::string label() const {
        return (kind == MetricKind::ndcg ? std::string("ndcg@") : std::string("recall@")) +
               std::to_string(cutoff);
    }

    // Accepts "ndcg@10", "recall@1000", "r@1000" (case-insensitive).
    static MetricSpec parse(std::string_view text, int rel_threshold = 1) {
        std::string s = lowercase_ascii(text);
        size_t at = s.find('@');
        if (at == std::string::npos) throw Error("bad metric '" + std::string(text) + "', expected kind@cutoff");
        std::string kind = s.substr(0, at);
        MetricSpec spec;
        if (kind == "ndcg") spec.kind = MetricKind::ndcg;
        else if (kind == "recall" || kind == "r") spec.kind = MetricKind::recall;
        else throw Error("unknown metric kind '" + kind + "'");
        try {
            spec.cutoff = std::stoi(s.substr(at + 1));
        } catch (const std::exception&) {
            throw Error("bad metric cutoff in '" + std::string(text) + "'");
        }
        if (spec.cutoff < 1) throw Error("metric cutoff must be >= 1");
        spec.rel_threshold = rel_threshold;
        return spec;
    }
};

// nDCG@k with exponential gain (2^grade - 1) and log2(rank+1) discount.
// Returns 0 when the query has no positively graded document.
inline double ndcg_at_k(const Ranking& ranking, const QrelsForQuery& qrels, int k) {
    if (k < 1) throw Error("ndcg cutoff must be >= 1");
    double dcg = 0.0;
    size_t depth = std::min(ranking.size(), static_cast<size_t>(k));
    for (size_t r = 0; r < depth; ++r) {
        auto it = qrels.find(ranking[r].doc_id);
        if (it == qrels.end() || it->second <= 0) continue;
        dcg += (std::exp2(static_cast<double>(it->second)) - 1.0) /
               std::log2(static_cast<double>(r) + 2.0);
    }
    std::vector<int> grades;
    grades.reserve(qrels.size());
    for (const auto& [doc, grade] : qrels)
        if (grade > 0) grades.push_back(grade);
    if (grades.empty()) return 0.0;
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double idcg = 0.0;
    size_t ideal_depth = std::min(grades.size(), static_cast<size_t>(k));
    for (size_t r = 0; r < ideal_depth; ++r)
        idcg += (std::exp2(static_cast<double>(grades[r])) - 1.0) /
                std::log2(static_cast<double>(r) + 2.0);
    return dcg / idcg;
}

// Fraction of documents with grade >= rel_threshold retrieved in the top k.
// Queries with no relevant document are undefined (excluded from averages).
inline std::optional<double> recall_at_k(const Ranking& ranking, const QrelsForQuery& qrels, int k,
                                         int rel_threshold = 1) {
    if (k < 1) throw Error("recall cutoff must be >= 1");
    size_t relevant = 0;
    for (const auto& [doc, grade] : qrels)
        if (grade >= rel_threshold) ++relevant;
    if (relevant == 0) return std::nullopt;
    size_t hit = 0;
    size_t depth = std::min(ranking.size(), static_cast<size_t>(k));
    for (size_t r = 0; r < depth; ++r) {
        auto it = qrels.find(ranking[r].doc_id);
        if (it != qrels.end() && it->second >= rel_threshold) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(relevant);
}

struct SignificanceEntry {
    double t_stat = 0.0;
    double p_value = 1.0;
    bool rejected = false;
};

struct EvalReport {
    // query_id -> metric label -> value (undefined metrics omitted)
    std::map<std::string, std::map<std::string, double>> per_query;
    std::map<std::string, double> aggregate;
    // baseline name -> metric label -> test result
    std::map<std::string, std::map<std::string, SignificanceEntry>> significance;
    double alpha = 0.05;

    nlohmann::json to_json() const {
        nlohmann::json sig = nlohmann::json::object();
        for (const auto& [baseline, metrics] : significance) {
            nlohmann::json entry = nlohmann::json::object();
            for (const auto& [metric, s] : metrics)
                entry[metric] = {{"t_stat", s.t_stat}, {"p_value", s.p_value}, {"rejected", s.rejected}};
            sig[baseline] = std::move(entry);
        }
        return nlohmann::json{{"per_query", per_query},
                              {"aggregate", aggregate},
                              {"significance", sig},
                              {"alpha", alpha}};
    }
};

// Per-query metrics for every judged query (queries absent from the run are
// scored against an empty ranking); aggregates are unweighted means.
inline EvalReport evaluate_run(const RunRankings& run, const Qrels& qrels,
                               const std::vector<MetricSpec>& metrics,
                               const WarningSink& warnings = warn_stderr) {
    static const Ranking kEmpty;
    EvalReport report;
    for (const auto& [qid, ranking] : run)
        if (!qrels.count(qid))
            emit_warning(warnings, "run query '" + qid + "' has no qrels; skipped");
    std::map<std::string, std::pair<double, size_t>> sums;  // label -> (sum, count)
    for (const auto& [qid, judged] : qrels) {
        auto run_it = run.find(qid);
        const Ranking& ranking = run_it == run.end() ? kEmpty : run_it->second;
        for (const auto& spec : metrics) {
            std::optional<double> value;
            if (spec.kind == MetricKind::ndcg) value = ndcg_at_k(ranking, judged, spec.cutoff);
            else value = recall_at_k(ranking, judged, spec.cutoff, spec.rel_threshold);
            if (!value) continue;
            report.per_query[qid][spec.label()] = *value;
            auto& [sum, count] = sums[spec.label()];
            sum += *value;
            ++count;
        }
    }
    for (const auto& [label, sc] : sums)
        report.aggregate[label] = sc.second ? sc.first / static_cast<double>(sc.second) : 0.0;
    // TREC-style combined score when exactly one nDCG and one recall metric
    // were requested.
    size_t n_ndcg = 0, n_recall = 0;
    std::string ndcg_label, recall_label;
    for (const auto& spec : metrics) {
        if (spec.kind == MetricKind::ndcg) { ++n_ndcg; ndcg_label = spec.label(); }
        else { ++n_recall; recall_label = spec.label(); }
    }
    if (n_ndcg == 1 && n_recall == 1 && report.aggregate.count(ndcg_label) &&
        report.aggregate.count(recall_label))
        report.aggregate["avg_score"] =
            0.5 * (report.aggregate[ndcg_label] + report.aggregate[recall_label]);
    return report;
}

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 400;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw Error("incomplete beta did not converge");
}

inline double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Two-sided p for Student's t with nu degrees of freedom.
inline double student_t_two_sided_p(double t, double nu) {
    if (std::isinf(t)) return 0.0;
    double x = nu / (nu + t * t);
    return detail::reg_inc_beta(nu / 2.0, 0.5, x);
}

struct TTestResult {
    double t_stat = 0.0;
    double p_value = 1.0;
    size_t n = 0;
};

// Paired two-sided t-test on per-query differences a - b. Zero-variance
// inputs use the documented degenerate convention: p = 1 when the mean
// difference is 0, otherwise p = 0 with an infinite t statistic.
inline TTestResult paired_t_test_diffs(const std::vector<double>& diffs) {
    size_t n = diffs.size();
    if (n < 2) throw Error("paired t-test needs at least 2 common queries");
    double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    double var = ss / static_cast<double>(n - 1);
    TTestResult result;
    result.n = n;
    if (var <= 0.0) {
        if (mean == 0.0) {
            result.t_stat = 0.0;
            result.p_value = 1.0;
        } else {
            result.t_stat = mean > 0 ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
            result.p_value = 0.0;
        }
        return result;
    }
    result.t_stat = mean / std::sqrt(var / static_cast<double>(n));
    result.p_value = student_t_two_sided_p(result.t_stat, static_cast<double>(n - 1));
    return result;
}

inline TTestResult paired_t_test(const std::map<std::string, double>& per_query_a,
                                 const std::map<std::string, double>& per_query_b) {
    std::vector<double> diffs;
    for (const auto& [qid, a] : per_query_a) {
        auto it = per_query_b.find(qid);
        if (it != per_query_b.end()) diffs.push_back(a - it->second);
    }
    return paired_t_test_diffs(diffs);
}

// Step-down Holm-Bonferroni at level alpha; returns rejection flags in the
// original order of p_values.
inline std::vector<bool> holm_bonferroni(const std::vector<double>& p_values, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must be in (0,1)");
    for (double p : p_values)
        if (!(p >= 0.0 && p <= 1.0)) throw Error("p-value outside [0,1]");
    size_t m = p_values.size();
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return p_values[a] < p_values[b]; });
    std::vector<bool> rejected(m, false);
    for (size_t i = 0; i < m; ++i) {
        double threshold = alpha / static_cast<double>(m - i);
        if (p_values[order[i]] <= threshold) rejected[order[i]] = true;
        else break;
    }
    return rejected;
}

}  // namespace amd

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "codejury/judging.hpp"

namespace codejury::metrics {

// tp: passes tests, judged correct. fp: fails tests, judged correct.
// fn: passes tests, judged incorrect. tn: fails tests, judged incorrect.
struct ConfusionMatrix {
    long tp = 0;
    long tn = 0;
    long fp = 0;
    long fn = 0;

    long total() const { return tp + tn + fp + fn; }
};

struct EvaluationRecord {
    std::string task_id;
    int repetition = 0;
    std::string strategy;  // judge-K | log-likelihood | random | single-candidate
    std::string candidate_id;
    bool pass = false;
    double total_latency_s = 0.0;  // generation + judging + selection
    bool fallback = false;         // cleaning left no accepted candidate
};

// Grand mean of the binary pass values over a complete T x N grid for one
// strategy. Throws IncompleteError when any (task, repetition) cell is
// missing or duplicated.
double pass_at_1(const std::vector<EvaluationRecord>& records);

// Tally of labeled judgments; unparseable entries are excluded from the
// matrix and counted in *excluded when provided.
ConfusionMatrix confusion(const std::vector<judge::LabeledJudgment>& judgments);

// Row-normalized percentages (by test-execution truth), as in a
// per-model confusion-matrix figure.
struct ConfusionRates {
    double tp_rate = 0.0;  // of truth-pass rows
    double fn_rate = 0.0;
    double tn_rate = 0.0;  // of truth-fail rows
    double fp_rate = 0.0;
};
ConfusionRates row_rates(const ConfusionMatrix& m);

struct KappaResult {
    double kappa = 0.0;
    std::string band;  // chance | weak | fair | moderate | substantial | near-perfect | perfect
};

KappaResult cohens_kappa(const ConfusionMatrix& m);

// Discordant counts from paired pass vectors: b = first passes only,
// c = second passes only.
std::pair<long, long> discordant_counts(const std::vector<std::pair<bool, bool>>& paired);

// Exact binomial McNemar: two-sided p = min(1, 2 P(X <= min(b,c))) with
// X ~ Binomial(b+c, 1/2); p = 1 when b+c = 0.
double mcnemar_exact(long b, long c);
double mcnemar_exact(const std::vector<std::pair<bool, bool>>& paired);

// Benjamini-Hochberg step-up adjustment, returned in input order.
std::vector<double> benjamini_hochberg(const std::vector<double>& p_values);

struct OddsRatioResult {
    double value = 1.0;
    bool continuity_corrected = false;  // a zero discordant cell used +0.5
};

// Matched-pairs odds ratio b/c with 0.5 continuity correction on zero
// cells.
OddsRatioResult odds_ratio(long b, long c);
OddsRatioResult odds_ratio(const std::vector<std::pair<bool, bool>>& paired);

// Pooled 2x2 odds ratio (ad/bc over the marginal table), provided for
// comparison; matched-pairs is the default used in reports.
OddsRatioResult pooled_odds_ratio(const std::vector<std::pair<bool, bool>>& paired);

// Mean total_latency_s per strategy.
std::map<std::string, double> timing_summary(const std::vector<EvaluationRecord>& records);

void to_json(nlohmann::json& j, const EvaluationRecord& r);
void from_json(const nlohmann::json& j, EvaluationRecord& r);
void to_json(nlohmann::json& j, const ConfusionMatrix& m);
void from_json(const nlohmann::json& j, ConfusionMatrix& m);

}  // namespace codejury::metrics

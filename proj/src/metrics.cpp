#include "codejury/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "codejury/util.hpp"

namespace codejury::metrics {

double pass_at_1(const std::vector<EvaluationRecord>& records) {
    if (records.empty()) throw IncompleteError("pass_at_1: no records");

    std::set<std::string> tasks;
    int max_rep = 0;
    for (const auto& r : records) {
        tasks.insert(r.task_id);
        max_rep = std::max(max_rep, r.repetition);
    }
    const int reps = max_rep + 1;

    std::map<std::pair<std::string, int>, int> cells;
    for (const auto& r : records) ++cells[{r.task_id, r.repetition}];

    std::string missing;
    for (const auto& task : tasks) {
        for (int rep = 0; rep < reps; ++rep) {
            auto it = cells.find({task, rep});
            if (it == cells.end()) {
                missing += " (" + task + ", rep " + std::to_string(rep) + ")";
            } else if (it->second > 1) {
                throw IncompleteError("pass_at_1: duplicate cell (" + task + ", rep " + std::to_string(rep) + ")");
            }
        }
    }
    if (!missing.empty()) throw IncompleteError("pass_at_1: incomplete grid, missing cells:" + missing);

    long passes = 0;
    for (const auto& r : records) passes += r.pass ? 1 : 0;
    return static_cast<double>(passes) / static_cast<double>(records.size());
}

ConfusionMatrix confusion(const std::vector<judge::LabeledJudgment>& judgments) {
    ConfusionMatrix m;
    for (const auto& jm : judgments) {
        if (jm.y == 1) {
            if (jm.truth_pass)
                ++m.tp;
            else
                ++m.fp;
        } else {
            if (jm.truth_pass)
                ++m.fn;
            else
                ++m.tn;
        }
    }
    return m;
}

ConfusionRates row_rates(const ConfusionMatrix& m) {
    ConfusionRates r;
    long pass_row = m.tp + m.fn;
    long fail_row = m.tn + m.fp;
    if (pass_row > 0) {
        r.tp_rate = static_cast<double>(m.tp) / static_cast<double>(pass_row);
        r.fn_rate = static_cast<double>(m.fn) / static_cast<double>(pass_row);
    }
    if (fail_row > 0) {
        r.tn_rate = static_cast<double>(m.tn) / static_cast<double>(fail_row);
        r.fp_rate = static_cast<double>(m.fp) / static_cast<double>(fail_row);
    }
    return r;
}

namespace {

std::string kappa_band(double kappa) {
    constexpr double eps = 1e-9;  // keep exact band edges from drifting on rounding
    if (kappa >= 1.0 - eps) return "perfect";
    if (kappa > 0.80 + eps) return "near-perfect";
    if (kappa > 0.60 + eps) return "substantial";
    if (kappa > 0.40 + eps) return "moderate";
    if (kappa > 0.20 + eps) return "fair";
    if (kappa >= 0.10 - eps) return "weak";
    return "chance";
}

}  // namespace

KappaResult cohens_kappa(const ConfusionMatrix& m) {
    const double n = static_cast<double>(m.total());
    if (n <= 0) throw std::runtime_error("cohens_kappa: empty matrix");
    const double p_o = static_cast<double>(m.tp + m.tn) / n;
    const double judged_pos = static_cast<double>(m.tp + m.fp) / n;
    const double truth_pos = static_cast<double>(m.tp + m.fn) / n;
    const double p_e = judged_pos * truth_pos + (1.0 - judged_pos) * (1.0 - truth_pos);

    double kappa;
    if (p_e >= 1.0) {
        kappa = p_o >= 1.0 ? 1.0 : 0.0;
    } else {
        kappa = (p_o - p_e) / (1.0 - p_e);
    }
    return {kappa, kappa_band(kappa)};
}

std::pair<long, long> discordant_counts(const std::vector<std::pair<bool, bool>>& paired) {
    long b = 0, c = 0;
    for (const auto& [a_pass, b_pass] : paired) {
        if (a_pass && !b_pass) ++b;
        if (!a_pass && b_pass) ++c;
    }
    return {b, c};
}

double mcnemar_exact(long b, long c) {
    if (b < 0 || c < 0) throw std::invalid_argument("mcnemar_exact: negative count");
    const long n = b + c;
    if (n == 0) return 1.0;
    const long m = std::min(b, c);
    // P(X <= m) for X ~ Binomial(n, 1/2) via log-space binomial terms.
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    double tail = 0.0;
    for (long k = 0; k <= m; ++k) {
        double log_choose = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                            std::lgamma(static_cast<double>(n - k) + 1.0);
        tail += std::exp(log_choose + log_half_n);
    }
    return std::min(1.0, 2.0 * tail);
}

double mcnemar_exact(const std::vector<std::pair<bool, bool>>& paired) {
    auto [b, c] = discordant_counts(paired);
    return mcnemar_exact(b, c);
}

std::vector<double> benjamini_hochberg(const std::vector<double>& p_values) {
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("benjamini_hochberg: p-value outside [0,1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    std::vector<double> adjusted(m, 0.0);
    double running_min = 1.0;
    for (std::size_t rank = m; rank >= 1; --rank) {
        std::size_t idx = order[rank - 1];
        // m/rank first: the factor is exactly 1.0 at the top rank, so the
        // adjusted value never rounds below the input.
        double scaled = p_values[idx] * (static_cast<double>(m) / static_cast<double>(rank));
        running_min = std::min(running_min, scaled);
        adjusted[idx] = std::min(1.0, running_min);
    }
    return adjusted;
}

OddsRatioResult odds_ratio(long b, long c) {
    if (b < 0 || c < 0) throw std::invalid_argument("odds_ratio: negative count");
    OddsRatioResult result;
    if (b == 0 || c == 0) {
        result.value = (static_cast<double>(b) + 0.5) / (static_cast<double>(c) + 0.5);
        result.continuity_corrected = true;
    } else {
        result.value = static_cast<double>(b) / static_cast<double>(c);
    }
    return result;
}

OddsRatioResult odds_ratio(const std::vector<std::pair<bool, bool>>& paired) {
    auto [b, c] = discordant_counts(paired);
    return odds_ratio(b, c);
}

OddsRatioResult pooled_odds_ratio(const std::vector<std::pair<bool, bool>>& paired) {
    // 2x2 of outcome by treatment: a = A passes, b = A fails, c = B passes,
    // d = B fails; OR = (a*d)/(b*c).
    long a_pass = 0, a_fail = 0, b_pass = 0, b_fail = 0;
    for (const auto& [first, second] : paired) {
        (first ? a_pass : a_fail) += 1;
        (second ? b_pass : b_fail) += 1;
    }
    OddsRatioResult result;
    if (a_pass == 0 || a_fail == 0 || b_pass == 0 || b_fail == 0) {
        result.continuity_corrected = true;
        result.value = ((a_pass + 0.5) * (b_fail + 0.5)) / ((a_fail + 0.5) * (b_pass + 0.5));
    } else {
        result.value = (static_cast<double>(a_pass) * static_cast<double>(b_fail)) /
                       (static_cast<double>(a_fail) * static_cast<double>(b_pass));
    }
    return result;
}

std::map<std::string, double> timing_summary(const std::vector<EvaluationRecord>& records) {
    std::map<std::string, std::pair<double, long>> sums;
    for (const auto& r : records) {
        auto& [sum, count] = sums[r.strategy];
        sum += r.total_latency_s;
        ++count;
    }
    std::map<std::string, double> means;
    for (const auto& [strategy, sc] : sums) means[strategy] = sc.first / static_cast<double>(sc.second);
    return means;
}

void to_json(nlohmann::json& j, const EvaluationRecord& r) {
    j = nlohmann::json{{"task_id", r.task_id},
                       {"repetition", r.repetition},
                       {"strategy", r.strategy},
                       {"candidate_id", r.candidate_id},
                       {"pass", r.pass},
                       {"total_latency_s", r.total_latency_s},
                       {"fallback", r.fallback}};
}

void from_json(const nlohmann::json& j, EvaluationRecord& r) {
    r.task_id = j.at("task_id").get<std::string>();
    r.repetition = j.at("repetition").get<int>();
    r.strategy = j.at("strategy").get<std::string>();
    r.candidate_id = j.at("candidate_id").get<std::string>();
    r.pass = j.at("pass").get<bool>();
    r.total_latency_s = j.value("total_latency_s", 0.0);
    r.fallback = j.value("fallback", false);
}

void to_json(nlohmann::json& j, const ConfusionMatrix& m) {
    j = nlohmann::json{{"tp", m.tp}, {"tn", m.tn}, {"fp", m.fp}, {"fn", m.fn}};
}

void from_json(const nlohmann::json& j, ConfusionMatrix& m) {
    m.tp = j.at("tp").get<long>();
    m.tn = j.at("tn").get<long>();
    m.fp = j.at("fp").get<long>();
    m.fn = j.at("fn").get<long>();
}

}  // namespace codejury::metrics

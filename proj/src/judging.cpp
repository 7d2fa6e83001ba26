#include "codejury/judging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include "codejury/util.hpp"

namespace codejury::judge {

namespace {

constexpr const char* kPromptTemplate =
    "You will be provided with the description (\"Description\") and the signature (\"Signature\") of a "
    "{language} function to implement. You will also see a candidate implementation (\"Candidate\"). "
    "Your role is to evaluate the correctness of the Candidate, providing as output either 0 or 1, and no "
    "other text:\n"
    "\n"
    "0. **Wrong Implementation**: The implementation does not correctly implement the described function.\n"
    "1. **Correct Implementation**: The implementation correctly implements the described function.\n"
    "\n"
    "# Description: {description}\n"
    "# Signature: {signature}\n"
    "# Candidate: {candidate}\n"
    "# Output: ";

std::string display_language(const std::string& tag) {
    std::string lower = tag;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "java") return "Java";
    if (lower == "python" || lower == "py") return "Python";
    if (lower == "javascript" || lower == "js" || lower == "node") return "JavaScript";
    if (lower == "typescript" || lower == "ts") return "TypeScript";
    if (lower == "cpp" || lower == "c++") return "C++";
    if (lower == "csharp" || lower == "c#") return "C#";
    if (lower == "c") return "C";
    return tag;
}

}  // namespace

std::string build_judge_prompt(const corpus::CodingTask& task, const gen::CandidateImplementation& candidate) {
    std::string prompt = kPromptTemplate;
    prompt = replace_all(std::move(prompt), "{language}", display_language(task.language_tag));
    prompt = replace_all(std::move(prompt), "{description}", task.description);
    prompt = replace_all(std::move(prompt), "{signature}", task.signature);
    prompt = replace_all(std::move(prompt), "{candidate}", candidate.text);
    return prompt;
}

std::optional<VerdictParse> parse_verdict(const backends::CompletionResult& result) {
    std::string_view token = first_token(result.text);
    if (token != "0" && token != "1") return std::nullopt;

    VerdictParse parse;
    parse.y = token == "1" ? 1 : 0;

    if (!result.token_logprobs || result.token_logprobs->empty()) {
        parse.p_raw = 1.0;
        parse.from_logprobs = false;  // flagged uncalibratable
        return parse;
    }

    // Locate the token that carries the verdict digit: the first token
    // whose trimmed text is non-empty.
    int position = -1;
    double chosen_lp = 0.0;
    int pos = 0;
    for (const auto& tl : *result.token_logprobs) {
        if (!trim(tl.token).empty()) {
            position = pos;
            chosen_lp = tl.logprob;
            break;
        }
        ++pos;
    }
    if (position < 0) {
        parse.p_raw = 1.0;
        parse.from_logprobs = false;
        return parse;
    }

    // Two-way renormalization over {"0","1"} when the alternatives at the
    // verdict position expose both digits; otherwise the raw token mass.
    std::optional<double> lp_zero, lp_one;
    if (result.alt_logprobs_at) {
        auto it = result.alt_logprobs_at->find(position);
        if (it != result.alt_logprobs_at->end()) {
            for (const auto& alt : it->second) {
                std::string_view alt_tok = trim(alt.token);
                if (alt_tok == "0" && !lp_zero) lp_zero = alt.logprob;
                if (alt_tok == "1" && !lp_one) lp_one = alt.logprob;
            }
        }
    }
    parse.from_logprobs = true;
    if (lp_zero && lp_one) {
        double chosen = parse.y == 1 ? *lp_one : *lp_zero;
        double other = parse.y == 1 ? *lp_zero : *lp_one;
        parse.p_raw = std::exp(chosen) / (std::exp(chosen) + std::exp(other));
    } else {
        parse.p_raw = std::exp(chosen_lp);
    }
    return parse;
}

CalibrationProfile fit_calibration(const std::string& judge_name, const std::vector<double>& raw_confidences,
                                   const std::string& source) {
    std::set<double> distinct(raw_confidences.begin(), raw_confidences.end());
    if (distinct.size() < 2)
        throw std::runtime_error("degenerate calibration for judge '" + judge_name +
                                 "': fewer than two distinct confidences on the validation set");
    CalibrationProfile profile;
    profile.judge_name = judge_name;
    profile.min_conf = *distinct.begin();
    profile.max_conf = *distinct.rbegin();
    profile.source = source;
    return profile;
}

double calibrate(double p_raw, const CalibrationProfile& profile) {
    double scaled = (p_raw - profile.min_conf) / (profile.max_conf - profile.min_conf);
    return std::clamp(scaled, 0.0, 1.0);
}

EnsembleScore ensemble_score(const std::string& candidate_id, const std::vector<Judgment>& judgments) {
    if (judgments.empty()) throw UsageError("ensemble_score: at least one judgment required");
    EnsembleScore result;
    result.candidate_id = candidate_id;
    result.per_judge = judgments;
    double score = 1.0;
    for (const auto& jm : judgments) {
        if (jm.parse_status != ParseStatus::ok) {
            score *= 0.5;  // neutral factor, keeps K fixed
        } else if (jm.verdict == 1) {
            score *= jm.p;
        } else {
            score *= 1.0 - jm.p;
        }
    }
    result.score = score;
    return result;
}

const gen::CandidateImplementation& select_by_judges(const std::vector<gen::CandidateImplementation>& candidates,
                                                     const std::vector<EnsembleScore>& scores) {
    if (candidates.empty()) throw UsageError("select_by_judges: no candidates");
    if (candidates.size() != scores.size()) throw UsageError("select_by_judges: scores not parallel to candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        double s = scores[i].score;
        double b = scores[best].score;
        if (s > b || (s == b && candidates[i].sample_index < candidates[best].sample_index)) best = i;
    }
    return candidates[best];
}

const gen::CandidateImplementation& select_by_loglikelihood(
    const std::vector<gen::CandidateImplementation>& candidates) {
    if (candidates.empty()) throw UsageError("select_by_loglikelihood: no candidates");
    for (const auto& c : candidates) {
        if (!c.mean_token_logprob)
            throw std::runtime_error("log-likelihood selection unavailable: candidate '" + c.candidate_id +
                                     "' carries no token logprobs");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        double s = *candidates[i].mean_token_logprob;
        double b = *candidates[best].mean_token_logprob;
        if (s > b || (s == b && candidates[i].sample_index < candidates[best].sample_index)) best = i;
    }
    return candidates[best];
}

const gen::CandidateImplementation& select_random(const std::vector<gen::CandidateImplementation>& candidates,
                                                  std::uint64_t seed) {
    if (candidates.empty()) throw UsageError("select_random: no candidates");
    std::mt19937_64 rng(seed);
    return candidates[static_cast<std::size_t>(bounded_uint(rng, candidates.size()))];
}

std::vector<SweepPoint> sweep_precision_by_threshold(const std::vector<LabeledJudgment>& judgments,
                                                     const std::vector<double>& thresholds) {
    std::vector<SweepPoint> points;
    points.reserve(thresholds.size());
    const double total = static_cast<double>(judgments.size());
    for (double t : thresholds) {
        SweepPoint point;
        point.threshold = t;
        long tp = 0, fp = 0, tn = 0, fn = 0, retained = 0;
        for (const auto& jm : judgments) {
            if (jm.confidence < t) continue;
            ++retained;
            if (jm.y == 1) {
                if (jm.truth_pass)
                    ++tp;
                else
                    ++fp;
            } else {
                if (jm.truth_pass)
                    ++fn;
                else
                    ++tn;
            }
        }
        point.coverage = total > 0 ? static_cast<double>(retained) / total : 0.0;
        if (tp + fp > 0) point.precision_correct = static_cast<double>(tp) / static_cast<double>(tp + fp);
        if (tn + fn > 0) point.precision_incorrect = static_cast<double>(tn) / static_cast<double>(tn + fn);
        points.push_back(point);
    }
    return points;
}

std::vector<double> paper_threshold_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 8; ++i) grid.push_back(static_cast<double>(i) / 10.0);
    for (int i = 81; i <= 100; ++i) grid.push_back(static_cast<double>(i) / 100.0);
    return grid;
}

void to_json(nlohmann::json& j, const Judgment& jm) {
    j = nlohmann::json{{"judge_name", jm.judge_name},
                       {"candidate_id", jm.candidate_id},
                       {"y", jm.verdict},
                       {"p_raw", jm.p_raw},
                       {"p", jm.p},
                       {"parse_status", jm.parse_status == ParseStatus::ok ? "ok" : "unparseable"},
                       {"from_logprobs", jm.from_logprobs},
                       {"latency_s", jm.latency_s}};
}

void from_json(const nlohmann::json& j, Judgment& jm) {
    jm.judge_name = j.at("judge_name").get<std::string>();
    jm.candidate_id = j.at("candidate_id").get<std::string>();
    jm.verdict = j.at("y").get<int>();
    jm.p_raw = j.at("p_raw").get<double>();
    jm.p = j.at("p").get<double>();
    jm.parse_status = j.at("parse_status").get<std::string>() == "ok" ? ParseStatus::ok : ParseStatus::unparseable;
    jm.from_logprobs = j.value("from_logprobs", true);
    jm.latency_s = j.value("latency_s", 0.0);
}

void to_json(nlohmann::json& j, const CalibrationProfile& p) {
    j = nlohmann::json{
        {"judge_name", p.judge_name}, {"min_conf", p.min_conf}, {"max_conf", p.max_conf}, {"source", p.source}};
}

void from_json(const nlohmann::json& j, CalibrationProfile& p) {
    p.judge_name = j.at("judge_name").get<std::string>();
    p.min_conf = j.at("min_conf").get<double>();
    p.max_conf = j.at("max_conf").get<double>();
    p.source = j.value("source", std::string());
}

}  // namespace codejury::judge

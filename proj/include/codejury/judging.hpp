#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "codejury/backends.hpp"
#include "codejury/corpus.hpp"
#include "codejury/generation.hpp"

namespace codejury::judge {

enum class ParseStatus { ok, unparseable };

struct Judgment {
    std::string judge_name;
    std::string candidate_id;
    int verdict = 0;        // y: 1 = judged correct, 0 = judged incorrect
    double p_raw = 0.0;     // confidence of the emitted verdict token
    double p = 0.0;         // min-max calibrated confidence
    ParseStatus parse_status = ParseStatus::unparseable;
    bool from_logprobs = false;  // false means p_raw defaulted to 1.0, uncalibratable
    double latency_s = 0.0;
};

struct CalibrationProfile {
    std::string judge_name;
    double min_conf = 0.0;
    double max_conf = 1.0;
    std::string source;  // validation-set identifier
};

struct EnsembleScore {
    std::string candidate_id;
    double score = 0.0;
    std::vector<Judgment> per_judge;
};

// The zero-shot judging prompt with {language}, {description}, {signature}
// and {candidate} substituted. Plain concatenation, no escaping; identical
// inputs yield identical bytes.
std::string build_judge_prompt(const corpus::CodingTask& task, const gen::CandidateImplementation& candidate);

struct VerdictParse {
    int y = 0;
    double p_raw = 1.0;
    bool from_logprobs = false;
};

// Reads the verdict from a judge completion: the first non-whitespace
// token decides, "0" or "1". The confidence is the probability mass of
// the emitted token; when the alternatives at that position include both
// digits it is renormalized over the pair. Returns nullopt when the first
// token is neither digit.
std::optional<VerdictParse> parse_verdict(const backends::CompletionResult& result);

// Min/max of the raw confidences observed on the validation set. Throws
// on fewer than two distinct values (degenerate calibration).
CalibrationProfile fit_calibration(const std::string& judge_name, const std::vector<double>& raw_confidences,
                                   const std::string& source);

// Min-max normalization clamped to [0, 1].
double calibrate(double p_raw, const CalibrationProfile& profile);

// Bayesian ensemble score: the product over judges of p for a "correct"
// verdict and 1-p otherwise. Unparseable judgments contribute a neutral
// factor of 0.5. Throws when the judgment list is empty.
EnsembleScore ensemble_score(const std::string& candidate_id, const std::vector<Judgment>& judgments);

// Candidate with the highest ensemble score; ties go to the lowest
// sample_index. `scores` is parallel to `candidates`.
const gen::CandidateImplementation& select_by_judges(const std::vector<gen::CandidateImplementation>& candidates,
                                                     const std::vector<EnsembleScore>& scores);

// Candidate with the highest mean token logprob; ties go to the lowest
// sample_index. Throws when any candidate lacks logprobs.
const gen::CandidateImplementation& select_by_loglikelihood(const std::vector<gen::CandidateImplementation>& candidates);

// Uniform choice, deterministic for a fixed seed and candidate order.
const gen::CandidateImplementation& select_random(const std::vector<gen::CandidateImplementation>& candidates,
                                                  std::uint64_t seed);

struct LabeledJudgment {
    int y = 0;               // judge's verdict
    double confidence = 0.0; // confidence used for thresholding
    bool truth_pass = false; // test-execution ground truth
};

struct SweepPoint {
    double threshold = 0.0;
    std::optional<double> precision_correct;    // undefined when no predictions in class
    std::optional<double> precision_incorrect;
    double coverage = 0.0;  // fraction of judgments with confidence >= threshold
};

// Per-threshold precision of each verdict class over the judgments whose
// confidence clears the threshold, plus the retained fraction.
std::vector<SweepPoint> sweep_precision_by_threshold(const std::vector<LabeledJudgment>& judgments,
                                                     const std::vector<double>& thresholds);

// 0.00-0.80 in steps of 0.10, then 0.81-1.00 in steps of 0.01.
std::vector<double> paper_threshold_grid();

void to_json(nlohmann::json& j, const Judgment& jm);
void from_json(const nlohmann::json& j, Judgment& jm);
void to_json(nlohmann::json& j, const CalibrationProfile& p);
void from_json(const nlohmann::json& j, CalibrationProfile& p);

}  // namespace codejury::judge

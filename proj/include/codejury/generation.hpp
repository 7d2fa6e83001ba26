#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "codejury/backends.hpp"
#include "codejury/corpus.hpp"

namespace codejury::gen {

enum class CleanStatus {
    pending,  // not yet cleaned
    accepted,
    no_complete_function,
    non_ascii,
    empty_or_commented_body,
    duplicate,
};

std::string_view clean_status_name(CleanStatus s);
CleanStatus clean_status_from_name(std::string_view name);

struct CandidateImplementation {
    std::string candidate_id;  // unique per task
    std::string task_id;
    std::string source_model;
    std::string text;      // extracted function text (empty when extraction failed)
    std::string raw_text;  // full model output
    std::optional<double> mean_token_logprob;
    CleanStatus clean_status = CleanStatus::pending;
    int sample_index = 0;
    double gen_latency_s = 0.0;

    bool accepted() const { return clean_status == CleanStatus::accepted; }
    // Text to materialize when this candidate must run anyway (fallback
    // submissions): the extracted function when there is one.
    const std::string& runnable_text() const { return text.empty() ? raw_text : text; }
};

// Byte range of the extracted function within the raw completion text.
struct FunctionSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // one past the closing brace
};

// Locates the first complete function in a raw completion: from the
// signature (or the first plausible header) through its matching closing
// brace, brace-counting with string/char/comment awareness. Fenced code
// blocks are searched first; trailing chatter after the close is dropped.
std::optional<FunctionSpan> extract_function(std::string_view raw_text, std::string_view signature);

// Samples n completions from the backend and wraps them as candidates with
// sample_index 0..n-1 (ids additionally keyed by start_index so repeated
// pools for the same task stay unique). Candidates are returned pre-clean;
// empty completions are flagged no_complete_function immediately.
std::vector<CandidateImplementation> generate_candidates(const corpus::CodingTask& task, backends::Backend& backend,
                                                         int n, int start_index = 0);

// Finalizes clean_status in order: complete-function, ASCII, empty or
// fully commented body, exact-duplicate (first by sample_index wins).
// Idempotent and order-stable.
void clean_candidates(std::vector<CandidateImplementation>& candidates);

// Arithmetic mean of per-token logprobs over tokens overlapping the
// function span. Empty optional when the result carries no logprobs.
std::optional<double> mean_logprob(const backends::CompletionResult& result, FunctionSpan span);

// Body of a braced function with line and block comments removed;
// used for the empty-or-commented-body check.
std::string strip_comments(std::string_view code);

void to_json(nlohmann::json& j, const CandidateImplementation& c);
void from_json(const nlohmann::json& j, CandidateImplementation& c);

}  // namespace codejury::gen

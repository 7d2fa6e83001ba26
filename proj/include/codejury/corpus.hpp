#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace codejury::corpus {

// Placeholder expanded to the materialized candidate file inside the
// workdir. A task's test_command must contain it exactly once.
inline constexpr const char* kCandidatePlaceholder = "{candidate}";
// Optional placeholder expanded to the workdir path.
inline constexpr const char* kWorkdirPlaceholder = "{workdir}";

struct CodingTask {
    std::string task_id;
    std::string language_tag;
    std::string description;  // natural-language requirement
    std::string signature;    // function header
    std::string prompt;       // description followed by signature; generator input
    std::string test_command; // shell command template, {candidate} required
    std::optional<std::string> reference_solution;
    std::optional<std::string> return_type;  // drives dummy-return synthesis
    double timeout_s = 60.0;
};

struct SplitRatio {
    double train = 7.0;
    double validation = 1.0;
    double test = 2.0;
};

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
};

// Loads a corpus from a single .jsonl file or a directory of them.
// Tasks are returned sorted by task_id. Throws on duplicate ids, missing
// required fields, or a test_command violating the placeholder rule; the
// message names the task and field.
std::vector<CodingTask> load_corpus(const std::filesystem::path& path);

// Validates one already-parsed task record (shared by load_corpus and
// direct construction in tests).
void validate_task(const CodingTask& task);

// Deterministically partitions `retained_ids` into train/validation/test.
// Sizes are floor-allocated from the weights with the remainder assigned
// to train. When `stratified` is set, the split is applied per stratum,
// where a task's stratum is its task_id prefix up to the first '_' or '/'.
Split split_tasks(std::vector<std::string> retained_ids, const SplitRatio& ratio, std::uint64_t seed,
                  bool stratified = false);

void to_json(nlohmann::json& j, const CodingTask& task);
void from_json(const nlohmann::json& j, CodingTask& task);
void to_json(nlohmann::json& j, const Split& split);
void from_json(const nlohmann::json& j, Split& split);

}  // namespace codejury::corpus

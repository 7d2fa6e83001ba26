#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "codejury/audit.hpp"
#include "codejury/backends.hpp"
#include "codejury/corpus.hpp"
#include "codejury/execution.hpp"
#include "codejury/judging.hpp"
#include "codejury/metrics.hpp"

namespace codejury::pipeline {

struct StrategySpec {
    enum class Kind { judges, loglik, random, single };
    Kind kind = Kind::single;
    int k = 0;  // judge count for Kind::judges
    std::string name;
};

// "judge-1".."judge-3", "log-likelihood", "random", "single-candidate".
StrategySpec parse_strategy(const std::string& name);

struct SplitConfig {
    corpus::SplitRatio ratio;
    std::uint64_t seed = 0;
    bool stratified = false;
};

struct RunConfig {
    std::filesystem::path corpus_path;
    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> run_dir;  // overrides the timestamped directory
    std::uint64_t seed = 0;
    SplitConfig split;
    std::optional<backends::BackendConfig> generator;
    std::vector<backends::BackendConfig> judges;  // order is the fallback judge order
    int n_candidates = 10;
    int repetitions = 10;
    std::vector<std::string> strategies;
    exec::SandboxConfig sandbox;
    int flake_trials = 5;
    std::string eval_split = "all";  // all | train | validation | test

    // Artifacts from earlier commands, reused when set.
    std::optional<std::filesystem::path> audit_path;
    std::optional<std::filesystem::path> split_path;
    std::optional<std::filesystem::path> calibration_path;
    std::optional<std::filesystem::path> candidates_path;

    // When set, live backends are wrapped so every completion is recorded
    // to <dir>/<backend>.replay.jsonl for later offline replay.
    std::optional<std::filesystem::path> record_replays_to;
};

RunConfig load_run_config(const std::filesystem::path& config_path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

// Each command returns the directory its artifacts were written to
// (config.run_dir when set, otherwise a fresh timestamped directory under
// output_dir).

// Quality inspection: writes audit.jsonl, audit_notes.jsonl and split.json.
std::filesystem::path cmd_sanitize(const RunConfig& config);

// Generates and judges validation-split candidates, fits per-judge min/max
// profiles, ranks judges by validation agreement; writes calibration.json.
std::filesystem::path cmd_calibrate(const RunConfig& config);

// Samples n_candidates per retained task and writes candidates.jsonl.
std::filesystem::path cmd_generate(const RunConfig& config);

// Judges previously generated candidates; writes judgments.jsonl.
std::filesystem::path cmd_judge(const RunConfig& config);

// Full evaluation grid: for every (task, repetition) a shared candidate
// pool is generated, each strategy selects a submission, the selection is
// executed, and per-strategy statistics are reported. Writes
// candidates.jsonl, judgments.jsonl, outcomes.jsonl, records.jsonl,
// report.json, pass1.tsv and sweep.tsv.
std::filesystem::path cmd_evaluate(const RunConfig& config);

// Emits the fine-tune quadruples for all generated candidates.
std::filesystem::path cmd_export(const RunConfig& config);

// Recomputes report.json (and the tsv tables) from an existing run dir.
std::filesystem::path cmd_report(const RunConfig& config, const std::filesystem::path& run_dir);

}  // namespace codejury::pipeline

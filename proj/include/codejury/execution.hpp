#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "codejury/corpus.hpp"
#include "codejury/generation.hpp"

namespace codejury::exec {

enum class Verdict { pass, intent_error, execution_error, timeout };

std::string_view verdict_name(Verdict v);
Verdict verdict_from_name(std::string_view name);

inline constexpr const char* kPassFeedback = "this code is correct";

struct ExecutionOutcome {
    std::string candidate_id;
    std::string task_id;
    Verdict verdict = Verdict::execution_error;
    std::string ex_feed;
    bool ex_feed_flagged = false;  // generic feedback text, extraction failed
    std::string stdout_text;       // truncated at the configured cap
    std::string stderr_text;       // truncated at the configured cap
    double wall_time_s = 0.0;
    int exit_code = 0;

    bool passed() const { return verdict == Verdict::pass; }
};

enum class Isolation {
    required,  // namespace sandbox must be available; hard error otherwise
    none,      // plain subprocess: scrubbed env + timeout only (trusted corpora)
};

struct SandboxConfig {
    std::filesystem::path workdir_root = "cj-workdirs";
    int parallelism = 4;
    Isolation isolation = Isolation::required;
    std::size_t output_cap_bytes = 64 * 1024;
    bool keep_workdirs = false;
};

// Abstract execution facility. The corpus audit and the pipeline depend on
// this interface; tests substitute counting or scripted runners.
class Runner {
  public:
    virtual ~Runner() = default;

    // Materializes the candidate into a fresh workdir, runs the task's
    // test command in an isolated subprocess under the task timeout, and
    // classifies the outcome. Sandbox setup trouble throws InfraError.
    virtual ExecutionOutcome run_candidate(const corpus::CodingTask& task, std::string_view candidate_text,
                                           std::string_view candidate_id) = 0;

    // Runs the identical candidate `trials` times. The workdir is
    // materialized once and reused so state left behind by one trial is
    // visible to the next, which is one of the flake classes the corpus
    // audit screens for. Issues exactly `trials` sandbox runs.
    virtual std::vector<ExecutionOutcome> run_trials(const corpus::CodingTask& task, std::string_view candidate_text,
                                                     std::string_view candidate_id, int trials) = 0;
};

// Subprocess runner. When isolation is on, each run executes inside fresh
// mount+network namespaces: no interfaces, tmpfs over /tmp, /var/tmp and
// /dev/shm, the rest of the filesystem remounted read-only, and only the
// workdir left writable. The environment is scrubbed to an allowlist and
// the process group is killed at the deadline.
class SandboxRunner final : public Runner {
  public:
    explicit SandboxRunner(SandboxConfig config);
    ~SandboxRunner() override;

    ExecutionOutcome run_candidate(const corpus::CodingTask& task, std::string_view candidate_text,
                                   std::string_view candidate_id) override;
    std::vector<ExecutionOutcome> run_trials(const corpus::CodingTask& task, std::string_view candidate_text,
                                             std::string_view candidate_id, int trials) override;

    const SandboxConfig& config() const { return config_; }

    // True when the namespace sandbox works on this host (probed once).
    bool isolation_available();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    SandboxConfig config_;
};

// Verdict classification from raw run results. Assertion-style diagnostics
// map to intent_error; compile failures and other exceptions map to
// execution_error.
Verdict classify_output(int exit_code, bool timed_out, std::string_view stdout_text, std::string_view stderr_text,
                        std::string_view language_tag);

// Execution-feedback text: "this code is correct" for passes, the expected
// output for intent errors, error type plus line for execution errors.
// Sets *flagged when extraction fell back to generic text.
std::string format_ex_feed(Verdict verdict, std::string_view runner_output, bool* flagged);

// Candidate file name used inside the workdir, by language.
std::string candidate_filename(std::string_view language_tag);

struct ExportStats {
    struct Counts {
        long correct = 0;
        long incorrect = 0;
        long total() const { return correct + incorrect; }
    };
    Counts train, validation, test;
};

// Emits <nl_r, candidate, is_correct, ex_feed> records partitioned by the
// split: train.jsonl / validation.jsonl / test.jsonl under out_dir, plus
// balance.json with the class balance per split. Every accepted candidate
// must have an outcome keyed by candidate_id.
ExportStats export_finetune_corpus(const std::vector<corpus::CodingTask>& tasks,
                                   const std::vector<gen::CandidateImplementation>& candidates,
                                   const std::map<std::string, ExecutionOutcome>& outcomes,
                                   const corpus::Split& split, const std::filesystem::path& out_dir);

void to_json(nlohmann::json& j, const ExecutionOutcome& outcome);
void from_json(const nlohmann::json& j, ExecutionOutcome& outcome);

}  // namespace codejury::exec

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "codejury/backends.hpp"
#include "codejury/corpus.hpp"
#include "codejury/generation.hpp"

namespace cjtest {

// Self-deleting scratch directory under the build tree.
class TempDir {
  public:
    explicit TempDir(const std::string& label);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

// JavaScript fixture tasks runnable with node inside the sandbox. The
// test file is written next to the corpus and referenced by absolute path.
struct JsTaskSpec {
    std::string task_id;
    std::string description;
    std::string signature;      // e.g. "function square(x)"
    std::string test_body;      // JS appended after the candidate eval preamble
    std::string reference;      // empty -> no reference solution
    std::string return_type;    // empty -> none
    double timeout_s = 20.0;
};

// Writes <dir>/<task_id>_test.js and returns the corpus row.
codejury::corpus::CodingTask write_js_task(const std::filesystem::path& dir, const JsTaskSpec& spec);

// A well-behaved "square" task (tests square(2)==4 and square(-3)==9).
codejury::corpus::CodingTask square_task(const std::filesystem::path& dir, const std::string& task_id = "t_square",
                                         double timeout_s = 20.0);

// The 8-task sanitizer fixture: one reference-fails, one
// empty-body-passable, one dummy-return-passable, one period-2 flaky and
// four clean tasks. Returns the corpus file path.
std::filesystem::path write_sanitizer_corpus(const std::filesystem::path& dir);

// Candidate wrapper for judging/selection tests.
codejury::gen::CandidateImplementation make_candidate(const std::string& task_id, int sample_index,
                                                      const std::string& text, double mean_logprob);

// Generator replay entry: completion text carried as one token whose
// logprob equals the desired mean token logprob.
codejury::backends::CompletionResult completion_with_mean_logprob(const std::string& text, double mean_logprob,
                                                                  double latency_s);

// Judge replay entry: verdict digit with two-way alternatives such that
// the renormalized confidence equals p_raw.
codejury::backends::CompletionResult judge_completion(int verdict, double p_raw, double latency_s);

// The two-task end-to-end replay fixture (tasks, generator and judge
// replay files, calibration profile). Hand-enumerated expectations:
// judge-1 pass@1 = 1.0, log-likelihood = 0.25, single-candidate = 0.5.
struct E2EFixture {
    std::filesystem::path corpus;
    std::filesystem::path generator_replay;
    std::filesystem::path judge_replay;
    std::filesystem::path calibration;
    std::vector<codejury::corpus::CodingTask> tasks;
};
E2EFixture write_e2e_fixture(const std::filesystem::path& dir);

// Path of the codejury CLI binary (sibling of the test executable).
std::filesystem::path cli_binary_path();

// Runs a command via the shell, capturing combined output; returns exit code.
int run_command(const std::string& command, std::string* output = nullptr);

}  // namespace cjtest

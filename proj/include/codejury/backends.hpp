#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace codejury::backends {

struct RetryPolicy {
    int max_retries = 2;
    double backoff_s = 0.5;
};

struct BackendConfig {
    std::string name;
    std::string endpoint;  // http(s) URL for live backends, file path for replay
    std::string model_id;
    double temperature = 1.0;
    int max_tokens = 512;
    bool request_logprobs = false;
    int top_logprobs = 5;          // alternatives requested per position
    std::string api_key_env;       // env var holding the bearer token
    RetryPolicy retry;
    int max_concurrent = 4;        // per-backend in-flight request cap
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct CompletionResult {
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
    // top alternatives per token position, keyed by position
    std::optional<std::map<int, std::vector<TokenLogprob>>> alt_logprobs_at;
    double latency_s = 0.0;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Retries exhausted; carries the last status in the message.
struct BackendUnavailableError : BackendError {
    using BackendError::BackendError;
};
// request_logprobs was set but the endpoint returned none.
struct LogprobsUnsupportedError : BackendError {
    using BackendError::BackendError;
};
// Replay cache has no entry for this (prompt, index); replay never falls
// back to a live endpoint.
struct UnmatchedPromptError : BackendError {
    using BackendError::BackendError;
};

class Backend {
  public:
    virtual ~Backend() = default;

    // n independent samples for the prompt. start_index shifts the sample
    // numbering so repeated pools (one per repetition) address distinct
    // replay entries; live backends issue n single-sample requests.
    virtual std::vector<CompletionResult> complete(const std::string& prompt, int n, int start_index = 0) = 0;

    const BackendConfig& config() const { return config_; }
    const std::string& name() const { return config_.name; }

  protected:
    explicit Backend(BackendConfig config) : config_(std::move(config)) {}
    BackendConfig config_;
};

// Stable replay key for a prompt: all byte-identical prompts share it.
std::string prompt_key(std::string_view prompt);

// Scripted backend replaying recorded interactions from a line-delimited
// file of {prompt_hash, index, response} records. Pure: same inputs, same
// outputs, no network.
class ReplayBackend final : public Backend {
  public:
    ReplayBackend(BackendConfig config, const std::filesystem::path& path);

    std::vector<CompletionResult> complete(const std::string& prompt, int n, int start_index = 0) override;

    std::size_t entry_count() const { return entries_.size(); }

  private:
    std::map<std::pair<std::string, int>, CompletionResult> entries_;
};

// Appends interactions to a replay file in the format ReplayBackend loads.
class ReplayWriter {
  public:
    explicit ReplayWriter(std::filesystem::path path) : path_(std::move(path)) {}
    void add(std::string_view prompt, int index, const CompletionResult& result);

  private:
    std::filesystem::path path_;
};

// Live chat-completions backend over HTTP(S). One request per sample;
// retries per policy on transient failures (5xx, connect errors).
class HttpBackend final : public Backend {
  public:
    explicit HttpBackend(BackendConfig config);

    std::vector<CompletionResult> complete(const std::string& prompt, int n, int start_index = 0) override;

  private:
    struct Rate;
    std::shared_ptr<Rate> rate_;
    CompletionResult complete_one(const std::string& prompt);
};

// Wraps another backend and records every completion to a replay file.
class RecordingBackend final : public Backend {
  public:
    RecordingBackend(std::unique_ptr<Backend> inner, const std::filesystem::path& replay_path);

    std::vector<CompletionResult> complete(const std::string& prompt, int n, int start_index = 0) override;

  private:
    std::unique_ptr<Backend> inner_;
    ReplayWriter writer_;
};

// Dispatches on the endpoint: http:// or https:// builds a live backend,
// anything else is treated as a replay file path.
std::unique_ptr<Backend> make_backend(const BackendConfig& config);

void to_json(nlohmann::json& j, const CompletionResult& r);
void from_json(const nlohmann::json& j, CompletionResult& r);
void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

}  // namespace codejury::backends

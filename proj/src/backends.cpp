#include "codejury/backends.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "codejury/jsonl.hpp"
#include "codejury/util.hpp"

namespace codejury::backends {

std::string prompt_key(std::string_view prompt) {
    return fnv1a64_hex(prompt);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const CompletionResult& r) {
    j = nlohmann::json{{"text", r.text},
                       {"latency_s", r.latency_s},
                       {"prompt_tokens", r.prompt_tokens},
                       {"completion_tokens", r.completion_tokens}};
    if (r.token_logprobs) {
        auto arr = nlohmann::json::array();
        for (const auto& tl : *r.token_logprobs) arr.push_back({tl.token, tl.logprob});
        j["token_logprobs"] = std::move(arr);
    } else {
        j["token_logprobs"] = nullptr;
    }
    if (r.alt_logprobs_at) {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& [pos, alts] : *r.alt_logprobs_at) {
            auto arr = nlohmann::json::array();
            for (const auto& tl : alts) arr.push_back({tl.token, tl.logprob});
            obj[std::to_string(pos)] = std::move(arr);
        }
        j["alt_logprobs_at"] = std::move(obj);
    } else {
        j["alt_logprobs_at"] = nullptr;
    }
}

void from_json(const nlohmann::json& j, CompletionResult& r) {
    r = CompletionResult{};
    r.text = j.at("text").get<std::string>();
    r.latency_s = j.value("latency_s", 0.0);
    r.prompt_tokens = j.value("prompt_tokens", 0L);
    r.completion_tokens = j.value("completion_tokens", 0L);
    if (j.contains("token_logprobs") && !j.at("token_logprobs").is_null()) {
        std::vector<TokenLogprob> tls;
        for (const auto& pair : j.at("token_logprobs"))
            tls.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
        r.token_logprobs = std::move(tls);
    }
    if (j.contains("alt_logprobs_at") && !j.at("alt_logprobs_at").is_null()) {
        std::map<int, std::vector<TokenLogprob>> alts;
        for (const auto& [key, arr] : j.at("alt_logprobs_at").items()) {
            std::vector<TokenLogprob> tls;
            for (const auto& pair : arr) tls.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
            alts[std::stoi(key)] = std::move(tls);
        }
        r.alt_logprobs_at = std::move(alts);
    }
}

void to_json(nlohmann::json& j, const BackendConfig& c) {
    j = nlohmann::json{{"name", c.name},
                       {"endpoint", c.endpoint},
                       {"model_id", c.model_id},
                       {"temperature", c.temperature},
                       {"max_tokens", c.max_tokens},
                       {"request_logprobs", c.request_logprobs},
                       {"top_logprobs", c.top_logprobs},
                       {"api_key_env", c.api_key_env},
                       {"max_retries", c.retry.max_retries},
                       {"backoff_s", c.retry.backoff_s},
                       {"max_concurrent", c.max_concurrent}};
}

void from_json(const nlohmann::json& j, BackendConfig& c) {
    c = BackendConfig{};
    c.name = j.at("name").get<std::string>();
    c.endpoint = j.at("endpoint").get<std::string>();
    c.model_id = j.value("model_id", std::string());
    c.temperature = j.value("temperature", 1.0);
    c.max_tokens = j.value("max_tokens", 512);
    c.request_logprobs = j.value("request_logprobs", false);
    c.top_logprobs = j.value("top_logprobs", 5);
    c.api_key_env = j.value("api_key_env", std::string());
    c.retry.max_retries = j.value("max_retries", 2);
    c.retry.backoff_s = j.value("backoff_s", 0.5);
    c.max_concurrent = j.value("max_concurrent", 4);
    if (c.temperature < 0) throw UsageError("backend '" + c.name + "': temperature must be >= 0");
    if (c.max_tokens < 1) throw UsageError("backend '" + c.name + "': max_tokens must be >= 1");
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

ReplayBackend::ReplayBackend(BackendConfig config, const std::filesystem::path& path) : Backend(std::move(config)) {
    for (const auto& record : read_jsonl(path)) {
        std::string hash = record.at("prompt_hash").get<std::string>();
        int index = record.at("index").get<int>();
        CompletionResult result = record.at("response").get<CompletionResult>();
        entries_[{std::move(hash), index}] = std::move(result);
    }
}

std::vector<CompletionResult> ReplayBackend::complete(const std::string& prompt, int n, int start_index) {
    if (n < 1) throw UsageError("complete: n must be >= 1");
    std::vector<CompletionResult> results;
    results.reserve(static_cast<std::size_t>(n));
    std::string key = prompt_key(prompt);
    for (int i = 0; i < n; ++i) {
        auto it = entries_.find({key, start_index + i});
        if (it == entries_.end())
            throw UnmatchedPromptError("replay backend '" + config_.name + "': no entry for prompt hash " + key +
                                       " at index " + std::to_string(start_index + i));
        CompletionResult result = it->second;
        if (config_.request_logprobs && !result.token_logprobs)
            throw LogprobsUnsupportedError("replay backend '" + config_.name +
                                           "': logprobs requested but entry carries none (prompt hash " + key + ")");
        results.push_back(std::move(result));
    }
    return results;
}

void ReplayWriter::add(std::string_view prompt, int index, const CompletionResult& result) {
    nlohmann::json record{{"prompt_hash", prompt_key(prompt)}, {"index", index}, {"response", result}};
    append_jsonl(path_, record);
}

// ---------------------------------------------------------------------------
// HTTP chat-completions backend
// ---------------------------------------------------------------------------

struct HttpBackend::Rate {
    explicit Rate(int slots) : sem(std::clamp(slots, 1, 256)) {}
    std::counting_semaphore<256> sem;
};

namespace {

struct ParsedEndpoint {
    std::string host_port;  // scheme://host:port
    std::string path;       // request path
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw UsageError("endpoint is not a URL: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    ParsedEndpoint out;
    if (path_start == std::string::npos) {
        out.host_port = endpoint;
        out.path = "/v1/chat/completions";
    } else {
        out.host_port = endpoint.substr(0, path_start);
        out.path = endpoint.substr(path_start);
        if (out.path == "/") out.path = "/v1/chat/completions";
    }
    return out;
}

CompletionResult parse_chat_response(const nlohmann::json& body, bool want_logprobs, const std::string& backend_name) {
    if (!body.contains("choices") || body.at("choices").empty())
        throw BackendError("backend '" + backend_name + "': response has no choices");
    const auto& choice = body.at("choices").at(0);

    CompletionResult result;
    result.text = choice.at("message").at("content").get<std::string>();
    if (body.contains("usage")) {
        result.prompt_tokens = body.at("usage").value("prompt_tokens", 0L);
        result.completion_tokens = body.at("usage").value("completion_tokens", 0L);
    }

    if (choice.contains("logprobs") && !choice.at("logprobs").is_null() &&
        choice.at("logprobs").contains("content") && !choice.at("logprobs").at("content").is_null()) {
        std::vector<TokenLogprob> tls;
        std::map<int, std::vector<TokenLogprob>> alts;
        int pos = 0;
        for (const auto& entry : choice.at("logprobs").at("content")) {
            tls.push_back({entry.at("token").get<std::string>(), entry.at("logprob").get<double>()});
            if (entry.contains("top_logprobs") && !entry.at("top_logprobs").is_null()) {
                std::vector<TokenLogprob> here;
                for (const auto& alt : entry.at("top_logprobs"))
                    here.push_back({alt.at("token").get<std::string>(), alt.at("logprob").get<double>()});
                if (!here.empty()) alts[pos] = std::move(here);
            }
            ++pos;
        }
        result.token_logprobs = std::move(tls);
        if (!alts.empty()) result.alt_logprobs_at = std::move(alts);
    }

    if (want_logprobs && !result.token_logprobs)
        throw LogprobsUnsupportedError("backend '" + backend_name + "': logprobs requested but response carries none");
    return result;
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : Backend(std::move(config)) {
    rate_ = std::make_shared<Rate>(config_.max_concurrent);
    parse_endpoint(config_.endpoint);  // validate early
}

CompletionResult HttpBackend::complete_one(const std::string& prompt) {
    ParsedEndpoint ep = parse_endpoint(config_.endpoint);

    nlohmann::json request{{"model", config_.model_id},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                           {"temperature", config_.temperature},
                           {"max_tokens", config_.max_tokens},
                           {"n", 1}};
    if (config_.request_logprobs) {
        request["logprobs"] = true;
        request["top_logprobs"] = config_.top_logprobs;
    }

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key) throw UsageError("backend '" + config_.name + "': env var " + config_.api_key_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_status = "no attempt made";
    for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
        if (attempt > 0) {
            auto backoff = std::chrono::duration<double>(config_.retry.backoff_s * attempt);
            std::this_thread::sleep_for(std::chrono::duration_cast<std::chrono::milliseconds>(backoff));
        }
        rate_->sem.acquire();
        auto start = std::chrono::steady_clock::now();
        httplib::Client client(ep.host_port);
        client.set_connection_timeout(30);
        client.set_read_timeout(600);
        auto response = client.Post(ep.path, headers, request.dump(), "application/json");
        double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rate_->sem.release();

        if (!response) {
            last_status = "connection error: " + httplib::to_string(response.error());
            continue;  // transient
        }
        if (response->status >= 500 || response->status == 429) {
            last_status = "HTTP " + std::to_string(response->status);
            continue;  // transient
        }
        if (response->status != 200)
            throw BackendError("backend '" + config_.name + "': HTTP " + std::to_string(response->status) + ": " +
                               response->body.substr(0, 512));
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(response->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw BackendError("backend '" + config_.name + "': invalid JSON response: " + std::string(e.what()));
        }
        CompletionResult result = parse_chat_response(body, config_.request_logprobs, config_.name);
        result.latency_s = latency;
        return result;
    }
    throw BackendUnavailableError("backend '" + config_.name + "': retries exhausted, last status: " + last_status);
}

std::vector<CompletionResult> HttpBackend::complete(const std::string& prompt, int n, int /*start_index*/) {
    if (n < 1) throw UsageError("complete: n must be >= 1");
    std::vector<CompletionResult> results;
    results.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) results.push_back(complete_one(prompt));
    return results;
}

// ---------------------------------------------------------------------------
// Recording
// ---------------------------------------------------------------------------

RecordingBackend::RecordingBackend(std::unique_ptr<Backend> inner, const std::filesystem::path& replay_path)
    : Backend(inner->config()), inner_(std::move(inner)), writer_(replay_path) {}

std::vector<CompletionResult> RecordingBackend::complete(const std::string& prompt, int n, int start_index) {
    auto results = inner_->complete(prompt, n, start_index);
    for (int i = 0; i < n; ++i) writer_.add(prompt, start_index + i, results[static_cast<std::size_t>(i)]);
    return results;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    if (starts_with(config.endpoint, "http://") || starts_with(config.endpoint, "https://"))
        return std::make_unique<HttpBackend>(config);
    return std::make_unique<ReplayBackend>(config, config.endpoint);
}

}  // namespace codejury::backends

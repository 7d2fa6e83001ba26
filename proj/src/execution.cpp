#include "codejury/execution.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <iostream>
#include <mutex>
#include <regex>
#include <semaphore>

#include "codejury/jsonl.hpp"
#include "codejury/util.hpp"

namespace codejury::exec {

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::intent_error: return "intent_error";
        case Verdict::execution_error: return "execution_error";
        case Verdict::timeout: return "timeout";
    }
    return "execution_error";
}

Verdict verdict_from_name(std::string_view name) {
    if (name == "pass") return Verdict::pass;
    if (name == "intent_error") return Verdict::intent_error;
    if (name == "execution_error") return Verdict::execution_error;
    if (name == "timeout") return Verdict::timeout;
    throw std::runtime_error("unknown verdict name: " + std::string(name));
}

std::string candidate_filename(std::string_view language_tag) {
    std::string tag(language_tag);
    for (auto& c : tag) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (tag == "java") return "candidate.java";
    if (tag == "javascript" || tag == "js" || tag == "node") return "candidate.js";
    if (tag == "typescript" || tag == "ts") return "candidate.ts";
    if (tag == "python" || tag == "py") return "candidate.py";
    if (tag == "c") return "candidate.c";
    if (tag == "cpp" || tag == "c++") return "candidate.cc";
    if (tag == "csharp" || tag == "c#") return "candidate.cs";
    return "candidate.txt";
}

// ---------------------------------------------------------------------------
// Verdict classification
// ---------------------------------------------------------------------------

namespace {

// Assertion-failure markers. Specific enough not to collide with compiler
// diagnostics ("SyntaxError: expected ':'" must stay an execution error).
const char* const kIntentMarkers[] = {
    "AssertionError",        // Python, Java, node
    "ERR_ASSERTION",         // node assert module
    "AssertionFailedError",  // JUnit 5 / opentest4j
    "ComparisonFailure",     // JUnit 4
    "expected:<",            // JUnit message body
    "Assertion `",           // glibc assert()
    "assertion failed",
    "Assertion failed",
};

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

}  // namespace

Verdict classify_output(int exit_code, bool timed_out, std::string_view stdout_text, std::string_view stderr_text,
                        std::string_view /*language_tag*/) {
    if (timed_out) return Verdict::timeout;
    if (exit_code == 0) return Verdict::pass;
    for (const char* marker : kIntentMarkers) {
        if (contains(stderr_text, marker) || contains(stdout_text, marker)) return Verdict::intent_error;
    }
    return Verdict::execution_error;
}

// ---------------------------------------------------------------------------
// Execution feedback
// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> extract_expected_value(const std::string& output) {
    static const std::regex junit_style(R"(expected:\s*<([^>]*)>)", std::regex::icase);
    static const std::regex dump_style(R"(^\s*expected:\s*'?(.+?)'?,?\s*$)",
                                       std::regex::icase | std::regex::multiline);
    static const std::regex strict_neq(R"((\S+)\s+!==\s+(\S+))");
    static const std::regex phrase_style(R"(expected\s+(?:output\s+)?(\S+)\s+(?:but\b|got\b|was\b))",
                                         std::regex::icase);
    std::smatch m;
    if (std::regex_search(output, m, junit_style)) return m[1].str();
    if (std::regex_search(output, m, dump_style)) return m[1].str();
    if (std::regex_search(output, m, strict_neq)) return m[2].str();
    if (std::regex_search(output, m, phrase_style)) return m[1].str();
    return std::nullopt;
}

std::optional<std::string> extract_error_type(const std::string& output) {
    static const std::regex exception_name(R"(([A-Za-z_][A-Za-z0-9_.$]*(?:Error|Exception)))");
    static const std::regex diagnostic_style(R"((?:fatal )?error:\s*([^\n]+))");
    std::smatch m;
    if (std::regex_search(output, m, exception_name)) return m[1].str();
    if (std::regex_search(output, m, diagnostic_style)) return std::string(trim(m[1].str()));
    return std::nullopt;
}

std::optional<std::string> extract_line_number(const std::string& output) {
    static const std::regex word_line(R"([Ll]ine\s+(\d+))");
    static const std::regex source_colon(R"(\.(?:java|js|py|c|cc|cpp|cs|ts):(\d+))");
    static const std::regex line_col(R"(:(\d+):\d+)");
    static const std::regex bare_eol(R"(^[^\s:][^\n:]*:(\d+)\s*$)", std::regex::multiline);
    std::smatch m;
    if (std::regex_search(output, m, word_line)) return m[1].str();
    if (std::regex_search(output, m, source_colon)) return m[1].str();
    if (std::regex_search(output, m, line_col)) return m[1].str();
    if (std::regex_search(output, m, bare_eol)) return m[1].str();
    return std::nullopt;
}

}  // namespace

std::string format_ex_feed(Verdict verdict, std::string_view runner_output, bool* flagged) {
    bool generic = false;
    std::string feed;
    std::string output(runner_output);
    switch (verdict) {
        case Verdict::pass:
            feed = kPassFeedback;
            break;
        case Verdict::timeout:
            feed = "execution timed out before tests completed";
            break;
        case Verdict::intent_error: {
            auto expected = extract_expected_value(output);
            if (expected) {
                feed = "intent error: the expected output was: " + *expected;
            } else {
                feed = "intent error: test assertion failed (expected output unavailable)";
                generic = true;
            }
            break;
        }
        case Verdict::execution_error: {
            auto type = extract_error_type(output);
            auto line = extract_line_number(output);
            if (type && line) {
                feed = "execution error: " + *type + " at line " + *line;
            } else if (type) {
                feed = "execution error: " + *type;
            } else {
                feed = "execution error: diagnostic unavailable";
                generic = true;
            }
            break;
        }
    }
    if (flagged) *flagged = generic;
    return feed;
}

// ---------------------------------------------------------------------------
// Subprocess sandbox
// ---------------------------------------------------------------------------

namespace {

constexpr int kSandboxSetupExit = 97;
constexpr const char* kSandboxSetupMarker = "codejury-sandbox-setup-failed";

// Runs inside the fresh mount+net namespaces. Order matters: the workdir
// bind must exist before the root remount so it stays writable, and the
// workdir must not live under /tmp or the tmpfs would shadow it.
constexpr const char* kIsolationScript = R"(mount --make-rprivate / 2>/dev/null
mount --bind "$CJ_WORKDIR" "$CJ_WORKDIR" || { echo codejury-sandbox-setup-failed >&2; exit 97; }
mount -t tmpfs tmpfs /tmp || { echo codejury-sandbox-setup-failed >&2; exit 97; }
mount -t tmpfs tmpfs /var/tmp 2>/dev/null
mount -t tmpfs tmpfs /dev/shm 2>/dev/null
mount -o remount,ro,bind / || { echo codejury-sandbox-setup-failed >&2; exit 97; }
cd "$CJ_WORKDIR" || { echo codejury-sandbox-setup-failed >&2; exit 97; }
exec /bin/sh -c "$CJ_CMD"
)";

struct RawRunResult {
    int exit_code = 0;
    bool timed_out = false;
    std::string stdout_text;
    std::string stderr_text;
    double wall_time_s = 0.0;
};

std::vector<std::string> build_env(const std::filesystem::path& workdir) {
    std::vector<std::string> env;
    const char* path = std::getenv("PATH");
    env.push_back(std::string("PATH=") + (path ? path : "/usr/local/sbin:/usr/local/bin:/usr/sbin:/usr/bin:/sbin:/bin"));
    for (const char* keep : {"LANG", "LC_ALL", "TZ"}) {
        if (const char* v = std::getenv(keep)) env.push_back(std::string(keep) + "=" + v);
    }
    env.push_back("HOME=" + workdir.string());
    env.push_back("TMPDIR=/tmp");
    return env;
}

void append_capped(std::string& sink, const char* data, ssize_t n, std::size_t cap) {
    if (sink.size() >= cap || n <= 0) return;
    std::size_t room = cap - sink.size();
    sink.append(data, std::min(static_cast<std::size_t>(n), room));
}

RawRunResult run_subprocess(const std::string& command, const std::filesystem::path& workdir, double timeout_s,
                            std::size_t output_cap, bool isolated) {
    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) throw InfraError("pipe() failed");

    std::vector<std::string> env_strings = build_env(workdir);
    env_strings.push_back("CJ_WORKDIR=" + workdir.string());
    env_strings.push_back("CJ_CMD=" + command);
    std::vector<char*> envp;
    envp.reserve(env_strings.size() + 1);
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);

    std::vector<std::string> arg_strings;
    if (isolated) {
        arg_strings = {"unshare", "-n", "-m", "/bin/sh", "-c", kIsolationScript};
    } else {
        arg_strings = {"/bin/sh", "-c", "cd \"$CJ_WORKDIR\" && exec /bin/sh -c \"$CJ_CMD\""};
    }
    std::vector<char*> argv;
    argv.reserve(arg_strings.size() + 1);
    for (auto& s : arg_strings) argv.push_back(s.data());
    argv.push_back(nullptr);

    auto start = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) throw InfraError("fork() failed");
    if (pid == 0) {
        setpgid(0, 0);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        execvpe(argv[0], argv.data(), envp.data());
        const char* msg = "codejury-sandbox-setup-failed: exec\n";
        ssize_t ignored = write(STDERR_FILENO, msg, std::strlen(msg));
        (void)ignored;
        _exit(kSandboxSetupExit);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);

    RawRunResult result;
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(timeout_s));
    bool killed = false;
    struct Stream {
        int fd;
        std::string* sink;
        bool open = true;
    } streams[2] = {{out_pipe[0], &result.stdout_text}, {err_pipe[0], &result.stderr_text}};

    char buf[8192];
    while (streams[0].open || streams[1].open) {
        pollfd fds[2];
        nfds_t nfds = 0;
        for (auto& s : streams) {
            if (s.open) fds[nfds++] = {s.fd, POLLIN, 0};
        }
        auto now = std::chrono::steady_clock::now();
        int wait_ms = 50;
        if (!killed && now >= deadline) {
            kill(-pid, SIGKILL);
            killed = true;
            result.timed_out = true;
        }
        (void)poll(fds, nfds, wait_ms);
        nfds_t idx = 0;
        for (auto& s : streams) {
            if (!s.open) continue;
            const pollfd& p = fds[idx++];
            if (p.revents & (POLLIN | POLLHUP)) {
                ssize_t n = read(s.fd, buf, sizeof(buf));
                if (n > 0) {
                    append_capped(*s.sink, buf, n, output_cap);
                } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
                    close(s.fd);
                    s.open = false;
                }
            } else if (p.revents & (POLLERR | POLLNVAL)) {
                close(s.fd);
                s.open = false;
            }
        }
    }

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    // Reap any stragglers in the group.
    if (killed) kill(-pid, SIGKILL);

    result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    } else {
        result.exit_code = -1;
    }
    return result;
}

std::string sanitize_for_path(std::string_view id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

}  // namespace

struct SandboxRunner::Impl {
    explicit Impl(int parallelism) : slots(std::clamp(parallelism, 1, 256)) {}
    std::counting_semaphore<256> slots;
    std::atomic<std::uint64_t> workdir_counter{0};
    std::once_flag probe_flag;
    bool isolation_ok = false;
};

SandboxRunner::SandboxRunner(SandboxConfig config) : config_(std::move(config)) {
    impl_ = std::make_unique<Impl>(config_.parallelism);
    std::filesystem::create_directories(config_.workdir_root);
    // Workdirs must not live under the paths the sandbox shadows with tmpfs.
    auto canonical = std::filesystem::weakly_canonical(config_.workdir_root).string();
    for (const char* shadowed : {"/tmp", "/var/tmp", "/dev/shm"}) {
        if (canonical == shadowed || starts_with(canonical, std::string(shadowed) + "/"))
            throw UsageError("workdir_root must not live under " + std::string(shadowed) +
                             " (shadowed inside the sandbox): " + canonical);
    }
}

SandboxRunner::~SandboxRunner() = default;

bool SandboxRunner::isolation_available() {
    std::call_once(impl_->probe_flag, [this] {
        auto probe_dir = config_.workdir_root / ".probe";
        std::filesystem::create_directories(probe_dir);
        try {
            RawRunResult r = run_subprocess("true", std::filesystem::absolute(probe_dir), 20.0, 4096, true);
            impl_->isolation_ok = !r.timed_out && r.exit_code == 0;
        } catch (...) {
            impl_->isolation_ok = false;
        }
        std::error_code ec;
        std::filesystem::remove_all(probe_dir, ec);
    });
    return impl_->isolation_ok;
}

namespace {

struct WorkdirGuard {
    std::filesystem::path path;
    bool keep = false;
    ~WorkdirGuard() {
        if (!keep && !path.empty()) {
            std::error_code ec;
            std::filesystem::remove_all(path, ec);
        }
    }
};

}  // namespace

ExecutionOutcome SandboxRunner::run_candidate(const corpus::CodingTask& task, std::string_view candidate_text,
                                              std::string_view candidate_id) {
    auto outcomes = run_trials(task, candidate_text, candidate_id, 1);
    return std::move(outcomes.front());
}

std::vector<ExecutionOutcome> SandboxRunner::run_trials(const corpus::CodingTask& task,
                                                        std::string_view candidate_text,
                                                        std::string_view candidate_id, int trials) {
    if (trials < 1) throw UsageError("run_trials: trials must be >= 1");
    const bool isolated = config_.isolation == Isolation::required;
    if (isolated && !isolation_available())
        throw InfraError("namespace sandbox unavailable on this host (unshare -n -m failed); "
                         "set sandbox.isolation=none only for trusted corpora");

    const std::uint64_t serial = impl_->workdir_counter.fetch_add(1);
    auto workdir = std::filesystem::absolute(config_.workdir_root /
                                             (sanitize_for_path(candidate_id) + "-" + std::to_string(serial)));
    std::error_code ec;
    std::filesystem::remove_all(workdir, ec);
    std::filesystem::create_directories(workdir / "tmp");
    WorkdirGuard guard{workdir, config_.keep_workdirs};

    auto candidate_path = workdir / candidate_filename(task.language_tag);
    write_text_file(candidate_path, candidate_text);

    std::string command = replace_all(task.test_command, corpus::kCandidatePlaceholder, candidate_path.string());
    command = replace_all(command, corpus::kWorkdirPlaceholder, workdir.string());

    std::vector<ExecutionOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        impl_->slots.acquire();
        RawRunResult raw;
        try {
            raw = run_subprocess(command, workdir, task.timeout_s, config_.output_cap_bytes, isolated);
        } catch (...) {
            impl_->slots.release();
            throw;
        }
        impl_->slots.release();

        if (raw.exit_code == kSandboxSetupExit && raw.stderr_text.find(kSandboxSetupMarker) != std::string::npos)
            throw InfraError("sandbox setup failed for task '" + task.task_id + "': " + raw.stderr_text);

        ExecutionOutcome outcome;
        outcome.candidate_id = std::string(candidate_id);
        outcome.task_id = task.task_id;
        outcome.verdict =
            classify_output(raw.exit_code, raw.timed_out, raw.stdout_text, raw.stderr_text, task.language_tag);
        outcome.stdout_text = raw.stdout_text;
        outcome.stderr_text = raw.stderr_text;
        outcome.wall_time_s = raw.wall_time_s;
        outcome.exit_code = raw.exit_code;
        outcome.ex_feed =
            format_ex_feed(outcome.verdict, raw.stderr_text + "\n" + raw.stdout_text, &outcome.ex_feed_flagged);
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

// ---------------------------------------------------------------------------
// Fine-tune corpus export
// ---------------------------------------------------------------------------

ExportStats export_finetune_corpus(const std::vector<corpus::CodingTask>& tasks,
                                   const std::vector<gen::CandidateImplementation>& candidates,
                                   const std::map<std::string, ExecutionOutcome>& outcomes,
                                   const corpus::Split& split, const std::filesystem::path& out_dir) {
    std::map<std::string, const corpus::CodingTask*> task_by_id;
    for (const auto& t : tasks) task_by_id[t.task_id] = &t;

    enum class Part { train, validation, test };
    std::map<std::string, Part> part_of;
    for (const auto& id : split.train) part_of[id] = Part::train;
    for (const auto& id : split.validation) part_of[id] = Part::validation;
    for (const auto& id : split.test) part_of[id] = Part::test;

    std::vector<nlohmann::json> files[3];
    ExportStats stats;
    ExportStats::Counts* counts[3] = {&stats.train, &stats.validation, &stats.test};

    for (const auto& cand : candidates) {
        if (!cand.accepted()) continue;
        auto outcome_it = outcomes.find(cand.candidate_id);
        if (outcome_it == outcomes.end())
            throw std::runtime_error("export: accepted candidate '" + cand.candidate_id + "' has no execution outcome");
        auto task_it = task_by_id.find(cand.task_id);
        if (task_it == task_by_id.end())
            throw std::runtime_error("export: candidate '" + cand.candidate_id + "' references unknown task '" +
                                     cand.task_id + "'");
        auto part_it = part_of.find(cand.task_id);
        if (part_it == part_of.end())
            throw std::runtime_error("export: task '" + cand.task_id + "' is not assigned to any split");

        const ExecutionOutcome& outcome = outcome_it->second;
        bool is_correct = outcome.passed();
        nlohmann::json quad{{"task_id", cand.task_id},
                            {"nl_r", task_it->second->prompt},
                            {"candidate", cand.text},
                            {"is_correct", is_correct},
                            {"ex_feed", outcome.ex_feed}};
        auto idx = static_cast<std::size_t>(part_it->second);
        files[idx].push_back(std::move(quad));
        if (is_correct)
            ++counts[idx]->correct;
        else
            ++counts[idx]->incorrect;
    }

    std::filesystem::create_directories(out_dir);
    const char* names[3] = {"train.jsonl", "validation.jsonl", "test.jsonl"};
    for (int i = 0; i < 3; ++i) {
        write_jsonl(out_dir / names[i], files[i]);
        if (files[i].empty()) std::cerr << "warning: exported split file " << names[i] << " is empty\n";
    }

    auto balance = [](const ExportStats::Counts& c) {
        nlohmann::json j{{"correct", c.correct}, {"incorrect", c.incorrect}, {"total", c.total()}};
        if (c.total() > 0) {
            j["correct_fraction"] = static_cast<double>(c.correct) / static_cast<double>(c.total());
            j["incorrect_fraction"] = static_cast<double>(c.incorrect) / static_cast<double>(c.total());
        }
        return j;
    };
    nlohmann::json report{
        {"train", balance(stats.train)}, {"validation", balance(stats.validation)}, {"test", balance(stats.test)}};
    write_text_file(out_dir / "balance.json", report.dump(2) + "\n");
    return stats;
}

void to_json(nlohmann::json& j, const ExecutionOutcome& outcome) {
    j = nlohmann::json{{"candidate_id", outcome.candidate_id},
                       {"task_id", outcome.task_id},
                       {"verdict", std::string(verdict_name(outcome.verdict))},
                       {"ex_feed", outcome.ex_feed},
                       {"ex_feed_flagged", outcome.ex_feed_flagged},
                       {"stdout", outcome.stdout_text},
                       {"stderr", outcome.stderr_text},
                       {"wall_time_s", outcome.wall_time_s},
                       {"exit_code", outcome.exit_code}};
}

void from_json(const nlohmann::json& j, ExecutionOutcome& outcome) {
    outcome.candidate_id = j.at("candidate_id").get<std::string>();
    outcome.task_id = j.at("task_id").get<std::string>();
    outcome.verdict = verdict_from_name(j.at("verdict").get<std::string>());
    outcome.ex_feed = j.at("ex_feed").get<std::string>();
    outcome.ex_feed_flagged = j.value("ex_feed_flagged", false);
    outcome.stdout_text = j.value("stdout", std::string());
    outcome.stderr_text = j.value("stderr", std::string());
    outcome.wall_time_s = j.value("wall_time_s", 0.0);
    outcome.exit_code = j.value("exit_code", 0);
}

}  // namespace codejury::exec

#include "codejury/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "codejury/jsonl.hpp"
#include "codejury/util.hpp"

namespace codejury::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

StrategySpec parse_strategy(const std::string& name) {
    StrategySpec spec;
    spec.name = name;
    if (name == "log-likelihood") {
        spec.kind = StrategySpec::Kind::loglik;
    } else if (name == "random") {
        spec.kind = StrategySpec::Kind::random;
    } else if (name == "single-candidate") {
        spec.kind = StrategySpec::Kind::single;
    } else if (starts_with(name, "judge-")) {
        spec.kind = StrategySpec::Kind::judges;
        try {
            spec.k = std::stoi(name.substr(6));
        } catch (...) {
            throw UsageError("unknown strategy '" + name + "'");
        }
        if (spec.k < 1 || spec.k > 3) throw UsageError("strategy '" + name + "': judge count must be 1..3");
    } else {
        throw UsageError("unknown strategy '" + name + "' (expected judge-K, log-likelihood, random, single-candidate)");
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
    return p.is_absolute() ? p : base / p;
}

exec::SandboxConfig sandbox_from_json(const json& j, const fs::path& base) {
    exec::SandboxConfig sandbox;
    if (j.contains("workdir_root")) sandbox.workdir_root = resolve(base, j.at("workdir_root").get<std::string>());
    sandbox.parallelism = j.value("parallelism", 4);
    sandbox.keep_workdirs = j.value("keep_workdirs", false);
    if (j.contains("output_cap_bytes")) sandbox.output_cap_bytes = j.at("output_cap_bytes").get<std::size_t>();
    std::string isolation = j.value("isolation", "required");
    if (isolation == "required")
        sandbox.isolation = exec::Isolation::required;
    else if (isolation == "none")
        sandbox.isolation = exec::Isolation::none;
    else
        throw UsageError("sandbox.isolation must be 'required' or 'none', got '" + isolation + "'");
    return sandbox;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    RunConfig config;
    if (j.contains("corpus")) config.corpus_path = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("output_dir")) config.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    if (j.contains("run_dir")) config.run_dir = resolve(base_dir, j.at("run_dir").get<std::string>());
    config.seed = j.value("seed", 0ULL);

    if (j.contains("split")) {
        const auto& s = j.at("split");
        if (s.contains("ratio")) {
            auto ratio = s.at("ratio");
            if (!ratio.is_array() || ratio.size() != 3) throw UsageError("split.ratio must be [train, validation, test]");
            config.split.ratio.train = ratio.at(0).get<double>();
            config.split.ratio.validation = ratio.at(1).get<double>();
            config.split.ratio.test = ratio.at(2).get<double>();
        }
        config.split.seed = s.value("seed", 0ULL);
        config.split.stratified = s.value("stratified", false);
    }

    if (j.contains("generator")) {
        config.generator = j.at("generator").get<backends::BackendConfig>();
        if (!j.at("generator").contains("endpoint") || config.generator->endpoint.empty())
            throw UsageError("generator backend needs an endpoint");
    }
    if (j.contains("judges")) {
        for (const auto& jj : j.at("judges")) {
            auto judge_config = jj.get<backends::BackendConfig>();
            // Verdicts are one token; judges default to a tiny budget and
            // to requesting logprobs, the confidence source.
            if (!jj.contains("max_tokens")) judge_config.max_tokens = 4;
            if (!jj.contains("request_logprobs")) judge_config.request_logprobs = true;
            config.judges.push_back(std::move(judge_config));
        }
    }

    config.n_candidates = j.value("n_candidates", 10);
    config.repetitions = j.value("repetitions", 10);
    if (j.contains("strategies")) config.strategies = j.at("strategies").get<std::vector<std::string>>();
    if (j.contains("sandbox")) config.sandbox = sandbox_from_json(j.at("sandbox"), base_dir);
    config.flake_trials = j.value("flake_trials", 5);
    config.eval_split = j.value("eval_split", std::string("all"));

    auto opt_path = [&](const char* key) -> std::optional<fs::path> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return resolve(base_dir, j.at(key).get<std::string>());
    };
    config.audit_path = opt_path("audit");
    config.split_path = opt_path("split_file");
    config.calibration_path = opt_path("calibration");
    config.candidates_path = opt_path("candidates");
    config.record_replays_to = opt_path("record_replays_to");

    if (config.n_candidates < 1) throw UsageError("n_candidates must be >= 1");
    if (config.repetitions < 1) throw UsageError("repetitions must be >= 1");
    if (config.flake_trials < 2) throw UsageError("flake_trials must be >= 2");
    for (const auto& s : config.strategies) parse_strategy(s);
    return config;
}

RunConfig load_run_config(const fs::path& config_path) {
    if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path.string());
    json j;
    try {
        j = json::parse(read_text_file(config_path));
    } catch (const json::parse_error& e) {
        throw UsageError("config file " + config_path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j, fs::absolute(config_path).parent_path());
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

namespace {

fs::path make_run_dir(const RunConfig& config, const std::string& command) {
    if (config.run_dir) {
        fs::create_directories(*config.run_dir);
        return *config.run_dir;
    }
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_utc);

    fs::path dir = config.output_dir / (std::string(stamp) + "-" + command);
    int suffix = 1;
    while (fs::exists(dir)) dir = config.output_dir / (std::string(stamp) + "-" + command + "-" + std::to_string(suffix++));
    fs::create_directories(dir);
    return dir;
}

void write_run_info(const fs::path& run_dir, const RunConfig& config, const std::string& command) {
    json info{{"command", command},
              {"corpus", config.corpus_path.string()},
              {"seed", config.seed},
              {"n_candidates", config.n_candidates},
              {"repetitions", config.repetitions},
              {"strategies", config.strategies},
              {"eval_split", config.eval_split}};
    info["generator"] = config.generator ? json(config.generator->name) : json();
    auto judge_names = json::array();
    for (const auto& judge_config : config.judges) judge_names.push_back(judge_config.name);
    info["judges"] = std::move(judge_names);
    write_text_file(run_dir / "run_info.json", info.dump(2) + "\n");
}

std::unique_ptr<backends::Backend> build_backend(const backends::BackendConfig& config,
                                                 const std::optional<fs::path>& record_dir) {
    auto backend = backends::make_backend(config);
    if (record_dir && (starts_with(config.endpoint, "http://") || starts_with(config.endpoint, "https://"))) {
        fs::create_directories(*record_dir);
        backend = std::make_unique<backends::RecordingBackend>(std::move(backend),
                                                               *record_dir / (config.name + ".replay.jsonl"));
    }
    return backend;
}

audit::CorpusAudit obtain_audit(const RunConfig& config, const std::vector<corpus::CodingTask>& tasks,
                                exec::Runner& runner) {
    if (config.audit_path) return audit::audit_from_report_rows(read_jsonl(*config.audit_path));
    return audit::audit_corpus(tasks, runner, config.flake_trials, config.sandbox.parallelism);
}

corpus::Split obtain_split(const RunConfig& config, const std::vector<std::string>& retained) {
    if (config.split_path) {
        corpus::Split split = json::parse(read_text_file(*config.split_path)).get<corpus::Split>();
        return split;
    }
    return corpus::split_tasks(retained, config.split.ratio, config.split.seed, config.split.stratified);
}

std::vector<corpus::CodingTask> retained_tasks(const std::vector<corpus::CodingTask>& tasks,
                                               const audit::CorpusAudit& audit_result) {
    std::vector<corpus::CodingTask> kept;
    for (const auto& task : tasks) {
        if (audit_result.is_retained(task.task_id)) kept.push_back(task);
    }
    return kept;
}

// Calibration artifact: per-judge profiles plus the validation-set judge
// ordering used by the judge-K strategies.
struct Calibration {
    std::vector<judge::CalibrationProfile> profiles;
    std::vector<std::string> order;
    std::map<std::string, double> validation_kappa;
    std::string source;

    const judge::CalibrationProfile* find(const std::string& judge_name) const {
        for (const auto& p : profiles) {
            if (p.judge_name == judge_name) return &p;
        }
        return nullptr;
    }
};

json calibration_to_json(const Calibration& calibration) {
    json j{{"source", calibration.source}, {"order", calibration.order}};
    j["profiles"] = calibration.profiles;
    j["validation_kappa"] = calibration.validation_kappa;
    return j;
}

Calibration calibration_from_json(const json& j) {
    Calibration calibration;
    calibration.source = j.value("source", std::string());
    if (j.contains("order")) calibration.order = j.at("order").get<std::vector<std::string>>();
    for (const auto& p : j.at("profiles")) calibration.profiles.push_back(p.get<judge::CalibrationProfile>());
    if (j.contains("validation_kappa"))
        calibration.validation_kappa = j.at("validation_kappa").get<std::map<std::string, double>>();
    return calibration;
}

// Execution results cached by (task, candidate text) so byte-identical
// candidates run once. Cache fills may run in parallel under the runner's
// own parallelism cap.
class ExecutionCache {
  public:
    explicit ExecutionCache(exec::Runner& runner) : runner_(runner) {}

    struct Request {
        const corpus::CodingTask* task;
        std::string text;
        std::string candidate_id;
    };

    void prefetch(const std::vector<Request>& requests) {
        std::vector<std::pair<std::string, std::future<exec::ExecutionOutcome>>> jobs;
        std::set<std::string> scheduled;
        for (const auto& req : requests) {
            std::string key = cache_key(req.task->task_id, req.text);
            if (cache_.count(key) || scheduled.count(key)) continue;
            scheduled.insert(key);
            jobs.emplace_back(key, std::async(std::launch::async, [this, req] {
                                  return runner_.run_candidate(*req.task, req.text, req.candidate_id);
                              }));
        }
        for (auto& [key, fut] : jobs) cache_.emplace(key, fut.get());
    }

    exec::ExecutionOutcome get(const corpus::CodingTask& task, const std::string& text,
                               const std::string& candidate_id) {
        std::string key = cache_key(task.task_id, text);
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, runner_.run_candidate(task, text, candidate_id)).first;
        exec::ExecutionOutcome outcome = it->second;
        outcome.candidate_id = candidate_id;  // attribute to the requesting candidate
        return outcome;
    }

  private:
    static std::string cache_key(const std::string& task_id, const std::string& text) {
        return task_id + "\x1f" + fnv1a64_hex(text);
    }
    exec::Runner& runner_;
    std::map<std::string, exec::ExecutionOutcome> cache_;
};

// Judgments cached by (judge, prompt) so identical candidate texts are
// judged once per judge.
class JudgeContext {
  public:
    JudgeContext(std::unique_ptr<backends::Backend> backend, judge::CalibrationProfile profile)
        : backend_(std::move(backend)), profile_(std::move(profile)) {}

    const std::string& name() const { return backend_->name(); }
    const judge::CalibrationProfile& profile() const { return profile_; }

    judge::Judgment judge_candidate(const corpus::CodingTask& task, const gen::CandidateImplementation& cand) {
        std::string prompt = judge::build_judge_prompt(task, cand);
        std::string key = backends::prompt_key(prompt);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            auto result = backend_->complete(prompt, 1, 0).front();
            judge::Judgment jm;
            jm.judge_name = name();
            jm.latency_s = result.latency_s;
            if (auto parsed = judge::parse_verdict(result)) {
                jm.parse_status = judge::ParseStatus::ok;
                jm.verdict = parsed->y;
                jm.p_raw = parsed->p_raw;
                jm.from_logprobs = parsed->from_logprobs;
                jm.p = judge::calibrate(parsed->p_raw, profile_);
            } else {
                jm.parse_status = judge::ParseStatus::unparseable;
            }
            it = cache_.emplace(key, std::move(jm)).first;
        }
        judge::Judgment jm = it->second;
        jm.candidate_id = cand.candidate_id;
        return jm;
    }

  private:
    std::unique_ptr<backends::Backend> backend_;
    judge::CalibrationProfile profile_;
    std::map<std::string, judge::Judgment> cache_;
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
}

}  // namespace

// ---------------------------------------------------------------------------
// sanitize
// ---------------------------------------------------------------------------

fs::path cmd_sanitize(const RunConfig& config) {
    auto tasks = corpus::load_corpus(config.corpus_path);
    exec::SandboxRunner runner(config.sandbox);
    auto audit_result = audit::audit_corpus(tasks, runner, config.flake_trials, config.sandbox.parallelism);

    fs::path run_dir = make_run_dir(config, "sanitize");
    write_run_info(run_dir, config, "sanitize");
    write_jsonl(run_dir / "audit.jsonl", audit::audit_report_rows(audit_result));

    std::vector<json> notes;
    for (const auto& [task_id, note] : audit_result.notes) notes.push_back(json{{"task_id", task_id}, {"note", note}});
    write_jsonl(run_dir / "audit_notes.jsonl", notes);

    if (audit_result.retained.size() >= 3) {
        auto split = corpus::split_tasks(audit_result.retained, config.split.ratio, config.split.seed,
                                         config.split.stratified);
        write_text_file(run_dir / "split.json", json(split).dump(2) + "\n");
    } else {
        std::cerr << "warning: only " << audit_result.retained.size()
                  << " tasks retained, too few for a train/validation/test split\n";
    }

    std::cout << "sanitize: " << tasks.size() << " tasks, " << audit_result.excluded.size() << " excluded, "
              << audit_result.retained.size() << " retained -> " << run_dir.string() << "\n";
    return run_dir;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

namespace {

std::vector<gen::CandidateImplementation> generate_pool(const corpus::CodingTask& task, backends::Backend& backend,
                                                        int n, int start_index) {
    auto pool = gen::generate_candidates(task, backend, n, start_index);
    gen::clean_candidates(pool);
    return pool;
}

json candidate_row(const gen::CandidateImplementation& cand, int repetition) {
    json row = cand;
    row["repetition"] = repetition;
    return row;
}

}  // namespace

fs::path cmd_generate(const RunConfig& config) {
    if (!config.generator) throw UsageError("generate: config needs a generator backend");
    auto tasks = corpus::load_corpus(config.corpus_path);
    if (config.audit_path) {
        auto audit_result = audit::audit_from_report_rows(read_jsonl(*config.audit_path));
        tasks = retained_tasks(tasks, audit_result);
    }

    fs::path run_dir = make_run_dir(config, "generate");
    write_run_info(run_dir, config, "generate");
    auto backend = build_backend(*config.generator, config.record_replays_to);

    std::vector<json> rows;
    long accepted = 0;
    for (const auto& task : tasks) {
        auto pool = generate_pool(task, *backend, config.n_candidates, 0);
        for (const auto& cand : pool) {
            accepted += cand.accepted() ? 1 : 0;
            rows.push_back(candidate_row(cand, 0));
        }
    }
    write_jsonl(run_dir / "candidates.jsonl", rows);
    std::cout << "generate: " << rows.size() << " candidates (" << accepted << " accepted) over " << tasks.size()
              << " tasks -> " << run_dir.string() << "\n";
    return run_dir;
}

// ---------------------------------------------------------------------------
// judge
// ---------------------------------------------------------------------------

fs::path cmd_judge(const RunConfig& config) {
    if (config.judges.empty()) throw UsageError("judge: config needs at least one judge backend");
    if (!config.candidates_path) throw UsageError("judge: config needs 'candidates' (run generate first)");

    auto tasks = corpus::load_corpus(config.corpus_path);
    std::map<std::string, const corpus::CodingTask*> task_by_id;
    for (const auto& t : tasks) task_by_id[t.task_id] = &t;

    std::vector<gen::CandidateImplementation> candidates;
    for (const auto& row : read_jsonl(*config.candidates_path))
        candidates.push_back(row.get<gen::CandidateImplementation>());

    std::optional<Calibration> calibration;
    if (config.calibration_path)
        calibration = calibration_from_json(json::parse(read_text_file(*config.calibration_path)));

    fs::path run_dir = make_run_dir(config, "judge");
    write_run_info(run_dir, config, "judge");

    std::vector<JudgeContext> contexts;
    for (const auto& judge_config : config.judges) {
        judge::CalibrationProfile profile{judge_config.name, 0.0, 1.0, "identity"};
        if (calibration) {
            const auto* fitted = calibration->find(judge_config.name);
            if (!fitted) throw UsageError("judge: no calibration profile for judge '" + judge_config.name + "'");
            profile = *fitted;
        }
        contexts.emplace_back(build_backend(judge_config, config.record_replays_to), std::move(profile));
    }

    std::vector<json> rows;
    for (auto& context : contexts) {
        for (const auto& cand : candidates) {
            if (!cand.accepted()) continue;
            auto task_it = task_by_id.find(cand.task_id);
            if (task_it == task_by_id.end())
                throw std::runtime_error("judge: candidate '" + cand.candidate_id + "' references unknown task '" +
                                         cand.task_id + "'");
            judge::Judgment jm = context.judge_candidate(*task_it->second, cand);
            json row = jm;
            row["task_id"] = cand.task_id;
            rows.push_back(std::move(row));
        }
    }
    write_jsonl(run_dir / "judgments.jsonl", rows);
    std::cout << "judge: " << rows.size() << " judgments by " << contexts.size() << " judge(s) -> "
              << run_dir.string() << "\n";
    return run_dir;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

fs::path cmd_calibrate(const RunConfig& config) {
    if (!config.generator) throw UsageError("calibrate: config needs a generator backend");
    if (config.judges.empty()) throw UsageError("calibrate: config needs at least one judge backend");

    auto tasks = corpus::load_corpus(config.corpus_path);
    exec::SandboxRunner runner(config.sandbox);
    auto audit_result = obtain_audit(config, tasks, runner);
    auto split = obtain_split(config, audit_result.retained);

    std::set<std::string> validation_ids(split.validation.begin(), split.validation.end());
    std::vector<corpus::CodingTask> validation_tasks;
    for (const auto& task : tasks) {
        if (validation_ids.count(task.task_id) && audit_result.is_retained(task.task_id))
            validation_tasks.push_back(task);
    }
    if (validation_tasks.empty()) throw UsageError("calibrate: validation split is empty");

    auto generator = build_backend(*config.generator, config.record_replays_to);
    std::vector<JudgeContext> contexts;
    for (const auto& judge_config : config.judges) {
        contexts.emplace_back(build_backend(judge_config, config.record_replays_to),
                              judge::CalibrationProfile{judge_config.name, 0.0, 1.0, "identity"});
    }

    ExecutionCache executions(runner);
    std::map<std::string, std::vector<double>> raw_confidences;
    std::map<std::string, std::vector<judge::LabeledJudgment>> labeled;

    for (const auto& task : validation_tasks) {
        auto pool = generate_pool(task, *generator, config.n_candidates, 0);
        std::vector<ExecutionCache::Request> requests;
        for (const auto& cand : pool) {
            if (cand.accepted()) requests.push_back({&task, cand.runnable_text(), cand.candidate_id});
        }
        executions.prefetch(requests);
        for (const auto& cand : pool) {
            if (!cand.accepted()) continue;
            bool truth = executions.get(task, cand.runnable_text(), cand.candidate_id).passed();
            for (auto& context : contexts) {
                judge::Judgment jm = context.judge_candidate(task, cand);
                if (jm.parse_status != judge::ParseStatus::ok) continue;
                raw_confidences[context.name()].push_back(jm.p_raw);
                labeled[context.name()].push_back({jm.verdict, jm.p_raw, truth});
            }
        }
    }

    std::string ids;
    for (const auto& id : split.validation) ids += id + "\n";
    std::string source = "validation:" + std::to_string(split.validation.size()) + ":" + fnv1a64_hex(ids);

    Calibration calibration;
    calibration.source = source;
    for (const auto& judge_config : config.judges) {
        auto it = raw_confidences.find(judge_config.name);
        if (it == raw_confidences.end() || it->second.empty())
            throw std::runtime_error("calibrate: judge '" + judge_config.name +
                                     "' produced no parseable judgments on the validation set");
        calibration.profiles.push_back(judge::fit_calibration(judge_config.name, it->second, source));
        auto matrix = metrics::confusion(labeled[judge_config.name]);
        calibration.validation_kappa[judge_config.name] =
            matrix.total() > 0 ? metrics::cohens_kappa(matrix).kappa : 0.0;
    }

    // Judge order for the K-judge strategies: best validation agreement
    // first, config order breaking ties.
    std::vector<std::string> order;
    for (const auto& judge_config : config.judges) order.push_back(judge_config.name);
    std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
        return calibration.validation_kappa[a] > calibration.validation_kappa[b];
    });
    calibration.order = order;

    fs::path run_dir = make_run_dir(config, "calibrate");
    write_run_info(run_dir, config, "calibrate");
    write_text_file(run_dir / "calibration.json", calibration_to_json(calibration).dump(2) + "\n");
    std::cout << "calibrate: " << calibration.profiles.size() << " profile(s) from " << validation_tasks.size()
              << " validation tasks -> " << run_dir.string() << "\n";
    return run_dir;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

struct JudgeAnalysis {
    std::vector<judge::LabeledJudgment> labeled;  // raw confidence, parse ok only
    long unparseable = 0;
};

json build_report(const std::vector<metrics::EvaluationRecord>& records, const std::vector<std::string>& strategies,
                  const std::map<std::string, JudgeAnalysis>& judge_analysis, const json& meta) {
    json report;
    report["meta"] = meta;

    std::map<std::string, std::vector<metrics::EvaluationRecord>> by_strategy;
    for (const auto& r : records) by_strategy[r.strategy].push_back(r);

    json strategy_block = json::object();
    for (const auto& name : strategies) {
        auto it = by_strategy.find(name);
        if (it == by_strategy.end()) throw IncompleteError("report: no records for strategy '" + name + "'");
        strategy_block[name] = json{{"pass_at_1", metrics::pass_at_1(it->second)},
                                    {"records", it->second.size()}};
    }
    report["strategies"] = std::move(strategy_block);

    // Pairwise McNemar with BH adjustment across all pairs, plus the
    // matched-pairs odds ratio.
    struct Pair {
        std::string a, b;
        long discordant_b, discordant_c;
        double p;
        metrics::OddsRatioResult odds;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        for (std::size_t k = i + 1; k < strategies.size(); ++k) {
            std::map<std::pair<std::string, int>, bool> a_pass, b_pass;
            for (const auto& r : by_strategy[strategies[i]]) a_pass[{r.task_id, r.repetition}] = r.pass;
            for (const auto& r : by_strategy[strategies[k]]) b_pass[{r.task_id, r.repetition}] = r.pass;
            std::vector<std::pair<bool, bool>> paired;
            for (const auto& [cell, pass_a] : a_pass) {
                auto it = b_pass.find(cell);
                if (it == b_pass.end())
                    throw IncompleteError("report: strategies '" + strategies[i] + "' and '" + strategies[k] +
                                          "' cover different cells");
                paired.emplace_back(pass_a, it->second);
            }
            auto [db, dc] = metrics::discordant_counts(paired);
            pairs.push_back({strategies[i], strategies[k], db, dc, metrics::mcnemar_exact(db, dc),
                             metrics::odds_ratio(db, dc)});
        }
    }
    std::vector<double> p_values;
    for (const auto& pr : pairs) p_values.push_back(pr.p);
    auto adjusted = p_values.empty() ? p_values : metrics::benjamini_hochberg(p_values);

    auto comparisons = json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        comparisons.push_back(json{{"a", pairs[i].a},
                                   {"b", pairs[i].b},
                                   {"discordant_a_only", pairs[i].discordant_b},
                                   {"discordant_b_only", pairs[i].discordant_c},
                                   {"mcnemar_p", pairs[i].p},
                                   {"adjusted_p", adjusted[i]},
                                   {"odds_ratio", pairs[i].odds.value},
                                   {"or_continuity_corrected", pairs[i].odds.continuity_corrected},
                                   {"or_definition", "matched-pairs"}});
    }
    report["comparisons"] = std::move(comparisons);
    report["timing"] = metrics::timing_summary(records);

    json judges_block = json::object();
    json sweep_block = json::object();
    auto grid = judge::paper_threshold_grid();
    for (const auto& [name, analysis] : judge_analysis) {
        json entry;
        auto matrix = metrics::confusion(analysis.labeled);
        entry["confusion"] = matrix;
        if (matrix.total() > 0) {
            auto rates = metrics::row_rates(matrix);
            entry["rates"] = json{{"tp_rate", rates.tp_rate},
                                  {"fn_rate", rates.fn_rate},
                                  {"tn_rate", rates.tn_rate},
                                  {"fp_rate", rates.fp_rate}};
            auto kappa = metrics::cohens_kappa(matrix);
            entry["kappa"] = kappa.kappa;
            entry["kappa_band"] = kappa.band;
        }
        entry["unparseable"] = analysis.unparseable;
        judges_block[name] = std::move(entry);

        auto sweep = judge::sweep_precision_by_threshold(analysis.labeled, grid);
        auto sweep_rows = json::array();
        for (const auto& point : sweep) {
            sweep_rows.push_back(
                json{{"threshold", point.threshold},
                     {"precision_correct", point.precision_correct ? json(*point.precision_correct) : json()},
                     {"precision_incorrect", point.precision_incorrect ? json(*point.precision_incorrect) : json()},
                     {"coverage", point.coverage}});
        }
        sweep_block[name] = std::move(sweep_rows);
    }
    report["judges"] = std::move(judges_block);
    report["sweep"] = std::move(sweep_block);
    return report;
}

void write_report_files(const fs::path& run_dir, const json& report, const std::vector<std::string>& strategies) {
    write_text_file(run_dir / "report.json", report.dump(2) + "\n");

    std::string pass1 = "strategy\tpass_at_1\tmean_total_latency_s\n";
    for (const auto& name : strategies) {
        double mean_latency = 0.0;
        if (report.at("timing").contains(name)) mean_latency = report.at("timing").at(name).get<double>();
        pass1 += name + "\t" + format_double(report.at("strategies").at(name).at("pass_at_1").get<double>()) + "\t" +
                 format_double(mean_latency) + "\n";
    }
    write_text_file(run_dir / "pass1.tsv", pass1);

    std::string sweep = "judge\tthreshold\tprecision_correct\tprecision_incorrect\tcoverage\n";
    for (const auto& [name, rows] : report.at("sweep").items()) {
        for (const auto& row : rows) {
            auto cell = [&](const char* key) {
                return row.at(key).is_null() ? std::string("NA") : format_double(row.at(key).get<double>());
            };
            char threshold[16];
            std::snprintf(threshold, sizeof(threshold), "%.2f", row.at("threshold").get<double>());
            sweep += name + "\t" + threshold + "\t" + cell("precision_correct") + "\t" + cell("precision_incorrect") +
                     "\t" + format_double(row.at("coverage").get<double>()) + "\n";
        }
    }
    write_text_file(run_dir / "sweep.tsv", sweep);
}

}  // namespace

fs::path cmd_evaluate(const RunConfig& config) {
    if (!config.generator) throw UsageError("evaluate: config needs a generator backend");
    if (config.strategies.empty()) throw UsageError("evaluate: config needs at least one strategy");

    std::vector<StrategySpec> specs;
    int max_judges = 0;
    bool needs_loglik = false;
    for (const auto& name : config.strategies) {
        specs.push_back(parse_strategy(name));
        if (specs.back().kind == StrategySpec::Kind::judges) max_judges = std::max(max_judges, specs.back().k);
        if (specs.back().kind == StrategySpec::Kind::loglik) needs_loglik = true;
    }
    if (max_judges > static_cast<int>(config.judges.size()))
        throw UsageError("evaluate: judge strategies need " + std::to_string(max_judges) +
                         " judge backend(s), config has " + std::to_string(config.judges.size()));
    if (needs_loglik && !config.generator->request_logprobs)
        throw UsageError("evaluate: the log-likelihood strategy requires generator.request_logprobs=true");

    auto tasks = corpus::load_corpus(config.corpus_path);
    exec::SandboxRunner runner(config.sandbox);
    auto audit_result = obtain_audit(config, tasks, runner);
    auto eval_tasks = retained_tasks(tasks, audit_result);

    if (config.eval_split != "all") {
        auto split = obtain_split(config, audit_result.retained);
        const std::vector<std::string>* part = nullptr;
        if (config.eval_split == "train")
            part = &split.train;
        else if (config.eval_split == "validation")
            part = &split.validation;
        else if (config.eval_split == "test")
            part = &split.test;
        else
            throw UsageError("evaluate: eval_split must be all|train|validation|test");
        std::set<std::string> keep(part->begin(), part->end());
        std::erase_if(eval_tasks, [&](const corpus::CodingTask& t) { return !keep.count(t.task_id); });
    }
    if (eval_tasks.empty()) throw UsageError("evaluate: no tasks to evaluate after audit/split filtering");

    // Judge contexts with calibration profiles, in validation order.
    std::vector<JudgeContext> contexts;
    if (max_judges > 0) {
        if (!config.calibration_path)
            throw UsageError("evaluate: judge strategies require a calibration file (run calibrate first)");
        auto calibration = calibration_from_json(json::parse(read_text_file(*config.calibration_path)));

        std::map<std::string, const backends::BackendConfig*> judge_configs;
        for (const auto& jc : config.judges) judge_configs[jc.name] = &jc;
        std::vector<std::string> order = calibration.order;
        for (const auto& jc : config.judges) {
            if (std::find(order.begin(), order.end(), jc.name) == order.end()) order.push_back(jc.name);
        }
        for (const auto& name : order) {
            auto it = judge_configs.find(name);
            if (it == judge_configs.end()) continue;  // profile for a judge not in this run
            const auto* profile = calibration.find(name);
            if (!profile)
                throw UsageError("evaluate: no calibration profile for judge '" + name + "' in " +
                                 config.calibration_path->string());
            contexts.emplace_back(build_backend(*it->second, config.record_replays_to), *profile);
            if (static_cast<int>(contexts.size()) == max_judges) break;
        }
        if (static_cast<int>(contexts.size()) < max_judges)
            throw UsageError("evaluate: calibration covers fewer judges than judge strategies need");
    }

    auto generator = build_backend(*config.generator, config.record_replays_to);
    ExecutionCache executions(runner);

    std::vector<json> candidate_rows;
    std::vector<json> judgment_rows;
    std::map<std::string, json> outcome_rows;  // keyed by candidate_id
    std::vector<metrics::EvaluationRecord> records;
    std::map<std::string, JudgeAnalysis> judge_analysis;
    for (const auto& context : contexts) judge_analysis[context.name()];

    auto persist_outcome = [&](const exec::ExecutionOutcome& outcome) {
        if (outcome_rows.count(outcome.candidate_id)) return;
        json row = outcome;
        // wall_time_s is measured wall clock and is excluded from the
        // persisted record so replay re-runs are byte-identical.
        row.erase("wall_time_s");
        outcome_rows.emplace(outcome.candidate_id, std::move(row));
    };

    for (const auto& task : eval_tasks) {
        for (int rep = 0; rep < config.repetitions; ++rep) {
            auto pool = generate_pool(task, *generator, config.n_candidates, rep * config.n_candidates);
            double pool_gen_latency = 0.0;
            for (const auto& cand : pool) {
                pool_gen_latency += cand.gen_latency_s;
                candidate_rows.push_back(candidate_row(cand, rep));
            }

            std::vector<gen::CandidateImplementation> accepted;
            for (const auto& cand : pool) {
                if (cand.accepted()) accepted.push_back(cand);
            }
            const bool fallback = accepted.empty();

            // Ground truth for every accepted candidate plus the raw first
            // sample, which single-candidate and the fallback path submit.
            std::vector<ExecutionCache::Request> requests;
            for (const auto& cand : accepted) requests.push_back({&task, cand.runnable_text(), cand.candidate_id});
            requests.push_back({&task, pool.front().runnable_text(), pool.front().candidate_id});
            executions.prefetch(requests);
            for (const auto& cand : accepted) {
                persist_outcome(executions.get(task, cand.runnable_text(), cand.candidate_id));
            }
            persist_outcome(executions.get(task, pool.front().runnable_text(), pool.front().candidate_id));

            // Judgments by the first max_judges judges over the accepted set.
            std::map<std::string, std::vector<judge::Judgment>> judgments_by_candidate;
            for (auto& context : contexts) {
                for (const auto& cand : accepted) {
                    judge::Judgment jm = context.judge_candidate(task, cand);
                    json row = jm;
                    row["task_id"] = task.task_id;
                    judgment_rows.push_back(std::move(row));

                    auto& analysis = judge_analysis[context.name()];
                    if (jm.parse_status == judge::ParseStatus::ok) {
                        bool truth = executions.get(task, cand.runnable_text(), cand.candidate_id).passed();
                        analysis.labeled.push_back({jm.verdict, jm.p_raw, truth});
                    } else {
                        ++analysis.unparseable;
                    }
                    judgments_by_candidate[cand.candidate_id].push_back(std::move(jm));
                }
            }

            for (const auto& spec : specs) {
                const gen::CandidateImplementation* selected = nullptr;
                double latency = 0.0;
                bool record_fallback = false;

                switch (spec.kind) {
                    case StrategySpec::Kind::single:
                        selected = &pool.front();
                        latency = pool.front().gen_latency_s;
                        break;
                    case StrategySpec::Kind::random:
                        latency = pool_gen_latency;
                        if (fallback) {
                            selected = &pool.front();
                            record_fallback = true;
                        } else {
                            std::uint64_t seed = derive_seed(
                                config.seed, {"select-random", task.task_id, std::to_string(rep), spec.name});
                            selected = &judge::select_random(accepted, seed);
                        }
                        break;
                    case StrategySpec::Kind::loglik:
                        latency = pool_gen_latency;
                        if (fallback) {
                            selected = &pool.front();
                            record_fallback = true;
                        } else {
                            selected = &judge::select_by_loglikelihood(accepted);
                        }
                        break;
                    case StrategySpec::Kind::judges: {
                        latency = pool_gen_latency;
                        if (fallback) {
                            selected = &pool.front();
                            record_fallback = true;
                            break;
                        }
                        std::vector<judge::EnsembleScore> scores;
                        scores.reserve(accepted.size());
                        for (const auto& cand : accepted) {
                            const auto& all = judgments_by_candidate[cand.candidate_id];
                            std::vector<judge::Judgment> first_k(all.begin(), all.begin() + spec.k);
                            for (const auto& jm : first_k) latency += jm.latency_s;
                            scores.push_back(judge::ensemble_score(cand.candidate_id, first_k));
                        }
                        selected = &judge::select_by_judges(accepted, scores);
                        break;
                    }
                }

                auto outcome = executions.get(task, selected->runnable_text(), selected->candidate_id);
                persist_outcome(outcome);
                metrics::EvaluationRecord record;
                record.task_id = task.task_id;
                record.repetition = rep;
                record.strategy = spec.name;
                record.candidate_id = selected->candidate_id;
                record.pass = outcome.passed();
                record.total_latency_s = latency;
                record.fallback = record_fallback;
                records.push_back(std::move(record));
            }
        }
    }

    fs::path run_dir = make_run_dir(config, "evaluate");
    write_run_info(run_dir, config, "evaluate");
    write_jsonl(run_dir / "candidates.jsonl", candidate_rows);
    write_jsonl(run_dir / "judgments.jsonl", judgment_rows);
    std::vector<json> outcome_list;
    for (auto& [id, row] : outcome_rows) outcome_list.push_back(std::move(row));
    write_jsonl(run_dir / "outcomes.jsonl", outcome_list);
    std::vector<json> record_rows;
    for (const auto& r : records) record_rows.push_back(json(r));
    write_jsonl(run_dir / "records.jsonl", record_rows);

    json meta{{"generator", config.generator->name},
              {"n_candidates", config.n_candidates},
              {"repetitions", config.repetitions},
              {"tasks", eval_tasks.size()},
              {"seed", config.seed},
              {"eval_split", config.eval_split}};
    json report = build_report(records, config.strategies, judge_analysis, meta);
    write_report_files(run_dir, report, config.strategies);

    for (const auto& name : config.strategies) {
        std::cout << "evaluate: " << name << " pass@1 = "
                  << format_double(report.at("strategies").at(name).at("pass_at_1").get<double>()) << "\n";
    }
    std::cout << "evaluate: artifacts -> " << run_dir.string() << "\n";
    return run_dir;
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

fs::path cmd_export(const RunConfig& config) {
    if (!config.candidates_path) throw UsageError("export: config needs 'candidates' (run generate first)");

    auto tasks = corpus::load_corpus(config.corpus_path);
    std::vector<gen::CandidateImplementation> candidates;
    for (const auto& row : read_jsonl(*config.candidates_path))
        candidates.push_back(row.get<gen::CandidateImplementation>());
    if (candidates.empty()) throw UsageError("export: candidate file is empty: " + config.candidates_path->string());

    exec::SandboxRunner runner(config.sandbox);
    auto audit_result = obtain_audit(config, tasks, runner);
    auto split = obtain_split(config, audit_result.retained);

    std::map<std::string, const corpus::CodingTask*> task_by_id;
    for (const auto& t : tasks) task_by_id[t.task_id] = &t;

    ExecutionCache executions(runner);
    std::vector<ExecutionCache::Request> requests;
    for (const auto& cand : candidates) {
        if (!cand.accepted()) continue;
        auto it = task_by_id.find(cand.task_id);
        if (it == task_by_id.end())
            throw std::runtime_error("export: candidate '" + cand.candidate_id + "' references unknown task '" +
                                     cand.task_id + "'");
        requests.push_back({it->second, cand.runnable_text(), cand.candidate_id});
    }
    executions.prefetch(requests);

    std::map<std::string, exec::ExecutionOutcome> outcomes;
    for (const auto& cand : candidates) {
        if (!cand.accepted()) continue;
        const auto* task = task_by_id.at(cand.task_id);
        outcomes.emplace(cand.candidate_id, executions.get(*task, cand.runnable_text(), cand.candidate_id));
    }

    fs::path run_dir = make_run_dir(config, "export");
    write_run_info(run_dir, config, "export");
    auto stats = exec::export_finetune_corpus(tasks, candidates, outcomes, split, run_dir);

    auto describe = [](const char* name, const exec::ExportStats::Counts& c) {
        std::cout << "export: " << name << " " << c.total() << " quadruples (" << c.correct << " correct, "
                  << c.incorrect << " incorrect)\n";
    };
    describe("train", stats.train);
    describe("validation", stats.validation);
    describe("test", stats.test);
    std::cout << "export: artifacts -> " << run_dir.string() << "\n";
    return run_dir;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fs::path cmd_report(const RunConfig& config, const fs::path& run_dir) {
    if (!fs::exists(run_dir / "records.jsonl"))
        throw UsageError("report: " + (run_dir / "records.jsonl").string() + " not found");

    std::vector<metrics::EvaluationRecord> records;
    for (const auto& row : read_jsonl(run_dir / "records.jsonl"))
        records.push_back(row.get<metrics::EvaluationRecord>());
    if (records.empty()) throw IncompleteError("report: records.jsonl is empty");

    std::vector<std::string> strategies = config.strategies;
    if (strategies.empty()) {
        std::set<std::string> seen;
        for (const auto& r : records) {
            if (seen.insert(r.strategy).second) strategies.push_back(r.strategy);
        }
    }

    // Rebuild the per-judge analysis from persisted judgments + outcomes.
    std::map<std::string, JudgeAnalysis> judge_analysis;
    if (fs::exists(run_dir / "judgments.jsonl") && fs::exists(run_dir / "outcomes.jsonl")) {
        std::map<std::string, bool> truth_by_candidate;
        for (const auto& row : read_jsonl(run_dir / "outcomes.jsonl"))
            truth_by_candidate[row.at("candidate_id").get<std::string>()] =
                row.at("verdict").get<std::string>() == "pass";
        for (const auto& row : read_jsonl(run_dir / "judgments.jsonl")) {
            auto jm = row.get<judge::Judgment>();
            auto& analysis = judge_analysis[jm.judge_name];
            if (jm.parse_status != judge::ParseStatus::ok) {
                ++analysis.unparseable;
                continue;
            }
            auto it = truth_by_candidate.find(jm.candidate_id);
            if (it == truth_by_candidate.end())
                throw IncompleteError("report: judgment for candidate '" + jm.candidate_id +
                                      "' has no execution outcome");
            analysis.labeled.push_back({jm.verdict, jm.p_raw, it->second});
        }
    }

    json meta{{"source", run_dir.string()}};
    if (fs::exists(run_dir / "run_info.json")) meta["run_info"] = json::parse(read_text_file(run_dir / "run_info.json"));
    json report = build_report(records, strategies, judge_analysis, meta);
    write_report_files(run_dir, report, strategies);
    std::cout << "report: rebuilt -> " << (run_dir / "report.json").string() << "\n";
    return run_dir;
}

}  // namespace codejury::pipeline

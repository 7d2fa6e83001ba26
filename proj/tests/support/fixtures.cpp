#include "support/fixtures.hpp"

#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "codejury/jsonl.hpp"
#include "codejury/judging.hpp"
#include "codejury/util.hpp"

namespace cjtest {

namespace fs = std::filesystem;
using codejury::backends::CompletionResult;
using codejury::corpus::CodingTask;

TempDir::TempDir(const std::string& label) {
    static std::atomic<int> counter{0};
    path_ = fs::current_path() / ("cjtest-" + label + "-" + std::to_string(getpid()) + "-" +
                                  std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

CodingTask write_js_task(const fs::path& dir, const JsTaskSpec& spec) {
    fs::create_directories(dir);
    fs::path test_file = dir / (spec.task_id + "_test.js");
    std::string test_js =
        "const fs = require('fs');\n"
        "eval(fs.readFileSync(process.argv[2], 'utf8'));\n"
        "const assert = require('assert');\n" +
        spec.test_body + "\nconsole.log('tests passed');\n";
    codejury::write_text_file(test_file, test_js);

    CodingTask task;
    task.task_id = spec.task_id;
    task.language_tag = "javascript";
    task.description = spec.description;
    task.signature = spec.signature;
    task.prompt = spec.description + "\n" + spec.signature;
    task.test_command = "node " + fs::absolute(test_file).string() + " {candidate}";
    if (!spec.reference.empty()) task.reference_solution = spec.reference;
    if (!spec.return_type.empty()) task.return_type = spec.return_type;
    task.timeout_s = spec.timeout_s;
    return task;
}

CodingTask square_task(const fs::path& dir, const std::string& task_id, double timeout_s) {
    JsTaskSpec spec;
    spec.task_id = task_id;
    spec.description = "Return the square of the integer x.";
    spec.signature = "function square(x)";
    spec.test_body = "assert.strictEqual(square(2), 4);\nassert.strictEqual(square(-3), 9);";
    spec.reference = "function square(x) {\n    return x * x;\n}";
    spec.return_type = "int";
    spec.timeout_s = timeout_s;
    return write_js_task(dir, spec);
}

fs::path write_sanitizer_corpus(const fs::path& dir) {
    std::vector<CodingTask> tasks;

    // reference computes x + x, tests require square(3) == 9
    {
        JsTaskSpec spec;
        spec.task_id = "bad_reference";
        spec.description = "Return the square of the integer x.";
        spec.signature = "function square(x)";
        spec.test_body = "assert.strictEqual(square(3), 9);";
        spec.reference = "function square(x) {\n    return x + x;\n}";
        spec.return_type = "int";
        tasks.push_back(write_js_task(dir, spec));
    }
    // tests assert nothing, so an empty body sails through
    {
        JsTaskSpec spec;
        spec.task_id = "weak_tests";
        spec.description = "Log a greeting for the given name.";
        spec.signature = "function greet(name)";
        spec.test_body = "greet('world');";
        spec.reference = "function greet(name) {\n    return 'hello ' + name;\n}";
        spec.return_type = "string";
        tasks.push_back(write_js_task(dir, spec));
    }
    // tests only exercise the empty-input case, satisfied by `return 0`
    {
        JsTaskSpec spec;
        spec.task_id = "weak_zero";
        spec.description = "Count the number of error entries in the list.";
        spec.signature = "function countErrors(entries)";
        spec.test_body = "assert.strictEqual(countErrors([]), 0);";
        spec.reference = "function countErrors(entries) {\n    return entries.length;\n}";
        spec.return_type = "int";
        tasks.push_back(write_js_task(dir, spec));
    }
    // period-2 flake: a state file left in the workdir flips the outcome
    {
        JsTaskSpec spec;
        spec.task_id = "flaky_state";
        spec.description = "Return twice the value of x.";
        spec.signature = "function double2(x)";
        spec.test_body =
            "let n = 0;\n"
            "try { n = parseInt(fs.readFileSync('flake_state', 'utf8')); } catch (e) {}\n"
            "fs.writeFileSync('flake_state', String(n + 1));\n"
            "assert.strictEqual(double2(2), 4);\n"
            "if (n % 2 !== 0) { throw new Error('intermittent backend unavailable'); }";
        spec.reference = "function double2(x) {\n    return x + x;\n}";
        spec.return_type = "int";
        tasks.push_back(write_js_task(dir, spec));
    }
    // four clean tasks
    tasks.push_back(square_task(dir, "clean_square"));
    {
        JsTaskSpec spec;
        spec.task_id = "clean_add";
        spec.description = "Return the sum of a and b.";
        spec.signature = "function add(a, b)";
        spec.test_body = "assert.strictEqual(add(2, 3), 5);\nassert.strictEqual(add(-1, 1), 0);";
        spec.reference = "function add(a, b) {\n    return a + b;\n}";
        spec.return_type = "int";
        tasks.push_back(write_js_task(dir, spec));
    }
    {
        JsTaskSpec spec;
        spec.task_id = "clean_concat";
        spec.description = "Concatenate two strings.";
        spec.signature = "function concat2(a, b)";
        spec.test_body = "assert.strictEqual(concat2('a', 'b'), 'ab');";
        spec.reference = "function concat2(a, b) {\n    return a + b;\n}";
        spec.return_type = "string";
        tasks.push_back(write_js_task(dir, spec));
    }
    {
        JsTaskSpec spec;
        spec.task_id = "clean_even";
        spec.description = "Return true when x is even.";
        spec.signature = "function isEven(x)";
        spec.test_body = "assert.strictEqual(isEven(2), true);\nassert.strictEqual(isEven(3), false);";
        spec.reference = "function isEven(x) {\n    return x % 2 === 0;\n}";
        spec.return_type = "boolean";
        tasks.push_back(write_js_task(dir, spec));
    }

    std::vector<nlohmann::json> rows;
    for (const auto& task : tasks) rows.push_back(nlohmann::json(task));
    fs::path corpus = dir / "corpus.jsonl";
    codejury::write_jsonl(corpus, rows);
    return corpus;
}

codejury::gen::CandidateImplementation make_candidate(const std::string& task_id, int sample_index,
                                                      const std::string& text, double mean_logprob) {
    codejury::gen::CandidateImplementation cand;
    cand.task_id = task_id;
    cand.candidate_id = task_id + "::fixture::s" + std::to_string(sample_index);
    cand.source_model = "fixture";
    cand.text = text;
    cand.raw_text = text;
    cand.sample_index = sample_index;
    cand.mean_token_logprob = mean_logprob;
    cand.clean_status = codejury::gen::CleanStatus::accepted;
    return cand;
}

CompletionResult completion_with_mean_logprob(const std::string& text, double mean_logprob, double latency_s) {
    CompletionResult result;
    result.text = text;
    result.token_logprobs = std::vector<codejury::backends::TokenLogprob>{{text, mean_logprob}};
    result.latency_s = latency_s;
    result.completion_tokens = 1;
    return result;
}

CompletionResult judge_completion(int verdict, double p_raw, double latency_s) {
    CompletionResult result;
    result.text = verdict == 1 ? "1" : "0";
    double lp_chosen = std::log(p_raw);
    result.token_logprobs = std::vector<codejury::backends::TokenLogprob>{{result.text, lp_chosen}};
    // p_raw = 1 cannot be expressed via two-way renormalization (the other
    // digit would need logprob -inf, unrepresentable in JSON); emit it as a
    // sole token with mass 1 instead.
    if (p_raw < 1.0) {
        double lp_other = std::log(1.0 - p_raw);
        std::vector<codejury::backends::TokenLogprob> alts;
        if (verdict == 1) {
            alts = {{"1", lp_chosen}, {"0", lp_other}};
        } else {
            alts = {{"0", lp_chosen}, {"1", lp_other}};
        }
        result.alt_logprobs_at = std::map<int, std::vector<codejury::backends::TokenLogprob>>{{0, alts}};
    }
    result.latency_s = latency_s;
    result.completion_tokens = 1;
    return result;
}

E2EFixture write_e2e_fixture(const fs::path& dir) {
    E2EFixture fixture;
    fs::create_directories(dir);

    CodingTask t1 = square_task(dir, "t1_square");
    JsTaskSpec add_spec;
    add_spec.task_id = "t2_add";
    add_spec.description = "Return the sum of a and b.";
    add_spec.signature = "function add(a, b)";
    add_spec.test_body = "assert.strictEqual(add(2, 3), 5);\nassert.strictEqual(add(10, -4), 6);";
    add_spec.reference = "function add(a, b) {\n    return a + b;\n}";
    add_spec.return_type = "int";
    CodingTask t2 = write_js_task(dir, add_spec);

    fixture.tasks = {t1, t2};
    std::vector<nlohmann::json> rows{nlohmann::json(t1), nlohmann::json(t2)};
    fixture.corpus = dir / "corpus.jsonl";
    codejury::write_jsonl(fixture.corpus, rows);

    // Generator replay: N=2 repetitions x n=2 samples per task.
    const std::string t1_correct = "function square(x) {\n    return x * x;\n}";
    const std::string t1_wrong_sum = "function square(x) {\n    return x + x;\n}";
    const std::string t1_wrong_id = "function square(x) {\n    return x;\n}";
    const std::string t2_wrong = "function add(a, b) {\n    return a - b;\n}";
    const std::string t2_correct = "function add(a, b) {\n    return a + b;\n}";

    fixture.generator_replay = dir / "generator.replay.jsonl";
    codejury::backends::ReplayWriter gen_writer(fixture.generator_replay);
    // t1 rep 0: correct (lp -0.5) vs wrong (lp -0.2, the likelier one)
    gen_writer.add(t1.prompt, 0, completion_with_mean_logprob(t1_correct, -0.5, 0.011));
    gen_writer.add(t1.prompt, 1, completion_with_mean_logprob(t1_wrong_sum, -0.2, 0.012));
    // t1 rep 1: wrong (lp -0.1) vs correct (lp -0.9)
    gen_writer.add(t1.prompt, 2, completion_with_mean_logprob(t1_wrong_id, -0.1, 0.013));
    gen_writer.add(t1.prompt, 3, completion_with_mean_logprob(t1_correct, -0.9, 0.014));
    // t2 rep 0: wrong (lp -0.3) vs correct (lp -0.4)
    gen_writer.add(t2.prompt, 0, completion_with_mean_logprob(t2_wrong, -0.3, 0.015));
    gen_writer.add(t2.prompt, 1, completion_with_mean_logprob(t2_correct, -0.4, 0.016));
    // t2 rep 1: correct twice (the duplicate is cleaned away)
    gen_writer.add(t2.prompt, 2, completion_with_mean_logprob(t2_correct, -0.2, 0.017));
    gen_writer.add(t2.prompt, 3, completion_with_mean_logprob(t2_correct, -0.2, 0.018));

    // Judge replay: the judge is right about every candidate, confident on
    // correct ones (0.9 raw) and a little less on wrong ones (0.8 raw).
    fixture.judge_replay = dir / "judge.replay.jsonl";
    codejury::backends::ReplayWriter judge_writer(fixture.judge_replay);
    auto add_judgment = [&](const CodingTask& task, const std::string& text, int verdict, double p_raw) {
        auto cand = make_candidate(task.task_id, 0, text, 0.0);
        std::string prompt = codejury::judge::build_judge_prompt(task, cand);
        judge_writer.add(prompt, 0, judge_completion(verdict, p_raw, 0.005));
    };
    add_judgment(t1, t1_correct, 1, 0.9);
    add_judgment(t1, t1_wrong_sum, 0, 0.8);
    add_judgment(t1, t1_wrong_id, 0, 0.8);
    add_judgment(t2, t2_wrong, 0, 0.8);
    add_judgment(t2, t2_correct, 1, 0.9);

    // Calibration profile mapping raw [0.5, 1.0] onto [0, 1].
    nlohmann::json calibration{
        {"source", "fixture"},
        {"order", {"j1"}},
        {"profiles",
         nlohmann::json::array({{{"judge_name", "j1"}, {"min_conf", 0.5}, {"max_conf", 1.0}, {"source", "fixture"}}})},
        {"validation_kappa", {{"j1", 1.0}}}};
    fixture.calibration = dir / "calibration.json";
    codejury::write_text_file(fixture.calibration, calibration.dump(2) + "\n");
    return fixture;
}

fs::path cli_binary_path() {
    std::array<char, 4096> buf{};
    ssize_t n = readlink("/proc/self/exe", buf.data(), buf.size() - 1);
    if (n <= 0) throw std::runtime_error("cannot resolve /proc/self/exe");
    fs::path self(std::string(buf.data(), static_cast<std::size_t>(n)));
    return self.parent_path() / "codejury";
}

int run_command(const std::string& command, std::string* output) {
    std::string line;
    FILE* pipe = popen((command + " 2>&1").c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed for: " + command);
    std::string captured;
    char buf[4096];
    while (std::size_t got = fread(buf, 1, sizeof(buf), pipe)) captured.append(buf, got);
    int status = pclose(pipe);
    if (output) *output = captured;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

}  // namespace cjtest

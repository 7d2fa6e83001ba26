// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "codejury/audit.hpp"
#include "codejury/execution.hpp"
#include "codejury/jsonl.hpp"
#include "codejury/judging.hpp"
#include "codejury/metrics.hpp"
#include "codejury/pipeline.hpp"
#include "codejury/util.hpp"
#include "support/fixtures.hpp"

using namespace codejury;

namespace {

struct Check {
    int failures = 0;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            detail << "      " << what << "\n";
        }
    }
    void expect_near(double got, double want, double tol, const std::string& what) {
        std::ostringstream msg;
        msg << what << " (got " << got << ", want " << want << " +/- " << tol << ")";
        expect(std::abs(got - want) <= tol, msg.str());
    }
};

// ---------------------------------------------------------------------------
// Criterion 1: statistics kernels vs independent brute-force oracles
// ---------------------------------------------------------------------------

long double kappa_oracle(long tp, long tn, long fp, long fn) {
    long double n = static_cast<long double>(tp + tn + fp + fn);
    long double po = (tp + tn) / n;
    long double judged_pos = (tp + fp) / n;
    long double truth_pos = (tp + fn) / n;
    long double pe = judged_pos * truth_pos + (1.0L - judged_pos) * (1.0L - truth_pos);
    if (pe >= 1.0L) return po >= 1.0L ? 1.0L : 0.0L;
    return (po - pe) / (1.0L - pe);
}

long double mcnemar_oracle(long b, long c) {
    long n = b + c;
    if (n == 0) return 1.0L;
    std::vector<long double> binom(static_cast<std::size_t>(n) + 1, 0.0L);
    binom[0] = 1.0L;
    for (long i = 1; i <= n; ++i) {
        for (long k = i; k >= 1; --k) binom[static_cast<std::size_t>(k)] += binom[static_cast<std::size_t>(k - 1)];
    }
    long double scale = std::pow(2.0L, static_cast<long double>(n));
    long double tail = 0.0L;
    for (long k = 0; k <= std::min(b, c); ++k) tail += binom[static_cast<std::size_t>(k)] / scale;
    long double p = 2.0L * tail;
    return p > 1.0L ? 1.0L : p;
}

std::vector<double> bh_oracle(const std::vector<double>& p) {
    // direct definition, O(m^2): adj_i = min over elements with p_j >= p_i
    // of p_j * m / rank_j, where rank_j counts elements with p <= p_j.
    std::size_t m = p.size();
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> adj_sorted(m);
    for (std::size_t i = 0; i < m; ++i) {
        double best = 1.0;
        for (std::size_t j = i; j < m; ++j) {
            double scaled = sorted[j] * (static_cast<double>(m) / static_cast<double>(j + 1));
            best = std::min(best, scaled);
        }
        adj_sorted[i] = best;
    }
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto it = std::lower_bound(sorted.begin(), sorted.end(), p[i]);
        out[i] = adj_sorted[static_cast<std::size_t>(it - sorted.begin())];
    }
    return out;
}

void criterion_statistics(Check& check) {
    std::mt19937_64 rng(101);

    int matrices = 0;
    while (matrices < 1000) {
        long tp = static_cast<long>(rng() % 51), tn = static_cast<long>(rng() % 51);
        long fp = static_cast<long>(rng() % 51), fn = static_cast<long>(rng() % 51);
        if (tp + tn + fp + fn == 0) continue;
        ++matrices;
        double got = metrics::cohens_kappa({tp, tn, fp, fn}).kappa;
        double want = static_cast<double>(kappa_oracle(tp, tn, fp, fn));
        if (std::abs(got - want) > 1e-9) {
            check.expect(false, "kappa mismatch on tp=" + std::to_string(tp) + " tn=" + std::to_string(tn) +
                                    " fp=" + std::to_string(fp) + " fn=" + std::to_string(fn));
            return;
        }
    }

    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t len = 1 + rng() % 200;
        std::vector<std::pair<bool, bool>> paired;
        for (std::size_t i = 0; i < len; ++i) paired.emplace_back(rng() % 2 == 0, rng() % 2 == 0);
        auto [b, c] = metrics::discordant_counts(paired);

        double got_p = metrics::mcnemar_exact(paired);
        double want_p = static_cast<double>(mcnemar_oracle(b, c));
        if (std::abs(got_p - want_p) > 1e-9) {
            check.expect(false, "mcnemar mismatch at b=" + std::to_string(b) + " c=" + std::to_string(c));
            return;
        }

        auto got_or = metrics::odds_ratio(paired);
        double want_or = (b == 0 || c == 0) ? (b + 0.5) / (c + 0.5) : static_cast<double>(b) / static_cast<double>(c);
        if (std::abs(got_or.value - want_or) > 1e-9 || got_or.continuity_corrected != (b == 0 || c == 0)) {
            check.expect(false, "odds-ratio mismatch at b=" + std::to_string(b) + " c=" + std::to_string(c));
            return;
        }

        std::vector<double> pvals;
        std::size_t m = 1 + rng() % 32;
        for (std::size_t i = 0; i < m; ++i) pvals.push_back(uniform_double(rng));
        auto got_bh = metrics::benjamini_hochberg(pvals);
        auto want_bh = bh_oracle(pvals);
        for (std::size_t i = 0; i < m; ++i) {
            if (std::abs(got_bh[i] - want_bh[i]) > 1e-9) {
                check.expect(false, "benjamini-hochberg mismatch at trial " + std::to_string(trial));
                return;
            }
        }
    }

    auto frozen = metrics::benjamini_hochberg({0.01, 0.02, 0.03, 0.04});
    for (double a : frozen) check.expect_near(a, 0.04, 1e-12, "BH frozen example");
    check.expect_near(metrics::mcnemar_exact(15, 5), 0.04139, 1e-5, "McNemar frozen example b=15 c=5");
}

// ---------------------------------------------------------------------------
// Criterion 2: ensemble scoring algebra
// ---------------------------------------------------------------------------

judge::Judgment synthetic_judgment(int y, double p) {
    judge::Judgment jm;
    jm.judge_name = "j";
    jm.verdict = y;
    jm.p_raw = p;
    jm.p = p;
    jm.parse_status = judge::ParseStatus::ok;
    jm.from_logprobs = true;
    return jm;
}

void criterion_ensemble(Check& check) {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 10000; ++trial) {
        int n_cands = 2 + static_cast<int>(rng() % 9);
        int k = 1 + static_cast<int>(rng() % 3);

        std::vector<gen::CandidateImplementation> cands;
        std::vector<std::vector<judge::Judgment>> per_candidate;
        std::vector<judge::EnsembleScore> scores;
        for (int i = 0; i < n_cands; ++i) {
            cands.push_back(cjtest::make_candidate("t", i, "text" + std::to_string(i), -1.0));
            std::vector<judge::Judgment> js;
            for (int kk = 0; kk < k; ++kk)
                js.push_back(synthetic_judgment(static_cast<int>(rng() % 2), uniform_double(rng)));
            per_candidate.push_back(js);
            scores.push_back(judge::ensemble_score(cands.back().candidate_id, js));
        }

        // direct product evaluation
        for (int i = 0; i < n_cands; ++i) {
            double direct = 1.0;
            for (const auto& jm : per_candidate[static_cast<std::size_t>(i)])
                direct *= jm.verdict == 1 ? jm.p : 1.0 - jm.p;
            if (scores[static_cast<std::size_t>(i)].score != direct) {
                check.expect(false, "ensemble_score differs from direct product at trial " + std::to_string(trial));
                return;
            }
        }

        std::string argmax_before = judge::select_by_judges(cands, scores).candidate_id;

        // appending a (y=1, p=1) judge changes nothing
        for (int i = 0; i < n_cands; ++i) {
            auto with_identity = per_candidate[static_cast<std::size_t>(i)];
            with_identity.push_back(synthetic_judgment(1, 1.0));
            if (judge::ensemble_score("c", with_identity).score != scores[static_cast<std::size_t>(i)].score) {
                check.expect(false, "identity judge changed a score at trial " + std::to_string(trial));
                return;
            }
        }

        // appending a constant p=0.5 judge halves every score, argmax intact
        std::vector<judge::EnsembleScore> halved;
        for (int i = 0; i < n_cands; ++i) {
            auto with_neutral = per_candidate[static_cast<std::size_t>(i)];
            with_neutral.push_back(synthetic_judgment(static_cast<int>(rng() % 2), 0.5));
            halved.push_back(judge::ensemble_score(cands[static_cast<std::size_t>(i)].candidate_id, with_neutral));
            if (halved.back().score != 0.5 * scores[static_cast<std::size_t>(i)].score) {
                check.expect(false, "neutral judge did not scale by exactly 0.5 at trial " + std::to_string(trial));
                return;
            }
        }
        if (judge::select_by_judges(cands, halved).candidate_id != argmax_before) {
            check.expect(false, "neutral judge changed the argmax at trial " + std::to_string(trial));
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: selection uplift anchored to the reported error rates
// ---------------------------------------------------------------------------

struct SyntheticPool {
    std::vector<bool> truth;
    std::vector<int> verdicts;
    std::vector<double> confidences;
};

SyntheticPool draw_pool(std::mt19937_64& rng, int n) {
    SyntheticPool pool;
    for (int i = 0; i < n; ++i) {
        bool correct = uniform_double(rng) < 0.3;
        // false-positive rate 8%, false-negative rate 30%
        int y = correct ? (uniform_double(rng) < 0.30 ? 0 : 1) : (uniform_double(rng) < 0.08 ? 1 : 0);
        bool judgment_right = (y == 1) == correct;
        double conf = judgment_right ? 0.7 + 0.3 * uniform_double(rng) : 0.5 + 0.3 * uniform_double(rng);
        pool.truth.push_back(correct);
        pool.verdicts.push_back(y);
        pool.confidences.push_back(conf);
    }
    return pool;
}

void criterion_uplift(Check& check) {
    const int pool_size = 10;

    // Monte-Carlo oracle first: direct argmax arithmetic, no library calls.
    const int oracle_pools = 200000;
    std::mt19937_64 oracle_rng(303);
    double oracle_sum = 0.0, oracle_sumsq = 0.0;
    double oracle_judge_hits = 0.0, oracle_random_hits = 0.0;
    for (int i = 0; i < oracle_pools; ++i) {
        SyntheticPool pool = draw_pool(oracle_rng, pool_size);
        int best = 0;
        double best_score = -1.0;
        for (int c = 0; c < pool_size; ++c) {
            double score = pool.verdicts[static_cast<std::size_t>(c)] == 1
                               ? pool.confidences[static_cast<std::size_t>(c)]
                               : 1.0 - pool.confidences[static_cast<std::size_t>(c)];
            if (score > best_score) {
                best_score = score;
                best = c;
            }
        }
        int random_pick = static_cast<int>(bounded_uint(oracle_rng, pool_size));
        double d = (pool.truth[static_cast<std::size_t>(best)] ? 1.0 : 0.0) -
                   (pool.truth[static_cast<std::size_t>(random_pick)] ? 1.0 : 0.0);
        oracle_judge_hits += pool.truth[static_cast<std::size_t>(best)] ? 1.0 : 0.0;
        oracle_random_hits += pool.truth[static_cast<std::size_t>(random_pick)] ? 1.0 : 0.0;
        oracle_sum += d;
        oracle_sumsq += d * d;
    }
    double oracle_uplift = oracle_sum / oracle_pools;
    double oracle_var = oracle_sumsq / oracle_pools - oracle_uplift * oracle_uplift;

    // Observed run through the real scoring and selection path.
    const int observed_pools = 10000;
    std::mt19937_64 observed_rng(404);
    double obs_sum = 0.0, obs_sumsq = 0.0, judge_hits = 0.0, random_hits = 0.0;
    for (int i = 0; i < observed_pools; ++i) {
        SyntheticPool pool = draw_pool(observed_rng, pool_size);
        std::vector<gen::CandidateImplementation> cands;
        std::vector<judge::EnsembleScore> scores;
        for (int c = 0; c < pool_size; ++c) {
            cands.push_back(cjtest::make_candidate("sim", c, "cand" + std::to_string(c), -1.0));
            scores.push_back(judge::ensemble_score(
                cands.back().candidate_id,
                {synthetic_judgment(pool.verdicts[static_cast<std::size_t>(c)],
                                    pool.confidences[static_cast<std::size_t>(c)])}));
        }
        const auto& judge_pick = judge::select_by_judges(cands, scores);
        const auto& random_pick = judge::select_random(cands, derive_seed(7, {"uplift", std::to_string(i)}));
        bool judge_correct = pool.truth[static_cast<std::size_t>(judge_pick.sample_index)];
        bool random_correct = pool.truth[static_cast<std::size_t>(random_pick.sample_index)];
        double d = (judge_correct ? 1.0 : 0.0) - (random_correct ? 1.0 : 0.0);
        judge_hits += judge_correct ? 1.0 : 0.0;
        random_hits += random_correct ? 1.0 : 0.0;
        obs_sum += d;
        obs_sumsq += d * d;
    }
    double observed_uplift = obs_sum / observed_pools;
    double observed_var = obs_sumsq / observed_pools - observed_uplift * observed_uplift;

    double sigma = std::sqrt(observed_var / observed_pools + oracle_var / oracle_pools);
    check.expect(observed_uplift > 0.0, "judge-selection uplift must be strictly positive");
    check.expect_near(observed_uplift, oracle_uplift, 3.0 * sigma, "uplift within 3 sigma of the MC oracle");
    check.expect_near(random_hits / observed_pools, 0.30, 0.02, "random-selection pass@1 near the 0.30 base rate");
    check.expect(judge_hits / observed_pools > 0.30, "judge-selection pass@1 exceeds the base rate");

    std::printf("      oracle uplift %.4f, observed %.4f, sigma %.5f, judge pass@1 %.4f, random pass@1 %.4f\n",
                oracle_uplift, observed_uplift, sigma, judge_hits / observed_pools, random_hits / observed_pools);
}

// ---------------------------------------------------------------------------
// Criterion 4: sanitizer on the planted fixture corpus
// ---------------------------------------------------------------------------

void criterion_sanitizer(Check& check) {
    cjtest::TempDir fixture_dir("acc-sanitize");
    cjtest::TempDir work("acc-sanitize-work");
    auto corpus_path = cjtest::write_sanitizer_corpus(fixture_dir.path());
    auto tasks = corpus::load_corpus(corpus_path);
    check.expect(tasks.size() == 8, "fixture corpus has 8 tasks");

    exec::SandboxConfig sandbox;
    sandbox.workdir_root = work.path();
    sandbox.parallelism = 4;
    exec::SandboxRunner runner(sandbox);

    auto result = audit::audit_corpus(tasks, runner, /*flake_trials=*/5, /*task_parallelism=*/4);

    std::map<std::string, audit::ExclusionReason> reasons(result.excluded.begin(), result.excluded.end());
    check.expect(result.excluded.size() == 4, "exactly four tasks excluded");
    check.expect(result.retained.size() == 4, "exactly four tasks retained");
    auto has_reason = [&](const char* id, audit::ExclusionReason want) {
        auto it = reasons.find(id);
        return it != reasons.end() && it->second == want;
    };
    check.expect(has_reason("bad_reference", audit::ExclusionReason::reference_fails),
                 "bad_reference excluded as reference-fails");
    check.expect(has_reason("weak_tests", audit::ExclusionReason::empty_body_passes),
                 "weak_tests excluded as empty-body-passes");
    check.expect(has_reason("weak_zero", audit::ExclusionReason::dummy_return_passes),
                 "weak_zero excluded as dummy-return-passes");
    check.expect(has_reason("flaky_state", audit::ExclusionReason::flaky), "flaky_state excluded as flaky");
    for (const char* id : {"clean_square", "clean_add", "clean_concat", "clean_even"})
        check.expect(result.is_retained(id), std::string("retained: ") + id);

    // idempotence: auditing the retained survivors excludes nothing
    std::vector<corpus::CodingTask> survivors;
    for (const auto& t : tasks) {
        if (result.is_retained(t.task_id)) survivors.push_back(t);
    }
    auto again = audit::audit_corpus(survivors, runner, 5, 4);
    check.expect(again.excluded.empty(), "audit is idempotent on the retained set");
}

// ---------------------------------------------------------------------------
// Criterion 5: end-to-end replay determinism through the CLI
// ---------------------------------------------------------------------------

void criterion_replay_determinism(Check& check) {
    cjtest::TempDir fixture_dir("acc-e2e");
    cjtest::TempDir work("acc-e2e-work");
    cjtest::TempDir out("acc-e2e-out");
    auto fixture = cjtest::write_e2e_fixture(fixture_dir.path());

    nlohmann::json config{
        {"corpus", fixture.corpus.string()},
        {"output_dir", out.path().string()},
        {"seed", 7},
        {"n_candidates", 2},
        {"repetitions", 2},
        {"strategies", {"judge-1", "log-likelihood", "single-candidate"}},
        {"calibration", fixture.calibration.string()},
        {"generator",
         {{"name", "gen"}, {"endpoint", fixture.generator_replay.string()}, {"request_logprobs", true}}},
        {"judges", nlohmann::json::array({{{"name", "j1"},
                                           {"endpoint", fixture.judge_replay.string()},
                                           {"request_logprobs", true},
                                           {"max_tokens", 4}}})},
        {"sandbox", {{"workdir_root", work.path().string()}, {"parallelism", 4}}}};
    auto config_path = out / "config.json";
    write_text_file(config_path, config.dump(2));

    auto cli = cjtest::cli_binary_path();
    std::string log1, log2;
    int code1 = cjtest::run_command(cli.string() + " evaluate -c " + config_path.string() + " --run-dir " +
                                        (out / "run1").string(),
                                    &log1);
    int code2 = cjtest::run_command(cli.string() + " evaluate -c " + config_path.string() + " --run-dir " +
                                        (out / "run2").string(),
                                    &log2);
    check.expect(code1 == 0, "first evaluate run exits 0: " + log1.substr(0, 400));
    check.expect(code2 == 0, "second evaluate run exits 0: " + log2.substr(0, 400));
    if (code1 != 0 || code2 != 0) return;

    for (const char* name : {"candidates.jsonl", "judgments.jsonl", "outcomes.jsonl", "records.jsonl", "report.json",
                             "pass1.tsv", "sweep.tsv"}) {
        std::string a = read_text_file(out / "run1" / name);
        std::string b = read_text_file(out / "run2" / name);
        check.expect(a == b, std::string("byte-identical across runs: ") + name);
        check.expect(!a.empty(), std::string("artifact not empty: ") + name);
    }

    auto report = nlohmann::json::parse(read_text_file(out / "run1" / "report.json"));
    check.expect_near(report.at("strategies").at("judge-1").at("pass_at_1").get<double>(), 1.0, 1e-12,
                      "judge-1 pass@1 equals the hand-enumerated 1.0");
    check.expect_near(report.at("strategies").at("log-likelihood").at("pass_at_1").get<double>(), 0.25, 1e-12,
                      "log-likelihood pass@1 equals the hand-enumerated 0.25");
    check.expect_near(report.at("strategies").at("single-candidate").at("pass_at_1").get<double>(), 0.5, 1e-12,
                      "single-candidate pass@1 equals the hand-enumerated 0.5");

    auto records = read_jsonl(out / "run1" / "records.jsonl");
    check.expect(records.size() == 12, "3 strategies x 2 tasks x 2 repetitions = 12 records");
}

// ---------------------------------------------------------------------------
// Criterion 6: threshold sweep consistency on a 200-judgment fixture
// ---------------------------------------------------------------------------

void criterion_sweep(Check& check) {
    std::mt19937_64 rng(606);
    std::vector<judge::LabeledJudgment> judgments;
    for (int i = 0; i < 200; ++i) {
        judge::LabeledJudgment jm;
        jm.y = rng() % 2 == 0 ? 1 : 0;
        jm.confidence = uniform_double(rng);
        jm.truth_pass = uniform_double(rng) < 0.4;
        judgments.push_back(jm);
    }

    auto matrix = metrics::confusion(judgments);
    double precision_correct = static_cast<double>(matrix.tp) / static_cast<double>(matrix.tp + matrix.fp);
    double precision_incorrect = static_cast<double>(matrix.tn) / static_cast<double>(matrix.tn + matrix.fn);

    auto grid = judge::paper_threshold_grid();
    auto sweep = judge::sweep_precision_by_threshold(judgments, grid);
    check.expect(sweep.size() == grid.size(), "one sweep point per threshold");
    check.expect(sweep.front().threshold == 0.0, "grid starts at 0");
    check.expect(sweep.front().coverage == 1.0, "full coverage at t=0");
    check.expect(sweep.front().precision_correct.has_value() && sweep.front().precision_incorrect.has_value(),
                 "both precisions defined at t=0");
    check.expect(*sweep.front().precision_correct == precision_correct,
                 "t=0 correct-class precision reproduces the confusion matrix exactly");
    check.expect(*sweep.front().precision_incorrect == precision_incorrect,
                 "t=0 incorrect-class precision reproduces the confusion matrix exactly");

    for (std::size_t i = 1; i < sweep.size(); ++i) {
        if (sweep[i].coverage > sweep[i - 1].coverage + 1e-15) {
            check.expect(false, "coverage increased between thresholds " + std::to_string(grid[i - 1]) + " and " +
                                    std::to_string(grid[i]));
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 7: execution classifier fixture with the escape probe
// ---------------------------------------------------------------------------

void criterion_execution(Check& check) {
    cjtest::TempDir fixture_dir("acc-exec");
    cjtest::TempDir work("acc-exec-work");
    auto task = cjtest::square_task(fixture_dir.path(), "acc_square", /*timeout_s=*/3.0);

    exec::SandboxConfig sandbox;
    sandbox.workdir_root = work.path();
    sandbox.parallelism = 4;
    exec::SandboxRunner runner(sandbox);

    auto pass = runner.run_candidate(task, "function square(x) {\n    return x * x;\n}", "a-pass");
    check.expect(pass.verdict == exec::Verdict::pass, "correct candidate classified pass");
    check.expect(pass.ex_feed == "this code is correct", "pass feedback is exactly 'this code is correct'");

    auto compile_error = runner.run_candidate(task, "function square(x) {\n    return x * ;\n}", "a-compile");
    check.expect(compile_error.verdict == exec::Verdict::execution_error, "syntax error classified execution_error");
    check.expect(compile_error.ex_feed.find("SyntaxError") != std::string::npos,
                 "compile feedback names the error type");

    auto runtime_error = runner.run_candidate(task, "function square(x) {\n    return null.v + x;\n}", "a-runtime");
    check.expect(runtime_error.verdict == exec::Verdict::execution_error,
                 "runtime exception classified execution_error");
    check.expect(runtime_error.ex_feed.find("TypeError") != std::string::npos,
                 "runtime feedback names the error type");

    auto intent = runner.run_candidate(task, "function square(x) {\n    return x + x;\n}", "a-intent");
    check.expect(intent.verdict == exec::Verdict::intent_error, "assertion mismatch classified intent_error");

    auto timeout = runner.run_candidate(task, "function square(x) {\n    while (true) {}\n}", "a-timeout");
    check.expect(timeout.verdict == exec::Verdict::timeout, "spinning candidate classified timeout");
    check.expect(timeout.wall_time_s >= task.timeout_s, "timeout wall time reaches the task limit");

    // escape probe: tries the network and two out-of-workdir writes
    std::string nonce = std::to_string(getpid());
    std::string tmp_sentinel = "/tmp/cj-escape-" + nonce;
    std::string outside_sentinel = (fixture_dir / ("escape-" + nonce)).string();
    std::string probe =
        "function square(x) { return x * x; }\n"
        "const _fs = require('fs');\n"
        "try { _fs.writeFileSync('" + tmp_sentinel + "', 'x'); console.log('tmpwrite:ok'); }\n"
        "catch (e) { console.log('tmpwrite:blocked'); }\n"
        "try { _fs.writeFileSync('" + outside_sentinel + "', 'x'); console.log('outsidewrite:ok'); }\n"
        "catch (e) { console.log('outsidewrite:blocked'); }\n"
        "const _net = require('net');\n"
        "const _s = _net.connect({host: '1.1.1.1', port: 80, timeout: 1500});\n"
        "_s.on('connect', () => { console.log('net:ok'); process.exit(9); });\n"
        "_s.on('error', () => { console.log('net:blocked'); process.exit(9); });\n"
        "_s.on('timeout', () => { console.log('net:blocked'); process.exit(9); });\n";

    auto escape = runner.run_candidate(task, probe, "a-escape");
    check.expect(escape.verdict == exec::Verdict::execution_error, "escape probe exit classified execution_error");
    check.expect(escape.stdout_text.find("net:blocked") != std::string::npos, "probe observed no network");
    check.expect(escape.stdout_text.find("outsidewrite:blocked") != std::string::npos,
                 "probe write outside the workdir was refused");
    check.expect(!std::filesystem::exists(tmp_sentinel), "no sentinel landed in the host /tmp");
    check.expect(!std::filesystem::exists(outside_sentinel), "no sentinel landed outside the workdir");
    std::error_code ec;
    std::filesystem::remove(tmp_sentinel, ec);
    std::filesystem::remove(outside_sentinel, ec);
}

struct Criterion {
    int id;
    const char* label;
    double time_limit_s;
    std::function<void(Check&)> run;
};

}  // namespace

int main() {
    std::vector<Criterion> criteria{
        {1, "statistics kernels match brute-force oracles (1e-9)", 30.0, criterion_statistics},
        {2, "ensemble scoring algebra (product, identity, neutral scaling)", 5.0, criterion_ensemble},
        {3, "judge-selection uplift vs Monte-Carlo oracle (3 sigma)", 60.0, criterion_uplift},
        {4, "sanitizer excludes exactly the planted fixture tasks", 60.0, criterion_sanitizer},
        {5, "cmd_evaluate replay determinism and hand-computed pass@1", 120.0, criterion_replay_determinism},
        {6, "threshold sweep consistent with the confusion matrix", 10.0, criterion_sweep},
        {7, "execution classifier fixture incl. sandbox escape probe", 60.0, criterion_execution},
    };

    int failed = 0;
    for (auto& criterion : criteria) {
        Check check;
        auto start = std::chrono::steady_clock::now();
        try {
            criterion.run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("unexpected exception: ") + e.what());
        }
        double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        check.expect(elapsed < criterion.time_limit_s,
                     "runtime " + std::to_string(elapsed) + "s exceeds " + std::to_string(criterion.time_limit_s) + "s");

        bool ok = check.failures == 0;
        failed += ok ? 0 : 1;
        std::printf("[%s] criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", criterion.id, criterion.label, elapsed);
        if (!ok) std::fputs(check.detail.str().c_str(), stdout);
    }

    if (failed > 0) {
        std::printf("%d of %zu acceptance criteria failed\n", failed, criteria.size());
        return 1;
    }
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
    return 0;
}

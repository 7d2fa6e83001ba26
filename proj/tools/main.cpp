#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "codejury/pipeline.hpp"
#include "codejury/util.hpp"

namespace {

namespace fs = std::filesystem;
using codejury::pipeline::RunConfig;

struct Overrides {
    std::optional<std::string> corpus, output_dir, run_dir, strategies, candidates, calibration, audit, split_file,
        eval_split, isolation, workdir_root, record_replays_to;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_candidates, repetitions, flake_trials, parallelism;
};

void add_common_options(CLI::App* cmd, std::string& config_path, Overrides& ov) {
    cmd->add_option("-c,--config", config_path, "run configuration file (JSON)")->required();
    cmd->add_option("--corpus", ov.corpus, "override: corpus file or directory");
    cmd->add_option("--output-dir", ov.output_dir, "override: artifact output directory");
    cmd->add_option("--run-dir", ov.run_dir, "override: exact run directory (default: timestamped)");
    cmd->add_option("--seed", ov.seed, "override: global seed");
    cmd->add_option("--n-candidates", ov.n_candidates, "override: candidates per task");
    cmd->add_option("--repetitions", ov.repetitions, "override: repetitions per task");
    cmd->add_option("--strategies", ov.strategies, "override: comma-separated strategy list");
    cmd->add_option("--candidates", ov.candidates, "override: candidates.jsonl from an earlier run");
    cmd->add_option("--calibration", ov.calibration, "override: calibration.json from an earlier run");
    cmd->add_option("--audit", ov.audit, "override: audit.jsonl from an earlier run");
    cmd->add_option("--split-file", ov.split_file, "override: split.json from an earlier run");
    cmd->add_option("--eval-split", ov.eval_split, "override: all|train|validation|test");
    cmd->add_option("--flake-trials", ov.flake_trials, "override: flakiness trials per task");
    cmd->add_option("--isolation", ov.isolation, "override: sandbox isolation (required|none)");
    cmd->add_option("--parallelism", ov.parallelism, "override: sandbox parallelism");
    cmd->add_option("--workdir-root", ov.workdir_root, "override: sandbox workdir root");
    cmd->add_option("--record-replays-to", ov.record_replays_to, "record live completions to this directory");
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        std::string item(codejury::trim(csv.substr(pos, comma - pos)));
        if (!item.empty()) out.push_back(std::move(item));
        pos = comma + 1;
    }
    return out;
}

RunConfig resolve_config(const std::string& config_path, const Overrides& ov) {
    RunConfig config = codejury::pipeline::load_run_config(config_path);
    auto cwd = fs::current_path();
    auto abs = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : cwd / p; };

    if (ov.corpus) config.corpus_path = abs(*ov.corpus);
    if (ov.output_dir) config.output_dir = abs(*ov.output_dir);
    if (ov.run_dir) config.run_dir = abs(*ov.run_dir);
    if (ov.seed) config.seed = *ov.seed;
    if (ov.n_candidates) config.n_candidates = *ov.n_candidates;
    if (ov.repetitions) config.repetitions = *ov.repetitions;
    if (ov.strategies) config.strategies = split_csv(*ov.strategies);
    if (ov.candidates) config.candidates_path = abs(*ov.candidates);
    if (ov.calibration) config.calibration_path = abs(*ov.calibration);
    if (ov.audit) config.audit_path = abs(*ov.audit);
    if (ov.split_file) config.split_path = abs(*ov.split_file);
    if (ov.eval_split) config.eval_split = *ov.eval_split;
    if (ov.flake_trials) config.flake_trials = *ov.flake_trials;
    if (ov.parallelism) config.sandbox.parallelism = *ov.parallelism;
    if (ov.workdir_root) config.sandbox.workdir_root = abs(*ov.workdir_root);
    if (ov.record_replays_to) config.record_replays_to = abs(*ov.record_replays_to);
    if (ov.isolation) {
        if (*ov.isolation == "required")
            config.sandbox.isolation = codejury::exec::Isolation::required;
        else if (*ov.isolation == "none")
            config.sandbox.isolation = codejury::exec::Isolation::none;
        else
            throw codejury::UsageError("--isolation must be 'required' or 'none'");
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"codejury: best-of-N code generation with model judges"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    std::string report_dir;

    auto* sanitize = app.add_subcommand("sanitize", "audit the corpus and write the retained split");
    auto* calibrate = app.add_subcommand("calibrate", "fit per-judge confidence profiles on the validation split");
    auto* generate = app.add_subcommand("generate", "sample candidate implementations per task");
    auto* judge = app.add_subcommand("judge", "judge previously generated candidates");
    auto* evaluate = app.add_subcommand("evaluate", "run the full selection grid and report statistics");
    auto* exporter = app.add_subcommand("export", "emit the fine-tune quadruple corpus");
    auto* report = app.add_subcommand("report", "rebuild report files from an existing run directory");

    for (CLI::App* cmd : {sanitize, calibrate, generate, judge, evaluate, exporter, report})
        add_common_options(cmd, config_path, ov);
    report->add_option("run_dir", report_dir, "run directory holding records.jsonl")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig config = resolve_config(config_path, ov);
        if (sanitize->parsed()) codejury::pipeline::cmd_sanitize(config);
        if (calibrate->parsed()) codejury::pipeline::cmd_calibrate(config);
        if (generate->parsed()) codejury::pipeline::cmd_generate(config);
        if (judge->parsed()) codejury::pipeline::cmd_judge(config);
        if (evaluate->parsed()) codejury::pipeline::cmd_evaluate(config);
        if (exporter->parsed()) codejury::pipeline::cmd_export(config);
        if (report->parsed()) codejury::pipeline::cmd_report(config, fs::absolute(report_dir));
        return 0;
    } catch (const codejury::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const codejury::IncompleteError& e) {
        std::cerr << "error: incomplete results: " << e.what() << "\n";
        return 3;
    } catch (const codejury::InfraError& e) {
        std::cerr << "error: infrastructure: " << e.what() << "\n";
        return 2;
    } catch (const codejury::backends::BackendError& e) {
        std::cerr << "error: backend: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

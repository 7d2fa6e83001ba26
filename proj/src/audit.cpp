#include "codejury/audit.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include "codejury/util.hpp"

namespace codejury::audit {

std::string_view exclusion_reason_name(ExclusionReason r) {
    switch (r) {
        case ExclusionReason::reference_fails: return "reference-fails";
        case ExclusionReason::empty_body_passes: return "empty-body-passes";
        case ExclusionReason::dummy_return_passes: return "dummy-return-passes";
        case ExclusionReason::flaky: return "flaky";
    }
    return "unknown";
}

namespace {

ExclusionReason exclusion_reason_from_name(std::string_view name) {
    if (name == "reference-fails") return ExclusionReason::reference_fails;
    if (name == "empty-body-passes") return ExclusionReason::empty_body_passes;
    if (name == "dummy-return-passes") return ExclusionReason::dummy_return_passes;
    if (name == "flaky") return ExclusionReason::flaky;
    throw std::runtime_error("unknown exclusion reason: " + std::string(name));
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_python_family(const std::string& language_tag) {
    std::string tag = lower(language_tag);
    return tag == "python" || tag == "py";
}

}  // namespace

bool CorpusAudit::is_retained(const std::string& task_id) const {
    return std::find(retained.begin(), retained.end(), task_id) != retained.end();
}

ReferenceCheck check_reference(const corpus::CodingTask& task, exec::Runner& runner) {
    if (!task.reference_solution) return ReferenceCheck::not_applicable;
    auto outcome = runner.run_candidate(task, *task.reference_solution, task.task_id + "/reference");
    return outcome.passed() ? ReferenceCheck::pass : ReferenceCheck::fail;
}

std::string synthesize_empty_body(const corpus::CodingTask& task) {
    std::string sig(rtrim(task.signature));
    if (is_python_family(task.language_tag)) {
        if (sig.empty() || sig.back() != ':') sig += ':';
        return sig + "\n    pass\n";
    }
    return sig + " {\n}\n";
}

std::optional<std::string> synthesize_dummy_return(const corpus::CodingTask& task) {
    if (!task.return_type) return std::nullopt;
    std::string type = lower(std::string(trim(*task.return_type)));
    if (type.empty() || type == "void" || type == "none") return std::nullopt;

    const bool python = is_python_family(task.language_tag);
    std::string value;
    if (type == "int" || type == "integer" || type == "long" || type == "short" || type == "byte") {
        value = "0";
    } else if (type == "boolean" || type == "bool") {
        value = python ? "False" : "false";
    } else if (type == "float" || type == "double") {
        value = "0.0";
    } else if (type == "string" || type == "str") {
        value = "\"\"";
    } else if (type == "char" || type == "character") {
        value = python ? "\"\"" : "'\\0'";
    } else if (type == "object" || type == "reference" || std::isupper(static_cast<unsigned char>((*task.return_type)[0])) ||
               type.find('[') != std::string::npos || type.find('<') != std::string::npos) {
        // reference types, arrays, generics
        value = python ? "None" : "null";
    } else {
        return std::nullopt;  // unknown type, recorded as not-applicable
    }

    std::string sig(rtrim(task.signature));
    if (python) {
        if (sig.empty() || sig.back() != ':') sig += ':';
        return sig + "\n    return " + value + "\n";
    }
    return sig + " {\n    return " + value + ";\n}\n";
}

bool check_empty_body_exploit(const corpus::CodingTask& task, exec::Runner& runner) {
    std::string probe = synthesize_empty_body(task);
    auto outcome = runner.run_candidate(task, probe, task.task_id + "/empty-body");
    return outcome.passed();
}

std::optional<bool> check_dummy_return_exploit(const corpus::CodingTask& task, exec::Runner& runner) {
    auto probe = synthesize_dummy_return(task);
    if (!probe) return std::nullopt;
    auto outcome = runner.run_candidate(task, *probe, task.task_id + "/dummy-return");
    return outcome.passed();
}

bool check_flakiness(const corpus::CodingTask& task, const std::string& probe_text, exec::Runner& runner,
                     int trials) {
    if (trials < 2) throw UsageError("check_flakiness: trials must be >= 2");
    auto outcomes = runner.run_trials(task, probe_text, task.task_id + "/flake-probe", trials);
    bool first = outcomes.front().passed();
    for (const auto& o : outcomes) {
        if (o.passed() != first) return true;
    }
    return false;
}

namespace {

struct TaskResult {
    std::optional<ExclusionReason> exclusion;
    int flake_trials = 0;
    std::optional<std::string> note;
};

TaskResult inspect_task(const corpus::CodingTask& task, exec::Runner& runner, int flake_trials) {
    TaskResult result;

    switch (check_reference(task, runner)) {
        case ReferenceCheck::fail:
            result.exclusion = ExclusionReason::reference_fails;
            return result;
        case ReferenceCheck::pass:
        case ReferenceCheck::not_applicable:
            break;
    }

    if (check_empty_body_exploit(task, runner)) {
        result.exclusion = ExclusionReason::empty_body_passes;
        return result;
    }

    auto dummy = check_dummy_return_exploit(task, runner);
    if (!dummy.has_value() && task.return_type) {
        result.note = "dummy-return check not applicable: unknown return type '" + *task.return_type + "'";
    }
    if (dummy.value_or(false)) {
        result.exclusion = ExclusionReason::dummy_return_passes;
        return result;
    }

    std::string probe = task.reference_solution ? *task.reference_solution : synthesize_empty_body(task);
    result.flake_trials = flake_trials;
    if (check_flakiness(task, probe, runner, flake_trials)) {
        result.exclusion = ExclusionReason::flaky;
        return result;
    }
    return result;
}

}  // namespace

CorpusAudit audit_corpus(const std::vector<corpus::CodingTask>& tasks, exec::Runner& runner, int flake_trials,
                         int task_parallelism) {
    std::vector<TaskResult> results(tasks.size());
    std::exception_ptr first_error;
    std::mutex error_mutex;

    int workers = std::max(1, std::min<int>(task_parallelism, static_cast<int>(tasks.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) results[i] = inspect_task(tasks[i], runner, flake_trials);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) return;
                    try {
                        results[i] = inspect_task(tasks[i], runner, flake_trials);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    // Merge in task order: the input is already sorted by task_id from
    // load_corpus, so the report is deterministic regardless of scheduling.
    CorpusAudit audit;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& task = tasks[i];
        const auto& r = results[i];
        if (r.exclusion) {
            audit.excluded.emplace_back(task.task_id, *r.exclusion);
        } else {
            audit.retained.push_back(task.task_id);
        }
        audit.flake_trials[task.task_id] = r.flake_trials;
        if (r.note) audit.notes.emplace_back(task.task_id, *r.note);
    }
    return audit;
}

std::vector<nlohmann::json> audit_report_rows(const CorpusAudit& audit) {
    std::vector<nlohmann::json> rows;
    std::map<std::string, ExclusionReason> excluded_by_id(audit.excluded.begin(), audit.excluded.end());

    std::vector<std::string> all_ids = audit.retained;
    for (const auto& [id, reason] : audit.excluded) all_ids.push_back(id);
    std::sort(all_ids.begin(), all_ids.end());

    for (const auto& id : all_ids) {
        nlohmann::json row{{"task_id", id}};
        auto it = excluded_by_id.find(id);
        if (it != excluded_by_id.end()) {
            row["verdict"] = "excluded";
            row["reason"] = std::string(exclusion_reason_name(it->second));
        } else {
            row["verdict"] = "retained";
            row["reason"] = nullptr;
        }
        auto trials = audit.flake_trials.find(id);
        row["flake_trials"] = trials == audit.flake_trials.end() ? 0 : trials->second;
        rows.push_back(std::move(row));
    }
    return rows;
}

CorpusAudit audit_from_report_rows(const std::vector<nlohmann::json>& rows) {
    CorpusAudit audit;
    for (const auto& row : rows) {
        std::string id = row.at("task_id").get<std::string>();
        std::string verdict = row.at("verdict").get<std::string>();
        if (verdict == "retained") {
            audit.retained.push_back(id);
        } else if (verdict == "excluded") {
            audit.excluded.emplace_back(id, exclusion_reason_from_name(row.at("reason").get<std::string>()));
        } else {
            throw std::runtime_error("audit report: unknown verdict '" + verdict + "' for task " + id);
        }
        audit.flake_trials[id] = row.value("flake_trials", 0);
    }
    return audit;
}

}  // namespace codejury::audit

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "codejury/corpus.hpp"
#include "codejury/execution.hpp"

namespace codejury::audit {

enum class ExclusionReason { reference_fails, empty_body_passes, dummy_return_passes, flaky };

std::string_view exclusion_reason_name(ExclusionReason r);

struct CorpusAudit {
    std::vector<std::pair<std::string, ExclusionReason>> excluded;  // (task_id, reason)
    std::vector<std::string> retained;
    std::map<std::string, int> flake_trials;  // sandbox trials issued per task
    std::vector<std::pair<std::string, std::string>> notes;  // (task_id, note)

    bool is_retained(const std::string& task_id) const;
};

enum class ReferenceCheck { pass, fail, not_applicable };

// Runs the task's reference solution against its own tests. Tasks without
// a reference are not applicable (MultiPL-E carries none).
ReferenceCheck check_reference(const corpus::CodingTask& task, exec::Runner& runner);

// True when a candidate consisting of the signature plus an empty body
// passes the tests. A body that cannot even compile counts as
// not-exploited here; the dummy-return check covers typed returns.
bool check_empty_body_exploit(const corpus::CodingTask& task, exec::Runner& runner);

// True when a body of exactly one default return statement passes the
// tests. Empty optional when the return type is missing, void, or not in
// the default-value table (recorded as an audit note).
std::optional<bool> check_dummy_return_exploit(const corpus::CodingTask& task, exec::Runner& runner);

// True when `trials` executions of the identical probe yield differing
// pass/fail outcomes. Consistent failures are not flaky.
bool check_flakiness(const corpus::CodingTask& task, const std::string& probe_text, exec::Runner& runner, int trials);

// Full quality inspection, checks applied in order: reference, empty
// body, dummy return, flakiness. A task excluded by an earlier check is
// not re-tested by later ones. Tasks may be inspected concurrently; the
// result is merged by task_id and deterministic.
CorpusAudit audit_corpus(const std::vector<corpus::CodingTask>& tasks, exec::Runner& runner, int flake_trials = 5,
                         int task_parallelism = 1);

// Candidate synthesis used by the exploit checks (brace-family and python
// function bodies).
std::string synthesize_empty_body(const corpus::CodingTask& task);
std::optional<std::string> synthesize_dummy_return(const corpus::CodingTask& task);

// Audit report rows as line-delimited records (task_id, verdict, reason).
std::vector<nlohmann::json> audit_report_rows(const CorpusAudit& audit);
CorpusAudit audit_from_report_rows(const std::vector<nlohmann::json>& rows);

}  // namespace codejury::audit

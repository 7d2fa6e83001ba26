#include "codejury/generation.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

#include "codejury/util.hpp"

namespace codejury::gen {

std::string_view clean_status_name(CleanStatus s) {
    switch (s) {
        case CleanStatus::pending: return "pending";
        case CleanStatus::accepted: return "accepted";
        case CleanStatus::no_complete_function: return "no-complete-function";
        case CleanStatus::non_ascii: return "non-ascii";
        case CleanStatus::empty_or_commented_body: return "empty-or-commented-body";
        case CleanStatus::duplicate: return "duplicate";
    }
    return "pending";
}

CleanStatus clean_status_from_name(std::string_view name) {
    if (name == "pending") return CleanStatus::pending;
    if (name == "accepted") return CleanStatus::accepted;
    if (name == "no-complete-function") return CleanStatus::no_complete_function;
    if (name == "non-ascii") return CleanStatus::non_ascii;
    if (name == "empty-or-commented-body") return CleanStatus::empty_or_commented_body;
    if (name == "duplicate") return CleanStatus::duplicate;
    throw std::runtime_error("unknown clean status: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Function extraction
// ---------------------------------------------------------------------------

namespace {

// Scanner over brace-family source that skips string literals, character
// literals, template literals and comments while tracking brace depth.
class CodeScanner {
  public:
    explicit CodeScanner(std::string_view text) : text_(text) {}

    // Absolute index of the brace matching the '{' at `open`, npos if the
    // text ends first.
    std::size_t match_brace(std::size_t open) const {
        int depth = 0;
        std::size_t i = open;
        while (i < text_.size()) {
            i = next_code_char(i);
            if (i >= text_.size()) break;
            char c = text_[i];
            if (c == '{') ++depth;
            if (c == '}') {
                --depth;
                if (depth == 0) return i;
            }
            ++i;
        }
        return std::string_view::npos;
    }

    // First occurrence of `c` at or after `from` outside strings/comments.
    std::size_t find_code_char(std::size_t from, char c) const {
        std::size_t i = from;
        while (i < text_.size()) {
            i = next_code_char(i);
            if (i >= text_.size()) break;
            if (text_[i] == c) return i;
            ++i;
        }
        return std::string_view::npos;
    }

    // True when a scan starting in code state at `begin` sees at least one
    // brace and closes back to depth zero exactly within [begin, end).
    // Guards spans whose line prefix would flip the literal state.
    bool span_balanced(std::size_t begin, std::size_t end) const {
        int depth = 0;
        bool seen = false;
        std::size_t i = begin;
        while (i < end) {
            i = next_code_char(i);
            if (i >= end) break;
            if (text_[i] == '{') {
                ++depth;
                seen = true;
            }
            if (text_[i] == '}') {
                --depth;
                if (depth < 0) return false;
            }
            ++i;
        }
        return seen && depth == 0;
    }

  private:
    // Skips forward from `i` past any string/char/template literal or
    // comment starting there, returning the first index that is code.
    std::size_t next_code_char(std::size_t i) const {
        while (i < text_.size()) {
            char c = text_[i];
            if (c == '"' || c == '\'' || c == '`') {
                i = skip_literal(i, c);
            } else if (c == '/' && i + 1 < text_.size() && text_[i + 1] == '/') {
                i = skip_until(i, '\n');
            } else if (c == '/' && i + 1 < text_.size() && text_[i + 1] == '*') {
                std::size_t close = text_.find("*/", i + 2);
                i = close == std::string_view::npos ? text_.size() : close + 2;
            } else {
                return i;
            }
        }
        return i;
    }

    std::size_t skip_literal(std::size_t i, char quote) const {
        ++i;
        while (i < text_.size()) {
            if (text_[i] == '\\') {
                i += 2;
                continue;
            }
            if (text_[i] == quote) return i + 1;
            if (quote != '`' && text_[i] == '\n') return i;  // unterminated line literal
            ++i;
        }
        return i;
    }

    std::size_t skip_until(std::size_t i, char c) const {
        std::size_t hit = text_.find(c, i);
        return hit == std::string_view::npos ? text_.size() : hit;
    }

    std::string_view text_;
};

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// Function name from a signature: the identifier immediately before the
// first '('.
std::string function_name_of(std::string_view signature) {
    std::size_t paren = signature.find('(');
    if (paren == std::string_view::npos) return {};
    std::size_t end = paren;
    while (end > 0 && std::isspace(static_cast<unsigned char>(signature[end - 1]))) --end;
    std::size_t begin = end;
    while (begin > 0 && is_ident_char(signature[begin - 1])) --begin;
    return std::string(signature.substr(begin, end - begin));
}

struct Region {
    std::size_t offset;  // into the raw text
    std::string_view text;
};

// Contents of fenced code blocks first, then the whole text as a fallback
// for completions whose function sits outside the fences.
std::vector<Region> candidate_regions(std::string_view raw) {
    std::vector<Region> regions;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = raw.find("```", pos);
        if (open == std::string_view::npos) break;
        std::size_t content = raw.find('\n', open + 3);
        if (content == std::string_view::npos) break;
        ++content;
        std::size_t close = raw.find("```", content);
        if (close == std::string_view::npos) {
            regions.push_back({content, raw.substr(content)});
            break;
        }
        regions.push_back({content, raw.substr(content, close - content)});
        pos = close + 3;
    }
    regions.push_back({0, raw});
    return regions;
}

std::size_t line_start_before(std::string_view text, std::size_t pos) {
    std::size_t nl = text.rfind('\n', pos == 0 ? 0 : pos - 1);
    return nl == std::string_view::npos ? 0 : nl + 1;
}

// Locates a function in one region: returns {header_start, close_brace+1}
// relative to the region, or nullopt.
std::optional<FunctionSpan> find_in_region(std::string_view text, const std::string& name) {
    CodeScanner scanner(text);

    // Pass 1: occurrences of the expected function name followed by '('.
    if (!name.empty()) {
        std::size_t from = 0;
        while (true) {
            std::size_t hit = text.find(name, from);
            if (hit == std::string_view::npos) break;
            from = hit + 1;
            bool standalone = (hit == 0 || !is_ident_char(text[hit - 1]));
            std::size_t after = hit + name.size();
            while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
            if (!standalone || after >= text.size() || text[after] != '(') continue;

            // A ';' before the '{' means this was a declaration or a call.
            std::size_t brace = scanner.find_code_char(after, '{');
            std::size_t semi = scanner.find_code_char(after, ';');
            if (brace == std::string_view::npos) continue;
            if (semi != std::string_view::npos && semi < brace) continue;
            std::size_t close = scanner.match_brace(brace);
            if (close == std::string_view::npos) return std::nullopt;  // unbalanced
            for (std::size_t start : {line_start_before(text, hit), hit}) {
                if (scanner.span_balanced(start, close + 1)) return FunctionSpan{start, close + 1};
            }
        }
    }

    // Pass 2: first plausible header, a "(...)" group followed by '{'.
    std::size_t paren = scanner.find_code_char(0, '(');
    while (paren != std::string_view::npos) {
        // nesting-aware paren match via the scanner
        std::size_t close_paren = std::string_view::npos;
        int depth = 0;
        std::size_t i = paren;
        while (i < text.size()) {
            std::size_t open_next = scanner.find_code_char(i, '(');
            std::size_t close_next = scanner.find_code_char(i, ')');
            if (close_next == std::string_view::npos) return std::nullopt;
            if (open_next != std::string_view::npos && open_next < close_next) {
                ++depth;
                i = open_next + 1;
            } else {
                --depth;
                i = close_next + 1;
                if (depth == 0) {
                    close_paren = close_next;
                    break;
                }
            }
        }
        if (close_paren == std::string_view::npos) return std::nullopt;

        std::size_t brace = scanner.find_code_char(close_paren, '{');
        std::size_t semi = scanner.find_code_char(close_paren, ';');
        if (brace != std::string_view::npos && (semi == std::string_view::npos || brace < semi)) {
            std::size_t close = scanner.match_brace(brace);
            if (close == std::string_view::npos) return std::nullopt;
            for (std::size_t start : {line_start_before(text, paren), paren}) {
                if (scanner.span_balanced(start, close + 1)) return FunctionSpan{start, close + 1};
            }
        }
        paren = scanner.find_code_char(close_paren + 1, '(');
    }
    return std::nullopt;
}

}  // namespace

std::optional<FunctionSpan> extract_function(std::string_view raw_text, std::string_view signature) {
    if (trim(raw_text).empty()) return std::nullopt;
    std::string name = function_name_of(signature);
    for (const Region& region : candidate_regions(raw_text)) {
        if (auto span = find_in_region(region.text, name)) {
            return FunctionSpan{region.offset + span->begin, region.offset + span->end};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

std::string strip_comments(std::string_view code) {
    std::string out;
    out.reserve(code.size());
    std::size_t i = 0;
    while (i < code.size()) {
        char c = code[i];
        if (c == '/' && i + 1 < code.size() && code[i + 1] == '/') {
            std::size_t nl = code.find('\n', i);
            i = nl == std::string_view::npos ? code.size() : nl;  // keep the newline
        } else if (c == '/' && i + 1 < code.size() && code[i + 1] == '*') {
            std::size_t close = code.find("*/", i + 2);
            i = close == std::string_view::npos ? code.size() : close + 2;
        } else if (c == '"' || c == '\'' || c == '`') {
            std::size_t j = i + 1;
            while (j < code.size()) {
                if (code[j] == '\\') {
                    j += 2;
                    continue;
                }
                if (code[j] == c) {
                    ++j;
                    break;
                }
                ++j;
            }
            out.append(code.substr(i, j - i));
            i = j;
        } else {
            out.push_back(c);
            ++i;
        }
    }
    return out;
}

namespace {

// Body between the outermost braces of a function text; empty when there
// are no braces.
std::string_view body_of(std::string_view function_text) {
    CodeScanner scanner(function_text);
    std::size_t open = scanner.find_code_char(0, '{');
    if (open == std::string_view::npos) return {};
    std::size_t close = scanner.match_brace(open);
    if (close == std::string_view::npos) return {};
    return function_text.substr(open + 1, close - open - 1);
}

CleanStatus evaluate_candidate(const CandidateImplementation& cand) {
    if (cand.text.empty()) return CleanStatus::no_complete_function;
    if (!is_ascii(cand.text)) return CleanStatus::non_ascii;
    std::string effective = strip_comments(body_of(cand.text));
    if (trim(effective).empty()) return CleanStatus::empty_or_commented_body;
    return CleanStatus::accepted;
}

}  // namespace

void clean_candidates(std::vector<CandidateImplementation>& candidates) {
    // Statuses are recomputed from the texts so the pass is idempotent.
    for (auto& cand : candidates) cand.clean_status = evaluate_candidate(cand);

    // Exact-text dedup within each task, trailing whitespace ignored,
    // keeping the lowest sample_index.
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return candidates[a].sample_index < candidates[b].sample_index;
    });
    std::set<std::pair<std::string, std::string>> seen;  // (task_id, trimmed text)
    for (std::size_t i : order) {
        auto& cand = candidates[i];
        if (cand.clean_status != CleanStatus::accepted) continue;
        if (!seen.emplace(cand.task_id, std::string(rtrim(cand.text))).second)
            cand.clean_status = CleanStatus::duplicate;
    }
}

std::optional<double> mean_logprob(const backends::CompletionResult& result, FunctionSpan span) {
    if (!result.token_logprobs || result.token_logprobs->empty()) return std::nullopt;
    double sum = 0.0;
    long count = 0;
    std::size_t offset = 0;
    for (const auto& tl : *result.token_logprobs) {
        std::size_t begin = offset;
        std::size_t end = offset + tl.token.size();
        offset = end;
        if (begin < span.end && end > span.begin) {
            sum += tl.logprob;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

std::vector<CandidateImplementation> generate_candidates(const corpus::CodingTask& task, backends::Backend& backend,
                                                         int n, int start_index) {
    if (n < 1) throw UsageError("generate_candidates: n must be >= 1");
    auto results = backend.complete(task.prompt, n, start_index);

    std::vector<CandidateImplementation> candidates;
    candidates.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& result = results[static_cast<std::size_t>(i)];
        CandidateImplementation cand;
        cand.task_id = task.task_id;
        cand.source_model = backend.name();
        cand.candidate_id = task.task_id + "::" + backend.name() + "::s" + std::to_string(start_index + i);
        cand.raw_text = result.text;
        cand.sample_index = i;
        cand.gen_latency_s = result.latency_s;
        if (auto span = extract_function(result.text, task.signature)) {
            cand.text = result.text.substr(span->begin, span->end - span->begin);
            cand.mean_token_logprob = mean_logprob(result, *span);
        } else {
            cand.clean_status = CleanStatus::no_complete_function;
        }
        candidates.push_back(std::move(cand));
    }
    return candidates;
}

void to_json(nlohmann::json& j, const CandidateImplementation& c) {
    j = nlohmann::json{{"candidate_id", c.candidate_id},
                       {"task_id", c.task_id},
                       {"source_model", c.source_model},
                       {"text", c.text},
                       {"raw_text", c.raw_text},
                       {"clean_status", std::string(clean_status_name(c.clean_status))},
                       {"sample_index", c.sample_index},
                       {"gen_latency_s", c.gen_latency_s}};
    j["mean_token_logprob"] = c.mean_token_logprob ? nlohmann::json(*c.mean_token_logprob) : nlohmann::json();
}

void from_json(const nlohmann::json& j, CandidateImplementation& c) {
    c = CandidateImplementation{};
    c.candidate_id = j.at("candidate_id").get<std::string>();
    c.task_id = j.at("task_id").get<std::string>();
    c.source_model = j.value("source_model", std::string());
    c.text = j.at("text").get<std::string>();
    c.raw_text = j.value("raw_text", c.text);
    c.clean_status = clean_status_from_name(j.at("clean_status").get<std::string>());
    c.sample_index = j.at("sample_index").get<int>();
    c.gen_latency_s = j.value("gen_latency_s", 0.0);
    if (j.contains("mean_token_logprob") && !j.at("mean_token_logprob").is_null())
        c.mean_token_logprob = j.at("mean_token_logprob").get<double>();
}

}  // namespace codejury::gen

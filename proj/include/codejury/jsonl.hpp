#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

namespace codejury {

// Line-delimited JSON: one record per line, UTF-8, '\n' terminated.
// All persisted artifacts (corpus, candidates, judgments, outcomes,
// evaluation records, replay caches) use this shape.

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record);

}  // namespace codejury

#include "codejury/corpus.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "codejury/jsonl.hpp"
#include "codejury/util.hpp"

namespace codejury::corpus {

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

CodingTask parse_task(const nlohmann::json& j, const std::string& origin) {
    CodingTask task;
    auto require_string = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j.at(key).is_string()) {
            std::string id = j.value("task_id", std::string("<unknown>"));
            throw std::runtime_error(origin + ": task '" + id + "': missing or non-string field '" + key + "'");
        }
        return j.at(key).get<std::string>();
    };
    task.task_id = require_string("task_id");
    task.language_tag = require_string("language_tag");
    task.description = require_string("description");
    task.signature = require_string("signature");
    task.prompt = require_string("prompt");
    task.test_command = require_string("test_command");
    if (j.contains("reference_solution") && !j.at("reference_solution").is_null())
        task.reference_solution = j.at("reference_solution").get<std::string>();
    if (j.contains("return_type") && !j.at("return_type").is_null())
        task.return_type = j.at("return_type").get<std::string>();
    task.timeout_s = j.value("timeout_s", 60.0);
    validate_task(task);
    return task;
}

}  // namespace

void validate_task(const CodingTask& task) {
    if (task.task_id.empty()) throw std::runtime_error("task with empty task_id");
    if (trim(task.prompt).empty())
        throw std::runtime_error("task '" + task.task_id + "': field 'prompt' is empty");
    std::size_t placeholders = count_occurrences(task.test_command, kCandidatePlaceholder);
    if (placeholders != 1)
        throw std::runtime_error("task '" + task.task_id + "': field 'test_command' must contain exactly one " +
                                 std::string(kCandidatePlaceholder) + " placeholder, found " +
                                 std::to_string(placeholders));
    if (task.timeout_s <= 0)
        throw std::runtime_error("task '" + task.task_id + "': field 'timeout_s' must be positive");
}

std::vector<CodingTask> load_corpus(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw UsageError("corpus path does not exist: " + path.string());

    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw UsageError("corpus directory contains no .jsonl files: " + path.string());
    } else {
        files.push_back(path);
    }

    std::vector<CodingTask> tasks;
    std::set<std::string> seen;
    for (const auto& file : files) {
        for (const auto& record : read_jsonl(file)) {
            CodingTask task = parse_task(record, file.string());
            if (!seen.insert(task.task_id).second)
                throw std::runtime_error(file.string() + ": duplicate task_id '" + task.task_id + "'");
            tasks.push_back(std::move(task));
        }
    }
    std::sort(tasks.begin(), tasks.end(),
              [](const CodingTask& a, const CodingTask& b) { return a.task_id < b.task_id; });
    return tasks;
}

namespace {

std::string stratum_of(const std::string& task_id) {
    std::size_t cut = task_id.find_first_of("_/");
    return cut == std::string::npos ? task_id : task_id.substr(0, cut);
}

struct SplitSizes {
    std::size_t train, validation, test;
};

SplitSizes allocate_sizes(std::size_t total, const SplitRatio& ratio) {
    double weight_sum = ratio.train + ratio.validation + ratio.test;
    auto floor_share = [&](double w) {
        return static_cast<std::size_t>(static_cast<double>(total) * w / weight_sum);
    };
    SplitSizes sizes{floor_share(ratio.train), floor_share(ratio.validation), floor_share(ratio.test)};
    // remainder goes to train
    sizes.train = total - sizes.validation - sizes.test;
    return sizes;
}

void split_group(std::vector<std::string>& ids, const SplitRatio& ratio, std::mt19937_64& rng, Split& out) {
    std::sort(ids.begin(), ids.end());
    // Fisher-Yates with our own bounded draw so the permutation is identical
    // on every platform for a fixed seed.
    for (std::size_t i = ids.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(bounded_uint(rng, i));
        std::swap(ids[i - 1], ids[j]);
    }
    SplitSizes sizes = allocate_sizes(ids.size(), ratio);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i < sizes.train)
            out.train.push_back(ids[i]);
        else if (i < sizes.train + sizes.validation)
            out.validation.push_back(ids[i]);
        else
            out.test.push_back(ids[i]);
    }
}

}  // namespace

Split split_tasks(std::vector<std::string> retained_ids, const SplitRatio& ratio, std::uint64_t seed,
                  bool stratified) {
    if (ratio.train <= 0 || ratio.validation <= 0 || ratio.test <= 0)
        throw UsageError("split ratio weights must be positive");
    if (retained_ids.size() < 3)
        throw UsageError("split requires at least 3 retained tasks, got " + std::to_string(retained_ids.size()));

    Split split;
    split.seed = seed;
    std::mt19937_64 rng(seed);
    if (stratified) {
        std::map<std::string, std::vector<std::string>> strata;
        for (auto& id : retained_ids) strata[stratum_of(id)].push_back(std::move(id));
        for (auto& [key, ids] : strata) {
            std::mt19937_64 stratum_rng(derive_seed(seed, {"stratum", key}));
            split_group(ids, ratio, stratum_rng, split);
        }
    } else {
        split_group(retained_ids, ratio, rng, split);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void to_json(nlohmann::json& j, const CodingTask& task) {
    j = nlohmann::json{{"task_id", task.task_id},
                       {"language_tag", task.language_tag},
                       {"description", task.description},
                       {"signature", task.signature},
                       {"prompt", task.prompt},
                       {"test_command", task.test_command},
                       {"timeout_s", task.timeout_s}};
    j["reference_solution"] = task.reference_solution ? nlohmann::json(*task.reference_solution) : nlohmann::json();
    j["return_type"] = task.return_type ? nlohmann::json(*task.return_type) : nlohmann::json();
}

void from_json(const nlohmann::json& j, CodingTask& task) {
    task = CodingTask{};
    task.task_id = j.at("task_id").get<std::string>();
    task.language_tag = j.at("language_tag").get<std::string>();
    task.description = j.at("description").get<std::string>();
    task.signature = j.at("signature").get<std::string>();
    task.prompt = j.at("prompt").get<std::string>();
    task.test_command = j.at("test_command").get<std::string>();
    if (j.contains("reference_solution") && !j.at("reference_solution").is_null())
        task.reference_solution = j.at("reference_solution").get<std::string>();
    if (j.contains("return_type") && !j.at("return_type").is_null())
        task.return_type = j.at("return_type").get<std::string>();
    task.timeout_s = j.value("timeout_s", 60.0);
}

void to_json(nlohmann::json& j, const Split& split) {
    j = nlohmann::json{
        {"seed", split.seed}, {"train", split.train}, {"validation", split.validation}, {"test", split.test}};
}

void from_json(const nlohmann::json& j, Split& split) {
    split.seed = j.at("seed").get<std::uint64_t>();
    split.train = j.at("train").get<std::vector<std::string>>();
    split.validation = j.at("validation").get<std::vector<std::string>>();
    split.test = j.at("test").get<std::vector<std::string>>();
}

}  // namespace codejury::corpus

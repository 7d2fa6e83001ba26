#include "codejury/jsonl.hpp"

#include <fstream>

#include "codejury/util.hpp"

namespace codejury {

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InfraError("cannot open jsonl file: " + path.string());
    std::vector<nlohmann::json> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": invalid JSON record: " + e.what());
        }
    }
    return records;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InfraError("cannot open jsonl file for writing: " + path.string());
    for (const auto& rec : records) {
        out << rec.dump() << '\n';
    }
    if (!out) throw InfraError("write failed: " + path.string());
}

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw InfraError("cannot open jsonl file for append: " + path.string());
    out << record.dump() << '\n';
    if (!out) throw InfraError("append failed: " + path.string());
}

}  // namespace codejury

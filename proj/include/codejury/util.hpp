#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace codejury {

// Error taxonomy mirrored by the CLI exit codes: usage -> 1,
// infrastructure -> 2, incomplete results -> 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfraError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IncompleteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a, 64 bit. Used for replay keys and seed derivation; collision
// resistance at corpus scale is sufficient and the value must stay stable
// across platforms and runs.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

bool is_ascii(std::string_view text);

std::string_view ltrim(std::string_view s);
std::string_view rtrim(std::string_view s);
std::string_view trim(std::string_view s);

// First whitespace-delimited token, empty if none.
std::string_view first_token(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

// Replaces every occurrence of `needle` in `text`. Plain concatenation, no
// escaping: substituted values appear verbatim.
std::string replace_all(std::string text, std::string_view needle, std::string_view replacement);

// Sub-seed derivation: mixes the global seed with string parts so that two
// distinct part lists virtually never collide and adding an unrelated part
// never perturbs other derived seeds.
std::uint64_t derive_seed(std::uint64_t global_seed, std::initializer_list<std::string_view> parts);

// Uniform double in [0, 1) from the top 53 bits. Stable across platforms,
// unlike std::uniform_real_distribution.
double uniform_double(std::mt19937_64& rng);

// Uniform integer in [0, n) via rejection sampling (no modulo bias).
std::uint64_t bounded_uint(std::mt19937_64& rng, std::uint64_t n);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace codejury

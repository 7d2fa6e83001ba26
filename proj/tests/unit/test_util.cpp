#include <doctest.h>

#include <random>
#include <set>

#include "codejury/util.hpp"

using namespace codejury;

TEST_CASE("fnv1a64 is stable and byte-sensitive") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") != fnv1a64("b"));
    CHECK(fnv1a64_hex("prompt") == fnv1a64_hex("prompt"));
    CHECK(fnv1a64_hex("prompt").size() == 16);
}

TEST_CASE("ascii check") {
    CHECK(is_ascii("plain text {}();"));
    CHECK_FALSE(is_ascii("caf\xc3\xa9"));
    CHECK(is_ascii(""));
}

TEST_CASE("trim and first_token") {
    CHECK(trim("  x  ") == "x");
    CHECK(ltrim("\n\t y") == "y");
    CHECK(rtrim("y \r\n") == "y");
    CHECK(first_token("  1 and more") == "1");
    CHECK(first_token("") == "");
    CHECK(first_token("   ") == "");
}

TEST_CASE("replace_all is plain concatenation") {
    CHECK(replace_all("a{x}b{x}", "{x}", "1") == "a1b1");
    CHECK(replace_all("no placeholder", "{x}", "1") == "no placeholder");
    CHECK(replace_all("{x}", "{x}", "{x}{x}") == "{x}{x}");
}

TEST_CASE("derive_seed separates part lists") {
    CHECK(derive_seed(1, {"a", "bc"}) != derive_seed(1, {"ab", "c"}));
    CHECK(derive_seed(1, {"a"}) != derive_seed(2, {"a"}));
    CHECK(derive_seed(7, {"t", "0", "random"}) == derive_seed(7, {"t", "0", "random"}));
}

TEST_CASE("bounded_uint covers the range uniformly enough") {
    std::mt19937_64 rng(5);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        auto v = bounded_uint(rng, 7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS_AS(bounded_uint(rng, 0), std::invalid_argument);
}

TEST_CASE("uniform_double stays in the unit interval") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        double v = uniform_double(rng);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("text file round trip") {
    auto path = std::filesystem::temp_directory_path() / "cj-util-test.txt";
    write_text_file(path, "line\n");
    CHECK(read_text_file(path) == "line\n");
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_text_file(path), InfraError);
}

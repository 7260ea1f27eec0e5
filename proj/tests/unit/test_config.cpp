#include "sparselets/config.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cctype>
#include <random>

using namespace sparselets;

namespace {

bool looks_integer(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool looks_real(const std::string& s) {
    if (s.empty() || s.find(',') != std::string::npos) return false;
    std::size_t used = 0;
    try {
        std::stod(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size();
}

// Random perturbation of every numeric entry; keys whose new value is
// rejected by the parser keep their default.
RunConfig random_config(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    std::uniform_int_distribution<int> k(1, 64);
    RunConfig c;
    for (const auto& key : config_keys()) {
        const auto v = get_config_value(c, key);
        std::string next;
        if (looks_integer(v)) next = std::to_string(k(rng));
        else if (looks_real(v)) next = std::to_string(u(rng) / 3.0 + 1e-7 * (rng() % 1000));
        else continue;
        try {
            set_config_value(c, key, next);
        } catch (const std::invalid_argument&) {
        }
    }
    c.paths["corpus"] = "data/corpus/manifest.txt";
    return c;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults survive formatting") {
    const RunConfig c;
    CHECK(parse_config(format_config(c)) == c);
}

TEST_CASE("random configurations round-trip exactly") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto c = random_config(seed);
        CHECK(parse_config(format_config(c)) == c);
        CHECK(config_hash(parse_config(format_config(c))) == config_hash(c));
    }
}

TEST_CASE("a real-valued entry keeps every bit") {
    RunConfig c;
    c.pursuit.alpha = 0.1 + 0.2;  // not a short decimal
    c.bank.orientations = {-1.0 / 3.0, 0.0, std::acos(-1.0) / 2.0};
    const auto back = parse_config(format_config(c));
    CHECK(back.pursuit.alpha == c.pursuit.alpha);
    CHECK(back.bank.orientations == c.bank.orientations);
}

TEST_CASE("comments, blank lines and overrides") {
    const auto c = parse_config("# comment\n\npursuit.alpha = 0.5  # inline\nimage_size=128\n");
    CHECK(c.pursuit.alpha == 0.5);
    CHECK(c.image_size == 128);
    CHECK(c.bank == BankParams{});
}

TEST_CASE("bad entries are rejected") {
    RunConfig c;
    CHECK_THROWS_AS(set_config_value(c, "pursuit.alpah", "0.5"), std::invalid_argument);
    CHECK_THROWS_AS(set_config_value(c, "image_size", "big"), std::invalid_argument);
    CHECK_THROWS_AS(set_config_value(c, "shl.homeo_mode", "sometimes"), std::invalid_argument);
    CHECK_THROWS(parse_config("just words\n"));
    CHECK_THROWS(get_config_value(c, "nope"));
}

TEST_CASE("the hash tracks the content") {
    RunConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("files") {
    const auto dir = testing::scratch_dir("config_files");
    const auto c = random_config(99);
    save_config(dir / "run.cfg", c);
    CHECK(load_config(dir / "run.cfg") == c);
    CHECK_THROWS(load_config(dir / "missing.cfg"));
}

}

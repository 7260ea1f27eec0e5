#include "sparselets/cli.hpp"
#include "sparselets/pursuit.hpp"
#include "sparselets/shl.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

using namespace sparselets;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "sparselets");
    return run(args);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string corpus_image(const std::string& name) { return (testing::data_dir() / "corpus" / name).string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
    CHECK(cli({"--help"}) == 0);
    CHECK(cli({}) == 2);
    CHECK(cli({"frobnicate"}) == 2);
    CHECK(cli({"extract", "--bogus"}) == 2);
    CHECK(cli({"extract", "--in", "/nonexistent/x.pgm", "--edges", "x.json"}) == 2);
    CHECK(cli({"--set", "pursuit.alpah=0.5", "synth", "--out", "x.pgm"}) == 2);
}

TEST_CASE("runtime failures exit with 1") {
    const auto dir = testing::scratch_dir("cli_fail");
    std::ofstream(dir / "junk.pgm") << "junk";
    CHECK(cli({"extract", "--in", (dir / "junk.pgm").string(), "--edges", (dir / "e.json").string()}) == 1);
    CHECK(cli({"extract", "--in", corpus_image("camera_0.pgm"), "--size", "64", "--edges",
               "/proc/forbidden/e.json"}) == 1);
}

TEST_CASE("extract then reconstruct stays within the energy threshold") {
    const auto dir = testing::scratch_dir("cli_pipeline");
    const auto edges = (dir / "e.json").string(), residual = (dir / "r.pgm").string();
    REQUIRE(cli({"extract", "--in", corpus_image("camera_0.pgm"), "--size", "64", "--edges", edges, "--residual",
                 residual, "--max-edges", "100000"}) == 0);
    REQUIRE(cli({"reconstruct", "--edges", edges, "--out", (dir / "rec.pgm").string()}) == 0);
    const auto input = preprocess(load_image(corpus_image("camera_0.pgm"), 64), {});
    const auto rec = read_image_file(dir / "rec.pgm");
    const auto err = input - rec;
    CHECK(err.energy() / input.energy() <= 0.03 + 1e-6);
    CHECK(fs::exists(edges + ".meta.json"));
    CHECK(fs::exists(residual));
}

TEST_CASE("identical runs write identical files and run metadata") {
    const auto dir = testing::scratch_dir("cli_determinism");
    for (const char* name : {"a.json", "b.json"})
        REQUIRE(cli({"--seed", "7", "extract", "--in", corpus_image("moon_0.pgm"), "--size", "64", "--edges",
                     (dir / name).string()}) == 0);
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    const auto meta = nlohmann::json::parse(slurp(dir / "a.json.meta.json"));
    CHECK(meta.at("seed").get<std::uint64_t>() == 7);
    CHECK(meta.at("config_hash").get<std::string>().size() == 16);
    CHECK(meta.at("version").get<std::string>() == "0.1.0");
}

TEST_CASE("stats and equalize over a directory of edge lists") {
    const auto dir = testing::scratch_dir("cli_stats");
    fs::create_directories(dir / "edges");
    for (const char* img : {"camera_0", "coins_0"})
        REQUIRE(cli({"extract", "--in", corpus_image(std::string(img) + ".pgm"), "--size", "64", "--edges",
                     (dir / "edges" / (std::string(img) + ".json")).string()}) == 0);
    REQUIRE(cli({"stats", "--edges-dir", (dir / "edges").string(), "--hist", (dir / "h.json").string(), "--chevron",
                 (dir / "c.json").string()}) == 0);
    REQUIRE(cli({"equalize", "--hist", (dir / "h.json").string(), "--n", "12", "--out", (dir / "o.json").string()}) ==
            0);
    const auto o = nlohmann::json::parse(slurp(dir / "o.json"));
    CHECK(o.at("orientations").size() == 12);
    REQUIRE(cli({"extract", "--in", corpus_image("camera_0.pgm"), "--size", "64", "--orientations",
                 (dir / "o.json").string(), "--edges", (dir / "eq.json").string()}) == 0);
    CHECK(load_edges(dir / "eq.json").bank_params.orientations.size() == 12);
    REQUIRE(cli({"extract", "--in", corpus_image("camera_0.pgm"), "--size", "64", "--prior", (dir / "c.json").string(),
                 "--eta", "0.15", "--edges", (dir / "p.json").string()}) == 0);
}

TEST_CASE("synth writes an image") {
    const auto dir = testing::scratch_dir("cli_synth");
    REQUIRE(cli({"synth", "--size", "64", "--radius", "20", "--clutter", "10", "--out", (dir / "s.pgm").string()}) == 0);
    CHECK(read_image_file(dir / "s.pgm").width() == 64);
}

TEST_CASE("learn writes a dictionary and a log") {
    const auto dir = testing::scratch_dir("cli_learn");
    REQUIRE(cli({"--set", "shl.patch_side=6", "learn", "--corpus", testing::corpus_manifest().string(), "--steps", "50",
                 "--atoms", "20", "--l0", "3", "--images", "2", "--split", "", "--out", (dir / "d.bin").string(),
                 "--log", (dir / "log.csv").string()}) == 0);
    int side = 0;
    CHECK(load_dictionary(dir / "d.bin", &side).M() == 20);
    CHECK(side == 6);
    CHECK(slurp(dir / "log.csv").rfind("step,eta,residual,kurtosis,min_pick_rate,max_pick_rate", 0) == 0);
}

TEST_CASE("bench efficiency writes its table") {
    const auto dir = testing::scratch_dir("cli_bench");
    REQUIRE(cli({"--set", "pursuit.max_edges=64", "bench", "efficiency", "--corpus", testing::corpus_manifest().string(),
                 "--size", "64", "--images", "2", "--split", "", "--out", dir.string()}) == 0);
    bool found = false;
    for (const auto& e : fs::directory_iterator(dir)) found |= e.path().extension() == ".csv";
    CHECK(found);
}

}

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "crowdloc/cli.hpp"

using namespace crowdloc;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    std::vector<const char*> argv = {"crowdloc"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "crowdloc_test_cli";
    return dir;
}

}  // namespace

TEST_CASE("the full command pipeline runs end to end") {
    const fs::path dir = work_dir();
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string data = (dir / "data").string();

    REQUIRE(run({"synth", "--out", data, "--seed", "3", "--train", "4", "--val", "2", "--test",
                 "2", "--size", "48", "--heads-min", "1", "--heads-max", "3"}) == 0);
    REQUIRE(fs::exists(data + "/train/manifest.txt"));
    REQUIRE(fs::exists(data + "/test/images/0001.png"));

    const std::string ckpt = (dir / "model.ckpt").string();
    REQUIRE(run({"train", "--data", data, "--mode", "fixed", "--epochs", "1", "--width", "3",
                 "--seed", "2", "--out", ckpt}) == 0);
    REQUIRE(fs::exists(ckpt));

    const std::string mjson = (dir / "metrics.json").string();
    REQUIRE(run({"eval", "--data", data, "--split", "test", "--model", ckpt, "--json", mjson}) ==
            0);
    REQUIRE(fs::exists(mjson));
    const auto parsed = nlohmann::json::parse(std::ifstream(mjson));
    CHECK(parsed.contains("F1m"));
    CHECK(parsed.at("images").get<int>() == 2);

    const std::string rec = (dir / "rec.txt").string();
    REQUIRE(run({"localize", "--model", ckpt, "--image", data + "/test/images/0000.png", "--out",
                 rec}) == 0);
    std::ifstream rf(rec);
    std::string first_tok;
    rf >> first_tok;
    CHECK(first_tok == "0000");

    const std::string overlay = (dir / "overlay.png").string();
    REQUIRE(run({"render", "--model", ckpt, "--image", data + "/test/images/0000.png", "--ann",
                 data + "/test/anns/0000.json", "--out", overlay}) == 0);
    REQUIRE(fs::exists(overlay));

    const std::string labels = (dir / "labels.png").string();
    REQUIRE(run({"genlabels", "--ann", data + "/test/anns/0000.json", "--width", "48", "--height",
                 "48", "--out", labels}) == 0);
    REQUIRE(fs::exists(labels));
    const LabelMap map = read_png_gray16(labels);
    const Annotation ann = read_annotation(data + "/test/anns/0000.json");
    CHECK(map.count == static_cast<int>(ann.points.size()));

    // evaluating with a constant-threshold override also succeeds
    CHECK(run({"eval", "--data", data, "--split", "test", "--model", ckpt, "--fixed-t", "0.8"}) ==
          0);
}

TEST_CASE("bad invocations exit nonzero with no subcommand executed") {
    CHECK(run({}) != 0);
    CHECK(run({"frobnicate"}) != 0);
    CHECK(run({"genlabels"}) != 0);                          // missing required options
    CHECK(run({"localize", "--model", "absent.ckpt"}) != 0); // missing required --image
    CHECK(run({"eval", "--data", "/nonexistent", "--model", "/nonexistent.ckpt"}) != 0);
    CHECK(run({"--help"}) == 0);
}

TEST_CASE("a config file presets options and flags override it") {
    const fs::path dir = work_dir() / "cfg";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = (dir / "run.cfg").string();
    std::ofstream(cfg) << "[synth]\n"
                       << "train=3\nval=1\ntest=1\nsize=40\nheads-min=1\nheads-max=2\n";

    const std::string d1 = (dir / "d1").string();
    REQUIRE(run({"--config", cfg, "synth", "--out", d1, "--seed", "5"}) == 0);
    CHECK(read_manifest(d1 + "/train/manifest.txt").size() == 3);
    CHECK(read_manifest(d1 + "/val/manifest.txt").size() == 1);

    const std::string d2 = (dir / "d2").string();
    REQUIRE(run({"--config", cfg, "synth", "--out", d2, "--seed", "5", "--train", "2"}) == 0);
    CHECK(read_manifest(d2 + "/train/manifest.txt").size() == 2);
}

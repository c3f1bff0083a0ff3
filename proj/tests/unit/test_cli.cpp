#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "dcot/cli.hpp"

using namespace dcot::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = DCOT_FIXTURES;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("dcot_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json j{{"paths", {{"corpus", (kFixtures / "corpus.jsonl").string()}, {"out", "out"}}},
                     {"endpoint", {{"model", "student-{seed}"}}},
                     {"teacher", {{"model", "teacher"}}},
                     {"experiment", {{"ks", {1, 2, 3}}, {"seeds", {0, 1}}}}};
    j.merge_patch(extra);
    auto path = dir / "dcot.json";
    std::ofstream(path) << j.dump(2);
    return path;
}

}  // namespace

TEST_CASE("config parsing is strict") {
    CHECK_THROWS_WITH_AS(parse_config(nlohmann::json::parse(R"({"endpoint": {"modle": "x"}})")),
                         doctest::Contains("endpoint.modle"), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"endpont": {}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"experiment": {"ks": [0]}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"endpoint": {"max_tokens": "many"}})")), ConfigError);

    auto c = parse_config(nlohmann::json::parse(R"({"paths": {"corpus": "data", "out": "res"},
        "experiment": {"regime": "dcot_sc", "split": "test"},
        "split": {"overrides": {"tiny": {"dev": 50, "test": 100}}}})"),
                          "/base");
    CHECK(c.paths.corpus == fs::path("/base/data"));
    CHECK(c.paths.cache == fs::path("/base/res/cache.jsonl"));
    CHECK(c.experiment.regime == dcot::experiments::Regime::dcot_sc);
    CHECK(c.split.overrides.at("tiny").test == 100);
    CHECK(c.endpoint.max_tokens == 1024);
    CHECK(c.teacher.temperature == 0.7);
}

TEST_CASE("unknown key exits 1 and --help lists every key") {
    auto dir = temp_dir("strict");
    auto cfg = write_config(dir, {{"paths", {{"nope", 1}}}});
    auto r = run({"-c", cfg.string(), "validate"});
    CHECK(r.code == kConfig);
    CHECK(r.err.find("paths.nope") != std::string::npos);

    auto help = run({"--help"});
    CHECK(help.code == kOk);
    for (const char* key : {"endpoint.url", "endpoint.retry_base_ms", "teacher.max_in_flight", "paths.cache",
                            "ensemble.samples", "experiment.regime", "split.overrides", "datagen.assign_seed",
                            "DCOT_API_KEY"}) {
        CHECK_MESSAGE(help.out.find(key) != std::string::npos, key);
    }
    CHECK(run({"frobnicate"}).code == kConfig);
    fs::remove_all(dir);
}

TEST_CASE("missing API key is a config error") {
    auto dir = temp_dir("key");
    auto cfg = write_config(dir, {{"endpoint", {{"url", "http://127.0.0.1:9"}}}});
    ::unsetenv("DCOT_API_KEY");
    auto r = run({"-c", cfg.string(), "run"});
    CHECK(r.code == kConfig);
    CHECK(r.err.find("DCOT_API_KEY") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("pipeline with the scripted mock, then a corrupted train file") {
    auto dir = temp_dir("pipeline");
    auto cfg = write_config(dir).string();
    auto mock = (kFixtures / "mock_pipeline.json").string();

    auto gen = run({"-c", cfg, "gen-cots", "--mock-script", mock});
    REQUIRE_MESSAGE(gen.code == kOk, gen.err);
    CHECK(gen.out.find("m=4:") != std::string::npos);
    CHECK(fs::exists(dir / "out/datagen/raw_generations.jsonl"));

    auto build = run({"-c", cfg, "build-train"});
    REQUIRE_MESSAGE(build.code == kOk, build.err);
    CHECK(build.out.find("equal") != std::string::npos);

    auto ev = run({"-c", cfg, "run", "--mock-script", mock});
    REQUIRE_MESSAGE(ev.code == kOk, ev.err);
    CHECK(fs::exists(dir / "out/dev/runs/dcot/colors/k3/seed1.jsonl"));

    auto rep = run({"-c", cfg, "report"});
    REQUIRE_MESSAGE(rep.code == kOk, rep.err);
    CHECK(fs::exists(dir / "out/dev/summary.csv"));
    CHECK(fs::exists(dir / "out/dev/patterns.csv"));
    CHECK(rep.out.find("colors") != std::string::npos);

    CHECK(run({"-c", cfg, "validate"}).code == kOk);
    {
        std::ofstream tamper(dir / "out/datagen/train_cot.jsonl", std::ios::app);
        tamper << R"({"example_id":"colors/train/0","regime":"cot","k":1,"prompt":"p","target":"chain\n[Final answer] A"})"
               << '\n';
    }
    auto bad = run({"-c", cfg, "validate"});
    CHECK(bad.code == kValidation);
    CHECK(bad.out.find("MISMATCH") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("unreachable endpoint exits 2") {
    auto dir = temp_dir("down");
    auto cfg = write_config(dir, {{"endpoint", {{"url", "http://127.0.0.1:9"}, {"max_attempts", 1}, {"timeout_s", 1}}},
                                  {"experiment", {{"ks", {1}}, {"seeds", {0}}, {"datasets", {"sums"}}}}});
    ::setenv("DCOT_API_KEY", "test", 1);
    auto r = run({"-c", cfg.string(), "run"});
    ::unsetenv("DCOT_API_KEY");
    CHECK(r.code == kTransport);
    fs::remove_all(dir);
}

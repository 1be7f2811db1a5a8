#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "squadplan/cli.hpp"
#include "support.hpp"

using namespace squadplan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Captured {
  int code = 0;
  std::string err;
};

Captured invoke(std::vector<std::string> args) {
  std::ostringstream err, out;
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  Captured c;
  c.code = cli::run(args);
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  c.err = err.str();
  return c;
}

std::map<std::string, std::string> contents(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind("manifest-", 0) != 0)
      files[e.path().filename().string()] = testing::slurp(e.path());
  return files;
}

json load(const fs::path& p) { return json::parse(testing::slurp(p)); }

// A small league with trained models under `root`.
void prepare(const testing::TempDir& root) {
  const std::string d = (root / "data").string(), m = (root / "models").string();
  REQUIRE(invoke({"synth", "--seed", "1", "--clubs", "4", "--out", d, "-q"}).code == 0);
  REQUIRE(invoke({"train-injury", "--data", d, "--out", m, "-q"}).code == 0);
  REQUIRE(invoke({"train-match", "--data", d, "--out", m, "-q"}).code == 0);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fnv1a reference vectors") {
    CHECK(cli::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(cli::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(cli::fnv1a("foobar") == 0x85944171f73967e8ULL);
  }

  TEST_CASE("synth is reproducible") {
    testing::TempDir t;
    REQUIRE(invoke({"synth", "--seed", "1", "--clubs", "4", "--out", (t / "a").string(), "-q"}).code == 0);
    REQUIRE(invoke({"synth", "--seed", "1", "--clubs", "4", "--out", (t / "b").string(), "-q"}).code == 0);
    const auto a = contents(t / "a");
    CHECK(a.size() >= 4);
    CHECK(a == contents(t / "b"));
    REQUIRE(invoke({"synth", "--seed", "2", "--clubs", "4", "--out", (t / "c").string(), "-q"}).code == 0);
    CHECK(a != contents(t / "c"));
  }

  TEST_CASE("exit codes") {
    testing::TempDir t;
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"bogus"}).code == 2);
    CHECK(invoke({"synth", "--out", t.path().string(), "--no-such-flag"}).code == 2);
    CHECK(invoke({"synth", "--clubs", "many", "--out", t.path().string()}).code == 2);
    CHECK(invoke({"simulate", "--help"}).code == 0);

    prepare(t);
    const Captured missing = invoke({"simulate", "--data", (t / "data").string(), "--models", (t / "nowhere").string(),
                                  "--out", (t / "s").string()});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("injury_model.json") != std::string::npos);
    CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

    const Captured no_club = invoke({"simulate", "--data", (t / "data").string(), "--models", (t / "models").string(),
                                  "--club", "C42", "--out", (t / "s").string()});
    CHECK(no_club.code == 1);
    CHECK(no_club.err.find("C42") != std::string::npos);

    const Captured replay = invoke({"simulate", "--data", (t / "data").string(), "--models", (t / "models").string(),
                                 "--strategy", "replay", "--out", (t / "s").string()});
    CHECK(replay.code == 1);
  }

  TEST_CASE("flags override the config file, which overrides defaults") {
    testing::TempDir t;
    prepare(t);
    testing::spit(t / "cfg.json", json{{"iterations", 7},
                                       {"seed", 5},
                                       {"strategy", "greedy"},
                                       {"data", (t / "data").string()},
                                       {"models", (t / "models").string()}}
                                      .dump());
    const std::string out = (t / "s").string();
    REQUIRE(invoke({"simulate", "--config", (t / "cfg.json").string(), "--seed", "9", "--out", out, "-q"}).code == 0);
    const json m = load(t / "s" / "manifest-simulate.json");
    CHECK(m["config"]["iterations"] == 7);
    CHECK(m["config"]["seed"] == 9);
    CHECK(m["config"]["strategy"] == "greedy");
    CHECK(m["config"]["risk_multiplier"] == 1.0);
    CHECK(m["seed"] == 9);
    CHECK(fs::exists(t / "s" / "season-C01-greedy-9.json"));

    testing::spit(t / "bad.json", R"({"iterationz": 3})");
    CHECK(invoke({"simulate", "--config", (t / "bad.json").string(), "--out", out}).code == 2);
    testing::spit(t / "worse.json", R"({"strategy": "random"})");
    CHECK(invoke({"simulate", "--config", (t / "worse.json").string(), "--data", (t / "data").string(), "--models",
               (t / "models").string(), "--out", out})
              .code == 2);
  }

  TEST_CASE("a manifest reruns its command") {
    testing::TempDir t;
    prepare(t);
    REQUIRE(invoke({"simulate", "--data", (t / "data").string(), "--models", (t / "models").string(), "--iterations",
                 "40", "--seeds", "2", "--seed", "4", "--out", (t / "first").string(), "-q"})
                .code == 0);
    const json m = load(t / "first" / "manifest-simulate.json");
    // every artifact is listed and nothing else was written
    std::set<std::string> listed;
    for (const auto& p : m["outputs"]) listed.insert(fs::path(p.get<std::string>()).filename().string());
    std::set<std::string> present;
    for (const auto& e : fs::directory_iterator(t / "first")) present.insert(e.path().filename().string());
    CHECK(listed == present);
    CHECK(m["inputs"].size() >= 6);

    REQUIRE(invoke({"simulate", "--config", (t / "first" / "manifest-simulate.json").string(), "--out",
                 (t / "second").string(), "-q"})
                .code == 0);
    CHECK(contents(t / "first") == contents(t / "second"));
    // the rerun also lists the manifest it read
    json inputs = load(t / "second" / "manifest-simulate.json")["inputs"];
    CHECK(inputs.erase((t / "first" / "manifest-simulate.json").string()) == 1);
    CHECK(inputs == m["inputs"]);
  }

  TEST_CASE("worker count does not change results") {
    testing::TempDir t;
    prepare(t);
    const std::vector<std::string> base = {"simulate", "--data", (t / "data").string(), "--models",
                                           (t / "models").string(), "--iterations", "30", "--seeds", "3", "-q"};
    auto with = [&](const std::string& jobs, const std::string& out) {
      auto a = base;
      a.insert(a.end(), {"--jobs", jobs, "--out", (t / out).string()});
      return invoke(a).code;
    };
    REQUIRE(with("1", "one") == 0);
    REQUIRE(with("3", "three") == 0);
    CHECK(contents(t / "one") == contents(t / "three"));
  }

  TEST_CASE("compare writes the pinned table") {
    testing::TempDir t;
    prepare(t);
    REQUIRE(invoke({"compare", "--data", (t / "data").string(), "--models", (t / "models").string(), "--seeds", "3",
                 "--iterations", "50", "--clubs", "C01", "C02", "--risk-multiplier", "1", "2", "--jobs", "2", "--out",
                 (t / "cmp").string(), "-q"})
                .code == 0);
    const std::string csv = testing::slurp(t / "cmp" / "comparison.csv");
    CHECK(csv == testing::slurp(fs::path(SQUADPLAN_TEST_DATA) / "compare_small.csv"));
    CHECK(load(t / "cmp" / "comparison.json").size() == 4);
  }

  TEST_CASE("case study and training outputs") {
    testing::TempDir t;
    prepare(t);
    CHECK(fs::exists(t / "models" / "injury_validation.csv"));
    REQUIRE(invoke({"case-study", "--data", (t / "data").string(), "--models", (t / "models").string(), "--player",
                 "C01-P05", "--iterations", "30", "--window", "3", "--out", (t / "cs").string(), "-q"})
                .code == 0);
    const std::string csv = testing::slurp(t / "cs" / "case_study.csv");
    CHECK(csv.rfind("gameweek,mcts_theta,mcts_rolling,mcts_played,mcts_available,greedy_theta", 0) == 0);
    CHECK(invoke({"case-study", "--data", (t / "data").string(), "--models", (t / "models").string(), "--player",
               "nobody", "--out", (t / "cs").string(), "-q"})
              .code == 1);
  }
}

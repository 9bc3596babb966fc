#include "c1split/scenario.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace c1split;
using namespace c1split::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("c1split-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path.string();
}

const char* kHeader = R"(name = "tiny"
seed = 4

[metric]
id = "minkowski"

[window]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]
shape = [5, 5]
)";

const char* kGeodesic = R"(
[[ops]]
op = "geodesic"
from = [0.0, 0.0]
velocity = [1.0, 0.5]
span = 0.5
step = 0.01
expect_endpoint = [0.5, 0.25]
)";

RunOutcome run(const std::string& config, const fs::path& out, std::set<std::string> only = {}) {
  RunOptions ro;
  ro.config = config;
  ro.out = out.string();
  ro.only = std::move(only);
  std::ostringstream log;
  return run_scenario(ro, log);
}

json read_summary(const fs::path& out) {
  std::ifstream f(out / "summary.json");
  return json::parse(f);
}

}  // namespace

TEST(Cli, PassingScenarioWritesSummary) {
  const fs::path d = scratch("pass");
  const RunOutcome r = run(write(d / "s.toml", std::string(kHeader) + kGeodesic), d / "out");
  EXPECT_EQ(r.exit_code, kPass);
  const json s = read_summary(d / "out");
  EXPECT_EQ(s["scenario"], "tiny");
  EXPECT_EQ(s["seed"], 4);
  EXPECT_EQ(s["status"], "pass");
  EXPECT_EQ(s["exit_code"], 0);
  EXPECT_EQ(s["checks_failed"], 0);
  EXPECT_GT(s["checks_total"].get<int>(), 0);
  ASSERT_EQ(s["operations"].size(), 1u);
  EXPECT_EQ(s["operations"][0]["op"], "geodesic");
  EXPECT_EQ(s["config"]["window"]["shape"], json::array({5, 5}));
  for (const auto& f : s["operations"][0]["files"]) EXPECT_TRUE(fs::exists(d / "out" / f.get<std::string>()));
}

TEST(Cli, FailedCheckGivesExitOne) {
  const fs::path d = scratch("fail");
  std::string text = std::string(kHeader) + kGeodesic;
  text.replace(text.find("[0.5, 0.25]"), 11, "[0.5, 0.3]");
  const RunOutcome r = run(write(d / "s.toml", text), d / "out");
  EXPECT_EQ(r.exit_code, kCheckFailure);
  EXPECT_EQ(read_summary(d / "out")["status"], "fail");
}

TEST(Cli, ExpectedFailuresAreAcceptedAndUnexpectedPassesAreNot) {
  const fs::path d = scratch("xfail");
  std::string bad = std::string(kHeader) + kGeodesic + "expect_fail = [\"endpoint_error\"]\n";
  bad.replace(bad.find("[0.5, 0.25]"), 11, "[0.5, 0.3]");
  EXPECT_EQ(run(write(d / "x.toml", bad), d / "x").exit_code, kPass);
  const json s = read_summary(d / "x");
  bool seen = false;
  for (const auto& c : s["operations"][0]["checks"])
    if (c["name"] == "geodesic.endpoint_error") {
      EXPECT_EQ(c["status"], "xfail");
      seen = true;
    }
  EXPECT_TRUE(seen);

  const std::string xpass = std::string(kHeader) + kGeodesic + "expect_fail = [\"endpoint_error\"]\n";
  EXPECT_EQ(run(write(d / "p.toml", xpass), d / "p").exit_code, kCheckFailure);

  const std::string unknown = std::string(kHeader) + kGeodesic + "expect_fail = [\"no_such_check\"]\n";
  EXPECT_EQ(run(write(d / "u.toml", unknown), d / "u").exit_code, kConfigError);
}

TEST(Cli, ConfigErrorsGiveExitTwo) {
  const fs::path d = scratch("config");
  EXPECT_EQ(run((d / "missing.toml").string(), d / "a").exit_code, kConfigError);
  EXPECT_EQ(run(write(d / "top.toml", std::string("extra = 1\n") + kHeader + kGeodesic), d / "b").exit_code,
            kConfigError);
  EXPECT_EQ(run(write(d / "op.toml", std::string(kHeader) + "[[ops]]\nop = \"teleport\"\n"), d / "c").exit_code,
            kConfigError);
  EXPECT_EQ(run(write(d / "key.toml", std::string(kHeader) + kGeodesic + "stepp = 0.1\n"), d / "d").exit_code,
            kConfigError);
  std::string metric = std::string(kHeader) + kGeodesic;
  metric.replace(metric.find("minkowski"), 9, "anti-de-sitter");
  EXPECT_EQ(run(write(d / "m.toml", metric), d / "e").exit_code, kConfigError);
  EXPECT_EQ(run(write(d / "syntax.toml", "name = \n"), d / "f").exit_code, kConfigError);
  const json s = read_summary(d / "f");
  EXPECT_EQ(s["status"], "error");
  EXPECT_TRUE(s.contains("error"));
  EXPECT_EQ(run(C1SPLIT_SOURCE_DIR "/scenarios/bad-catalog.toml", d / "g").exit_code, kConfigError);
}

TEST(Cli, LibraryErrorsGiveExitThree) {
  const fs::path d = scratch("numeric");
  const std::string text = std::string(kHeader) + R"(
[[ops]]
op = "distance"
from = [-0.9, 0.8]
to = [0.9, 0.8]
)";
  const RunOutcome r = run(write(d / "s.toml", text), d / "out");
  EXPECT_EQ(r.exit_code, kNumericError);
  const json s = read_summary(d / "out");
  EXPECT_NE(s["error"].get<std::string>().find("distance"), std::string::npos);
}

TEST(Cli, TomlAndJsonAreEquivalent) {
  const fs::path d = scratch("json");
  const std::string json_text = R"({
  "name": "tiny", "seed": 4,
  "metric": {"id": "minkowski"},
  "window": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0], "shape": [5, 5]},
  "ops": [{"op": "geodesic", "from": [0.0, 0.0], "velocity": [1.0, 0.5], "span": 0.5, "step": 0.01,
           "expect_endpoint": [0.5, 0.25]}]
})";
  const RunOutcome a = run(write(d / "s.toml", std::string(kHeader) + kGeodesic), d / "a");
  const RunOutcome b = run(write(d / "s.json", json_text), d / "b");
  EXPECT_EQ(a.exit_code, kPass);
  EXPECT_EQ(b.exit_code, kPass);
  EXPECT_EQ(a.summary["config"], b.summary["config"]);
  EXPECT_EQ(a.summary["operations"][0]["results"], b.summary["operations"][0]["results"]);
}

// Property: a rerun with the same seed reproduces the summary.
TEST(Cli, RunsAreDeterministic) {
  const fs::path d = scratch("determinism");
  const std::string cfg = write(d / "s.toml", std::string(kHeader) + kGeodesic);
  const RunOutcome a = run(cfg, d / "a");
  const RunOutcome b = run(cfg, d / "b");
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
}

TEST(Cli, SubcommandsSelectOperations) {
  EXPECT_EQ(subcommand_ops("geodesic"), std::set<std::string>({"geodesic"}));
  EXPECT_TRUE(subcommand_ops("compare").count("bochner"));
  EXPECT_TRUE(subcommand_ops("busemann").count("co_ray"));
  EXPECT_TRUE(subcommand_ops("nonsense").empty());
  const fs::path d = scratch("only");
  const std::string cfg = write(d / "s.toml", std::string(kHeader) + kGeodesic);
  EXPECT_EQ(run(cfg, d / "a", subcommand_ops("split")).exit_code, kConfigError);
  EXPECT_EQ(run(cfg, d / "b", subcommand_ops("geodesic")).exit_code, kPass);
}

TEST(Cli, CatalogListing) {
  std::ostringstream os;
  print_catalog(os);
  const std::string text = os.str();
  for (const auto& e : catalog_entries()) EXPECT_NE(text.find(e.id), std::string::npos);
  EXPECT_NE(text.find("product-hyperbolic"), std::string::npos);
  EXPECT_NE(text.find("quadratic"), std::string::npos);
}

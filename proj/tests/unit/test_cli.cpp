#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "thyia/cli.hpp"

namespace thyia {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "thyia");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("thyia_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    params_ = (dir_ / "fast.params").string();
    std::ofstream(params_) << "budget = 50\ntrain_batches = 1\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::string params_;
};

const std::string kFixtures = THYIA_FIXTURE_DIR;

TEST_F(CliTest, ValidateGoodFile) {
  const auto r = Cli({"validate", kFixtures + "/corridor.gdf"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "ok\n");
}

TEST_F(CliTest, ValidateReportsDiagnostic) {
  const auto r = Cli({"validate", kFixtures + "/malformed/ragged-rows.gdf"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("line 10"), std::string::npos);
  const auto j = Cli({"validate", "--format", "json", kFixtures + "/malformed/ragged-rows.gdf"});
  EXPECT_EQ(Json::parse(j.out).at("error"), "ragged-rows");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(Cli({"validate", (dir_ / "missing.gdf").string()}).code, 2);
  EXPECT_EQ(Cli({"play", "--game", "CoinCorridor", "--seed", "1", "--bogus"}).code, 2);
  EXPECT_EQ(Cli({"play", "--game", "CoinCorridor"}).code, 2);
  EXPECT_EQ(Cli({"play", "--game", "NoSuchGame", "--seed", "1"}).code, 2);
  EXPECT_EQ(Cli({"frobnicate"}).code, 2);
  EXPECT_EQ(Cli({}).code, 2);
  std::ofstream(dir_ / "bad.params") << "budget = 7\n";
  EXPECT_EQ(Cli({"play", "--game", "CoinCorridor", "--seed", "1", "--params", (dir_ / "bad.params").string()}).code, 2);
  EXPECT_EQ(Cli({"stats", "--snapshot", (dir_ / "none").string()}).code, 2);
  EXPECT_EQ(Cli({"--help"}).code, 0);
}

TEST_F(CliTest, PlayIsDeterministic) {
  const std::vector<std::string> args = {"play", "--game", "DodgeRunner", "--episodes", "2", "--seed", "42",
                                         "--params", params_};
  const auto a = Cli(args);
  const auto b = Cli(args);
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("episode 1 DodgeRunner"), std::string::npos);
}

TEST_F(CliTest, PlayJson) {
  const auto r = Cli({"play", "--game", kFixtures + "/corridor.gdf", "--seed", "3", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j.at("game"), "corridor");
  EXPECT_EQ(j.at("episodes").size(), 1u);
  EXPECT_EQ(j.at("episodes")[0].at("outcome"), "win");
}

TEST_F(CliTest, TuneOneMaxFindsAllOnes) {
  const auto log = (dir_ / "tune.log").string();
  const auto r = Cli({"tune", "--problem", "onemax", "--bits", "5", "--noise", "0", "--budget", "100", "--seed",
                      "2", "--log", log, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(j.at("recommended").at("bit" + std::to_string(i)), "1");
  std::ifstream in(log);
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 100);
}

TEST_F(CliTest, TuneGame) {
  const auto r = Cli({"tune", "--game", "CoinCorridor", "--budget", "4", "--seed", "1", "--params", params_});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("population_size = "), std::string::npos);
}

TEST_F(CliTest, TrainSavesModelThatPlayCanUse) {
  const auto model = (dir_ / "m.thy1").string();
  auto r = Cli({"train", "--game", "CoinCorridor", "--episodes", "2", "--seed", "1", "--params", params_, "--out",
                model, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Json::parse(r.out).at("game"), "CoinCorridor");
  ASSERT_TRUE(fs::exists(model));
  r = Cli({"play", "--game", "CoinCorridor", "--seed", "1", "--params", params_, "--model", model});
  EXPECT_EQ(r.code, 0) << r.err;
  r = Cli({"play", "--game", "DodgeRunner", "--seed", "1", "--params", params_, "--model", model});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, RunThenStats) {
  const auto snap = (dir_ / "snap").string();
  auto r = Cli({"run", "--episodes", "3", "--seed", "5", "--params", params_, "--games", "CoinCorridor,KeyDoor",
                "--snapshot", snap, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json run = Json::parse(r.out);
  EXPECT_EQ(run.at("episodes").size(), 3u);
  r = Cli({"stats", "--snapshot", snap, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Json::parse(r.out).at("episodes"), 3);
  // Continue from the snapshot.
  r = Cli({"run", "--episodes", "1", "--seed", "5", "--snapshot", snap});
  ASSERT_EQ(r.code, 0) << r.err;
  r = Cli({"stats", "--snapshot", snap, "--game", "KeyDoor", "--format", "json"});
  EXPECT_EQ(Json::parse(r.out).at("episodes"), 2);
}

TEST_F(CliTest, SnapshotDirFromEnvironment) {
  const auto snap = (dir_ / "envsnap").string();
  ::setenv("THYIA_SNAPSHOT_DIR", snap.c_str(), 1);
  auto r = Cli({"run", "--episodes", "1", "--seed", "5", "--params", params_, "--games", "CoinCorridor"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = Cli({"stats"});
  ::unsetenv("THYIA_SNAPSHOT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("episodes=1"), std::string::npos);
}

TEST_F(CliTest, ServeBoundedRun) {
  const auto snap = (dir_ / "served").string();
  const auto r = Cli({"serve", "--port", "0", "--episodes", "2", "--seed", "1", "--params", params_, "--games",
                      "CoinCorridor", "--snapshot", snap, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(Json::parse(r.out.substr(0, r.out.find('\n'))).at("port").get<int>(), 0);
  EXPECT_TRUE(fs::exists(fs::path(snap) / "manifest.txt"));
}

}  // namespace
}  // namespace thyia

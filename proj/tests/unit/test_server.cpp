#include <filesystem>
#include <thread>

#include <httplib.h>
#include <gtest/gtest.h>

#include "thyia/server.hpp"

namespace thyia {
namespace {

namespace fs = std::filesystem;

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    RuntimeConfig c;
    c.library = {"CoinCorridor", "DodgeRunner"};
    c.params.Set("budget", "100");
    c.moderation.blocklist = {"blocked"};
    runtime_ = std::make_unique<Runtime>(c);
    snapshot_ = fs::temp_directory_path() / ("thyia_server_snap_" + std::to_string(::getpid()));
    fs::remove_all(snapshot_);
    server_ = std::make_unique<ControlServer>(*runtime_, snapshot_);
    port_ = server_->Start("127.0.0.1", 0);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->Stop();
    fs::remove_all(snapshot_);
  }

  Json Body(const httplib::Result& r) { return Json::parse(r->body); }
  httplib::Result PostJson(const std::string& path, const Json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  std::unique_ptr<Runtime> runtime_;
  fs::path snapshot_;
  std::unique_ptr<ControlServer> server_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(ServerTest, Status) {
  runtime_->StepCycle();
  auto r = client_->Get("/v1/status");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const Json j = Body(r);
  EXPECT_EQ(j.at("game"), "CoinCorridor");
  EXPECT_EQ(j.at("episodes"), 1);
  EXPECT_EQ(j.at("fingerprint_hash"), HexU64(runtime_->Fingerprint().Hash()));
  EXPECT_TRUE(j.contains("uptime_s"));
}

TEST_F(ServerTest, GamesListAndUpload) {
  auto r = client_->Get("/v1/games");
  ASSERT_TRUE(r);
  EXPECT_EQ(Body(r).at("games"), Json({"CoinCorridor", "DodgeRunner"}));
  const std::string gdf =
      "game lane\nsprites\nA a avatar\nC c collectible score=1\ntermination\nall-collected -> win\n"
      "timeout 9 -> loss\nlevel\nA.C\n";
  r = PostJson("/v1/games", {{"gdf", gdf}, {"submitter", "viewer"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(Body(r).at("game"), "lane");
  r = PostJson("/v1/games", {{"gdf", "game lane\n"}});
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(Body(r).at("rule"), "structural:parse");
  r = PostJson("/v1/games", {{"gdf", gdf}, {"submitter", "BLOCKED person"}});
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(Body(r).at("rule"), "blocklist:0");
  EXPECT_EQ(Body(r).dump().find("person"), std::string::npos);
  EXPECT_EQ(client_->Get("/v1/games")->body.find("lane") != std::string::npos, true);
}

TEST_F(ServerTest, SuggestionsChangeNextGame) {
  auto r = PostJson("/v1/suggestions", {{"kind", "play-game"}, {"game", "DodgeRunner"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(runtime_->StepCycle().game, "DodgeRunner");

  r = PostJson("/v1/suggestions", {{"kind", "play-game"}, {"game", "Nope"}});
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(Body(r).at("rule"), "unknown-game");

  r = PostJson("/v1/suggestions", {{"kind", "strategy-hint"}, {"bias", {0, 0, 0, 1, 0}}});
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(Body(client_->Get("/v1/status")).at("hint"), Json({0.0, 0.0, 0.0, 1.0, 0.0}));

  EXPECT_EQ(PostJson("/v1/suggestions", {{"kind", "strategy-hint"}, {"bias", {1, 2}}})->status, 400);
  EXPECT_EQ(PostJson("/v1/suggestions", {{"kind", "dance"}})->status, 400);
  EXPECT_EQ(client_->Post("/v1/suggestions", "{oops", "application/json")->status, 400);

  r = PostJson("/v1/suggestions", {{"kind", "query-stats"}, {"game", "DodgeRunner"}});
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(Json::parse(Body(r).at("message").get<std::string>()).at("episodes"), 1);
}

TEST_F(ServerTest, Stats) {
  runtime_->StepCycle();
  auto r = client_->Get("/v1/stats?game=CoinCorridor");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const Json j = Body(r);
  EXPECT_EQ(j.at("episodes"), 1);
  EXPECT_EQ(j.at("win_rate"), 1.0);
  EXPECT_EQ(Body(client_->Get("/v1/stats")).at("scope"), "all");
  EXPECT_EQ(client_->Get("/v1/stats?game=Missing")->status, 404);
  EXPECT_EQ(client_->Get("/v1/nowhere")->status, 404);
}

TEST_F(ServerTest, Command) {
  auto r = PostJson("/v1/command", {{"command", "games"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(Body(r).at("response"), "CoinCorridor, DodgeRunner");
  r = client_->Post("/v1/command", "play DodgeRunner", "text/plain");
  EXPECT_EQ(Body(r).at("response"), "queued DodgeRunner");
  EXPECT_EQ(Body(PostJson("/v1/command", {{"command", "xyzzy"}})).at("response"),
            "I don't know that one yet. Try: help");
}

TEST_F(ServerTest, AdminEndpoints) {
  EXPECT_EQ(Body(client_->Post("/v1/admin/pause", "", "application/json")).at("paused"), true);
  EXPECT_TRUE(runtime_->paused());
  EXPECT_EQ(Body(client_->Post("/v1/admin/resume", "", "application/json")).at("paused"), false);
  EXPECT_FALSE(runtime_->paused());
  runtime_->StepCycle();
  auto r = client_->Post("/v1/admin/snapshot", "", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_TRUE(fs::exists(snapshot_ / "manifest.txt"));
  auto restored = Runtime::Restore(snapshot_);
  EXPECT_EQ(restored->Stats().episodes, 1);
}

TEST_F(ServerTest, LiveStreamDeliversFramesInOrder) {
  std::vector<Json> frames;
  std::mutex m;
  std::atomic<int> expected{-1};
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(std::chrono::seconds(10));
    std::string pending;
    c.Get("/v1/live", [&](const char* data, std::size_t n) {
      pending.append(data, n);
      std::size_t end;
      while ((end = pending.find("\n\n")) != std::string::npos) {
        const std::string event = pending.substr(0, end);
        pending.erase(0, end + 2);
        if (event.rfind("data: ", 0) == 0) {
          std::lock_guard lock(m);
          frames.push_back(Json::parse(event.substr(6)));
        }
      }
      std::lock_guard lock(m);
      return expected < 0 || static_cast<int>(frames.size()) < expected;
    });
  });
  for (int i = 0; i < 200 && runtime_->live().subscribers() == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ASSERT_EQ(runtime_->live().subscribers(), 1u);
  const auto rec = runtime_->StepCycle();
  expected = rec.ticks;
  reader.join();
  ASSERT_EQ(static_cast<int>(frames.size()), rec.ticks);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].at("seq"), i);
    EXPECT_EQ(frames[i].at("tick"), i + 1);
    EXPECT_EQ(frames[i].at("game"), "CoinCorridor");
    EXPECT_EQ(frames[i].at("action"), std::string(ActionName(rec.actions[i])));
    EXPECT_EQ(frames[i].at("policy").size(), 5u);
  }
}

}  // namespace
}  // namespace thyia

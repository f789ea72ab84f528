#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "thyia/gdf.hpp"
#include "thyia/runtime.hpp"

namespace thyia {
namespace {

namespace fs = std::filesystem;

RuntimeConfig FastConfig(std::vector<std::string> library, std::uint64_t seed = 1) {
  RuntimeConfig c;
  c.library = std::move(library);
  c.params.Set("budget", "100");
  c.params.Set("train_batches", "1");
  c.seed = seed;
  return c;
}

fs::path TempDir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("thyia_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* kTinyGame =
    "game tiny\nsprites\nA hero avatar\nC coin collectible score=1\ntermination\n"
    "all-collected -> win\ntimeout 10 -> loss\nlevel\nA.C\n";

TEST(Moderator, Examples) {
  Moderator open;
  EXPECT_TRUE(open.CheckText("hello there").passed);
  Moderator strict(ModerationConfig{{"spam", "Bad Word"}});
  const auto v = strict.CheckText("this is BAD word territory");
  EXPECT_FALSE(v.passed);
  EXPECT_EQ(v.rule, "blocklist:1");
  EXPECT_EQ(strict.CheckText("SpAm").rule, "blocklist:0");
  EXPECT_EQ(strict.CheckGdf("game x\nsprites\n").rule, "structural:parse");
  EXPECT_EQ(strict.CheckGdf(std::string(kTinyGame) + "# spam\n").rule, "blocklist:0");
  EXPECT_TRUE(strict.CheckGdf(kTinyGame).passed);
  EXPECT_TRUE(strict.CheckGdf(kTinyGame).spec.has_value());
}

TEST(Moderator, StructuralLimits) {
  Moderator m(ModerationConfig{{}, 2, 1000});
  EXPECT_EQ(m.CheckGdf(kTinyGame).rule, "structural:size");
  Moderator t(ModerationConfig{{}, 400, 5});
  EXPECT_EQ(t.CheckGdf(kTinyGame).rule, "structural:timeout");
}

TEST(Runtime, RoundRobin) {
  Runtime rt(FastConfig({"CoinCorridor", "DodgeRunner"}));
  std::vector<std::string> order;
  for (int i = 0; i < 4; ++i) order.push_back(rt.StepCycle().game);
  EXPECT_EQ(order, (std::vector<std::string>{"CoinCorridor", "DodgeRunner", "CoinCorridor", "DodgeRunner"}));
}

TEST(Runtime, PlaySuggestionGoesFirst) {
  Runtime rt(FastConfig({"CoinCorridor", "DodgeRunner"}));
  EXPECT_EQ(rt.StepCycle().game, "CoinCorridor");
  Suggestion s;
  s.kind = SuggestionKind::kPlayGame;
  s.game = "CoinCorridor";
  const auto out = rt.Enqueue(s);
  EXPECT_TRUE(out.accepted);
  EXPECT_EQ(rt.StepCycle().game, "CoinCorridor");
  EXPECT_EQ(rt.StepCycle().game, "DodgeRunner");
}

TEST(Runtime, FairnessGapEqualsLibrarySize) {
  RuntimeConfig c = FastConfig({"CoinCorridor", "DodgeRunner", "KeyDoor"});
  c.params.Set("budget", "50");
  c.params.Set("learning", "off");
  Runtime rt(c);
  std::map<std::string, int> last;
  for (int i = 0; i < 12; ++i) {
    const auto g = rt.StepCycle().game;
    if (last.count(g)) EXPECT_EQ(i - last[g], 3);
    last[g] = i;
  }
  EXPECT_EQ(last.size(), 3u);
}

TEST(Runtime, SuggestionRejections) {
  RuntimeConfig c = FastConfig({"CoinCorridor"});
  c.moderation.blocklist = {"forbidden"};
  Runtime rt(c);
  Suggestion s;
  s.kind = SuggestionKind::kPlayGame;
  s.game = "NoSuchGame";
  EXPECT_EQ(rt.Enqueue(s).rule, "unknown-game");

  s.game.clear();
  s.gdf = std::string(kTinyGame);
  s.gdf.replace(s.gdf.find("tiny"), 4, "Forbidden_tiny");
  const auto blocked = rt.Enqueue(s);
  EXPECT_FALSE(blocked.accepted);
  EXPECT_EQ(blocked.rule, "blocklist:0");
  EXPECT_EQ(blocked.message.find("orbidden"), std::string::npos);

  s.gdf = "game broken\n";
  EXPECT_EQ(rt.Enqueue(s).rule, "structural:parse");

  Suggestion hint;
  hint.kind = SuggestionKind::kStrategyHint;
  hint.bias = {1.0, std::numeric_limits<double>::infinity(), 0, 0, 0};
  EXPECT_EQ(rt.Enqueue(hint).rule, "structural:hint");

  Suggestion who;
  who.kind = SuggestionKind::kQueryStats;
  who.submitter = "FORBIDDEN fan";
  EXPECT_EQ(rt.Enqueue(who).rule, "blocklist:0");

  EXPECT_TRUE(rt.PendingPlays().empty());
  EXPECT_EQ(rt.Stats().rejections, 5);
}

TEST(Runtime, InlineGameJoinsLibraryAndPlaysNext) {
  Runtime rt(FastConfig({"CoinCorridor", "DodgeRunner"}));
  Suggestion s;
  s.kind = SuggestionKind::kPlayGame;
  s.gdf = kTinyGame;
  ASSERT_TRUE(rt.Enqueue(s).accepted);
  EXPECT_EQ(rt.Games().size(), 3u);
  const auto rec = rt.StepCycle();
  EXPECT_EQ(rec.game, "tiny");
  EXPECT_EQ(rec.outcome, Status::kWin);

  const auto dup = rt.UploadGame(std::string(kTinyGame) + "# same rules\n", "x");
  EXPECT_TRUE(dup.accepted);
  std::string changed = kTinyGame;
  changed.replace(changed.find("A.C"), 3, "AC.");
  EXPECT_EQ(rt.UploadGame(changed, "x").rule, "structural:name");
}

TEST(Runtime, ConcurrentSubmissionsKeepArrivalOrder) {
  RuntimeConfig c = FastConfig({"CoinCorridor", "DodgeRunner", "KeyDoor"});
  c.moderation.blocklist = {"nope"};
  Runtime rt(c);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&rt, t] {
      for (int i = 0; i < 25; ++i) {
        Suggestion s;
        s.kind = SuggestionKind::kPlayGame;
        const int n = t * 25 + i;
        s.game = n % 3 == 0 ? "nope" : (n % 3 == 1 ? "KeyDoor" : "DodgeRunner");
        s.submitter = "t" + std::to_string(t) + "-" + std::to_string(i);
        rt.Enqueue(s);
      }
    });
  }
  for (auto& th : threads) th.join();
  std::vector<std::string> accepted_order;
  int rejected = 0;
  for (const auto& e : rt.Events()) {
    if (e.type != "suggestion") continue;
    if (e.data.at("accepted").get<bool>()) {
      accepted_order.push_back(e.data.at("game").get<std::string>());
    } else {
      ++rejected;
    }
  }
  EXPECT_EQ(rejected, 34);
  EXPECT_EQ(rt.PendingPlays(), accepted_order);
  EXPECT_EQ(accepted_order.size(), 66u);
}

TEST(Runtime, ModerationRunsOncePerTextField) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  const long before = rt.moderator().checks();
  Suggestion s;
  s.kind = SuggestionKind::kPlayGame;
  s.game = "CoinCorridor";
  s.submitter = "me";
  rt.Enqueue(s);
  EXPECT_EQ(rt.moderator().checks() - before, 2);
  rt.Command("play CoinCorridor");
  EXPECT_EQ(rt.moderator().checks() - before, 3);
}

TEST(Runtime, StatsZeroAndOneWin) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  const auto empty = rt.Stats();
  EXPECT_EQ(empty.episodes, 0);
  EXPECT_EQ(empty.wins, 0);
  EXPECT_FALSE(empty.win_rate);
  EXPECT_TRUE(StatsToJson(empty).at("win_rate").is_null());
  const auto rec = rt.StepCycle();
  ASSERT_EQ(rec.outcome, Status::kWin);
  const auto one = rt.Stats("CoinCorridor");
  EXPECT_EQ(one.episodes, 1);
  EXPECT_EQ(*one.win_rate, 1.0);
  EXPECT_EQ(*one.max_score, rec.score);
  EXPECT_EQ(one.fingerprint_hash, rt.Fingerprint().Hash());
  EXPECT_GT(one.training_steps, 0u);
}

TEST(Runtime, StatsFromPersistedLogEqualLive) {
  Runtime rt(FastConfig({"CoinCorridor", "DodgeRunner"}));
  for (int i = 0; i < 5; ++i) rt.StepCycle();
  Suggestion s;
  s.kind = SuggestionKind::kPlayGame;
  s.game = "unknown";
  rt.Enqueue(s);
  const auto dir = TempDir("statslog");
  rt.Snapshot(dir);
  std::vector<Event> events;
  std::istringstream log(Slurp(dir / "events.log"));
  std::string line;
  while (std::getline(log, line)) events.push_back(ParseEvent(line));
  fs::remove_all(dir);
  for (const std::string g : {"", "CoinCorridor", "DodgeRunner"}) {
    EXPECT_EQ(ComputeStats(events, g, 20), rt.Stats(g)) << g;
  }
}

TEST(Runtime, EventRoundTrip) {
  Event e{7, "episode", 123, Json{{"game", "x"}, {"score", 3}}};
  const Event back = ParseEvent(FormatEvent(e));
  EXPECT_EQ(back.seq, 7u);
  EXPECT_EQ(back.type, "episode");
  EXPECT_EQ(back.data, e.data);
  EXPECT_THROW(ParseEvent("{not json"), Error);
}

std::vector<EpisodeRecord> Cycles(Runtime& rt, int n) {
  std::vector<EpisodeRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(rt.StepCycle());
  return out;
}

TEST(Snapshot, ContinuationMatchesUninterruptedRun) {
  RuntimeConfig c = FastConfig({"CoinCorridor", "DodgeRunner", "KeyDoor"}, 99);
  Runtime control(c);
  Runtime original(c);
  Cycles(control, 4);
  Cycles(original, 4);
  Suggestion play;
  play.kind = SuggestionKind::kPlayGame;
  play.game = "KeyDoor";
  Suggestion hint;
  hint.kind = SuggestionKind::kStrategyHint;
  hint.bias = {0, 0, 0, 1, 0};
  for (Runtime* rt : {&control, &original}) {
    rt->Enqueue(play);
    rt->Enqueue(hint);
  }
  const auto dir = TempDir("continuation");
  original.Snapshot(dir);
  auto restored = Runtime::Restore(dir, c);
  fs::remove_all(dir);
  EXPECT_EQ(restored->Fingerprint(), control.Fingerprint());
  EXPECT_EQ(restored->PendingPlays(), control.PendingPlays());
  EXPECT_EQ(Cycles(*restored, 10), Cycles(control, 10));
  for (const auto& g : control.Games()) {
    EXPECT_EQ(*restored->Model(g), *control.Model(g)) << g;
    EXPECT_EQ(restored->Bounds(g), control.Bounds(g)) << g;
    EXPECT_EQ(restored->BufferSize(g), control.BufferSize(g)) << g;
  }
}

TEST(Snapshot, ContinuationAcrossTuning) {
  RuntimeConfig c = FastConfig({"CoinCorridor"}, 5);
  c.params.Set("tune_every", "10");
  c.tuning_budget = 4;
  Runtime control(c);
  Runtime original(c);
  Cycles(control, 6);
  Cycles(original, 6);
  const auto dir = TempDir("tuning");
  original.Snapshot(dir);
  auto restored = Runtime::Restore(dir, c);
  fs::remove_all(dir);
  EXPECT_EQ(Cycles(*restored, 10), Cycles(control, 10));
  EXPECT_EQ(restored->Fingerprint(), control.Fingerprint());
  int tuned = 0;
  for (const auto& e : control.Events()) tuned += e.type == "tuned";
  EXPECT_EQ(tuned, 1);
}

TEST(Snapshot, InlineGamesSurvive) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  ASSERT_TRUE(rt.UploadGame(kTinyGame, "me").accepted);
  rt.StepCycle();
  const auto dir = TempDir("inline");
  rt.Snapshot(dir);
  auto restored = Runtime::Restore(dir, FastConfig({"CoinCorridor"}));
  fs::remove_all(dir);
  EXPECT_EQ(restored->Games(), rt.Games());
  EXPECT_EQ(restored->StepCycle(), rt.StepCycle());
}

TEST(Snapshot, MissingIsStructuredError) {
  EXPECT_THROW(Runtime::Restore(TempDir("missing") / "nothing"), SnapshotError);
}

TEST(Snapshot, OverwritesAtomically) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  const auto dir = TempDir("overwrite");
  rt.Snapshot(dir);
  rt.StepCycle();
  rt.Snapshot(dir);
  EXPECT_NE(Slurp(dir / "manifest.txt").find("episodes = 1"), std::string::npos);
  for (const auto& entry : fs::directory_iterator(dir.parent_path())) {
    EXPECT_EQ(entry.path().filename().string().find(".thyia_test_overwrite"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Snapshot, DroppedParameterLineTakesDefault) {
  RuntimeConfig c = FastConfig({"CoinCorridor"});
  Runtime rt(c);
  const auto dir = TempDir("dropped");
  rt.Snapshot(dir);
  std::string fp = Slurp(dir / "fingerprint.txt");
  const std::string line = "budget = 100\n";
  ASSERT_NE(fp.find(line), std::string::npos);
  fp.erase(fp.find(line), line.size());
  std::ofstream(dir / "fingerprint.txt") << fp;
  auto restored = Runtime::Restore(dir, c);
  fs::remove_all(dir);
  EXPECT_EQ(restored->Fingerprint().params.Int("budget"), 500);
}

TEST(Snapshot, ReadableWithExtraRegisteredParameter) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  rt.StepCycle();
  const auto dir = TempDir("extra");
  rt.Snapshot(dir);
  auto defs = DefaultSpace()->defs();
  defs.push_back(ParameterDef{"future_knob", {"a", "b"}, 1, "added later"});
  RuntimeConfig c = FastConfig({"CoinCorridor"});
  c.params = ParameterSet::Defaults(std::make_shared<const ParameterSpace>(defs));
  auto restored = Runtime::Restore(dir, c);
  fs::remove_all(dir);
  EXPECT_EQ(restored->Fingerprint().params.Text("future_knob"), "b");
  EXPECT_EQ(restored->Fingerprint().params.Int("budget"), 100);
  EXPECT_EQ(restored->StepCycle().game, "CoinCorridor");
}

TEST(Runtime, PoisonedQueueBecomesErrorEvent) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  const auto dir = TempDir("poison");
  rt.Snapshot(dir);
  std::ofstream(dir / "queue.jsonl") << "{\"play\":\"ghost\"}\n";
  auto restored = Runtime::Restore(dir, FastConfig({"CoinCorridor"}));
  fs::remove_all(dir);
  const auto rec = restored->StepCycle();
  EXPECT_TRUE(rec.skipped);
  EXPECT_EQ(rec.game, "ghost");
  EXPECT_FALSE(restored->StepCycle().skipped);
  int errors = 0;
  for (const auto& e : restored->Events()) errors += e.type == "error";
  EXPECT_EQ(errors, 1);
  EXPECT_EQ(restored->Stats().skipped, 1);
}

TEST(LiveFeed, SlowSubscriberDropped) {
  LiveFeed feed(3);
  auto slow = feed.Subscribe();
  auto fast = feed.Subscribe();
  for (int i = 0; i < 5; ++i) {
    LiveFrame f;
    f.tick = i;
    feed.Publish(f);
    auto got = fast->Next(std::chrono::milliseconds(0));
    ASSERT_TRUE(got);
    EXPECT_EQ(got->seq, static_cast<std::uint64_t>(i));
  }
  EXPECT_TRUE(slow->closed());
  EXPECT_FALSE(fast->closed());
  EXPECT_EQ(feed.dropped(), 1u);
  EXPECT_EQ(feed.subscribers(), 1u);
  EXPECT_EQ(feed.published(), 5u);
}

TEST(LiveFeed, FramesFromEpisodeInOrder) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  auto sub = rt.live().Subscribe();
  const auto rec = rt.StepCycle();
  std::vector<int> ticks;
  while (auto f = sub->Next(std::chrono::milliseconds(0))) {
    EXPECT_EQ(f->game, "CoinCorridor");
    ticks.push_back(f->tick);
  }
  ASSERT_EQ(static_cast<int>(ticks.size()), rec.ticks);
  for (std::size_t i = 0; i < ticks.size(); ++i) EXPECT_EQ(ticks[i], static_cast<int>(i) + 1);
}

TEST(Runtime, HintAppliesToOneEpisode) {
  Runtime rt(FastConfig({"DodgeRunner"}));
  Suggestion hint;
  hint.kind = SuggestionKind::kStrategyHint;
  hint.bias = {0, 0, 0, 0, 2};
  ASSERT_TRUE(rt.Enqueue(hint).accepted);
  EXPECT_EQ(rt.PendingHints().size(), 1u);
  ASSERT_TRUE(rt.Status().next_hint);
  rt.StepCycle();
  EXPECT_TRUE(rt.PendingHints().empty());
}

TEST(Runtime, Commands) {
  RuntimeConfig c = FastConfig({"CoinCorridor", "DodgeRunner"});
  c.moderation.blocklist = {"rude"};
  Runtime rt(c);
  EXPECT_NE(rt.Command("help").find("play <game>"), std::string::npos);
  EXPECT_EQ(rt.Command("games"), "CoinCorridor, DodgeRunner");
  EXPECT_EQ(rt.Command("play DodgeRunner"), "queued DodgeRunner");
  EXPECT_EQ(rt.PendingPlays(), std::vector<std::string>{"DodgeRunner"});
  EXPECT_EQ(rt.Command("play Nothing"), "rejected: unknown-game");
  EXPECT_NE(rt.Command("stats CoinCorridor").find("win rate undefined"), std::string::npos);
  EXPECT_EQ(rt.Command("dance"), "I don't know that one yet. Try: help");
  EXPECT_EQ(rt.Command("play RUDE game"), "rejected: blocklist:0");
}

TEST(Runtime, PauseBlocksLoopUntilResume) {
  Runtime rt(FastConfig({"CoinCorridor"}));
  rt.Pause();
  std::atomic<bool> stop{false};
  std::thread loop([&] { rt.RunLoop(stop, 2); });
  std::this_thread::sleep_for(std::chrono::milliseconds(250));
  EXPECT_EQ(rt.Status().episodes, 0u);
  rt.Resume();
  loop.join();
  EXPECT_EQ(rt.Status().episodes, 2u);
}

TEST(Runtime, LearningProgressOnCoinCorridor) {
  RuntimeConfig c = FastConfig({"CoinCorridor"}, 3);
  c.params.Set("budget", "50");
  Runtime rt(c);
  std::vector<int> scores;
  for (int i = 0; i < 100; ++i) scores.push_back(rt.StepCycle().score);
  double first = 0, last = 0;
  for (int i = 0; i < 20; ++i) {
    first += scores[i];
    last += scores[80 + i];
  }
  std::cout << "first 20 mean " << first / 20 << ", last 20 mean " << last / 20 << "\n";
  EXPECT_GE(last, first);
  EXPECT_GT(rt.Model("CoinCorridor")->steps, 0u);
}

}  // namespace
}  // namespace thyia

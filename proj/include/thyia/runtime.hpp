#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thyia/episode.hpp"
#include "thyia/game.hpp"
#include "thyia/learner.hpp"
#include "thyia/moderation.hpp"
#include "thyia/params.hpp"

namespace thyia {

using Json = nlohmann::json;

// Bounded broadcast of live frames. A subscriber whose queue is full is
// dropped; publishing never blocks on readers.
class LiveFeed {
 public:
  class Subscription {
   public:
    explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

    // Waits up to `timeout`; nullopt on timeout or once dropped/closed.
    std::optional<LiveFrame> Next(std::chrono::milliseconds timeout);
    bool closed() const;

   private:
    friend class LiveFeed;
    bool Offer(const LiveFrame& frame);
    void Close();

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<LiveFrame> frames_;
    bool closed_ = false;
  };

  explicit LiveFeed(std::size_t capacity = 256) : capacity_(capacity) {}

  std::shared_ptr<Subscription> Subscribe();
  void Unsubscribe(const std::shared_ptr<Subscription>& subscription);
  // Stamps the sequence number and fans out.
  void Publish(LiveFrame frame);

  std::size_t subscribers() const;
  std::uint64_t published() const;
  std::uint64_t dropped() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dropped_ = 0;
};

Json FrameToJson(const LiveFrame& frame);

enum class SuggestionKind { kPlayGame, kStrategyHint, kQueryStats };

const char* SuggestionKindName(SuggestionKind kind);
std::optional<SuggestionKind> SuggestionKindFromName(std::string_view name);

struct Suggestion {
  SuggestionKind kind = SuggestionKind::kPlayGame;
  // play-game: library id, or empty when `gdf` carries an inline game.
  std::string game;
  std::string gdf;
  // strategy-hint: additive bias over actions.
  Policy bias{};
  std::string submitter;
  std::int64_t timestamp_ms = 0;
};

struct SuggestionOutcome {
  bool accepted = false;
  // Rule id on rejection; never the offending text.
  std::string rule;
  std::string game;
  std::string message;
};

// One line of the event log.
struct Event {
  std::uint64_t seq = 0;
  std::string type;
  std::int64_t time_ms = 0;
  Json data;
};

std::string FormatEvent(const Event& event);
Event ParseEvent(std::string_view line);

struct StatsReport {
  std::string scope = "all";
  std::int64_t episodes = 0;
  std::int64_t wins = 0;
  std::int64_t skipped = 0;
  std::int64_t rejections = 0;
  std::optional<double> win_rate;
  std::optional<double> mean_score;
  std::optional<int> max_score;
  // Scores of the last `window` episodes, oldest first.
  std::vector<int> trend;
  std::uint64_t training_steps = 0;
  std::uint64_t fingerprint_hash = 0;

  bool operator==(const StatsReport&) const = default;
};

// Pure over the log. `game` empty means all games.
StatsReport ComputeStats(const std::vector<Event>& events, const std::string& game, int window);
Json StatsToJson(const StatsReport& report);

struct RuntimeConfig {
  std::vector<std::string> library = {"CoinCorridor", "CoinMaze", "DodgeRunner", "KeyDoor"};
  ParameterSet params = ParameterSet::Defaults(DefaultSpace());
  std::uint64_t seed = 0;
  ModerationConfig moderation;
  std::size_t live_queue = 256;
  int stats_window = 20;
  // Online tuning run size (evaluations) and episodes per evaluation.
  int tuning_budget = 8;
  int tuning_episodes = 1;
};

struct RuntimeStatus {
  std::string game;
  int tick = 0;
  int score = 0;
  std::uint64_t fingerprint_hash = 0;
  double uptime_s = 0.0;
  bool paused = false;
  std::uint64_t episodes = 0;
  std::optional<Policy> next_hint;
};

Json StatusToJson(const RuntimeStatus& status);

class SnapshotError : public Error {
 public:
  using Error::Error;
};

// The always-on coordinator. StepCycle runs on one thread; Enqueue, Command,
// Stats and Status may be called from any thread.
class Runtime {
 public:
  explicit Runtime(RuntimeConfig config);
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // Plays one scheduled episode, learns from it and maybe tunes. Never
  // throws for game or training failures: those become error events.
  EpisodeRecord StepCycle();

  // Runs until `stop` is set, or `max_episodes` cycles when non-zero.
  // Honours pause/resume between episodes.
  void RunLoop(const std::atomic<bool>& stop, std::uint64_t max_episodes = 0);

  SuggestionOutcome Enqueue(const Suggestion& suggestion);
  // Inline game upload to the library.
  SuggestionOutcome UploadGame(const std::string& gdf, const std::string& submitter);
  // Keyword commands: play <game>, stats <game>, games, help.
  std::string Command(const std::string& line);

  StatsReport Stats(const std::string& game = "") const;
  RuntimeStatus Status() const;
  std::vector<std::string> Games() const;
  std::vector<Event> Events() const;
  std::vector<std::string> PendingPlays() const;
  std::vector<Policy> PendingHints() const;
  AgentFingerprint Fingerprint() const;
  // Model of a game, or null before the game's first trained episode.
  std::shared_ptr<const ModelWeights> Model(const std::string& game) const;
  std::optional<ScoreBounds> Bounds(const std::string& game) const;
  std::size_t BufferSize(const std::string& game) const;

  void Pause();
  void Resume();
  bool paused() const { return paused_.load(); }

  LiveFeed& live() { return live_; }
  const Moderator& moderator() const { return moderator_; }

  // Waits for the current episode to finish, then writes the complete state
  // atomically to `dir`.
  void Snapshot(const std::filesystem::path& dir) const;
  // Throws SnapshotError for a missing or corrupt snapshot. Library,
  // fingerprint and learned state come from the snapshot; the rest of
  // `config` (moderation, live queue, window) is kept.
  static std::unique_ptr<Runtime> Restore(const std::filesystem::path& dir,
                                          RuntimeConfig config = {});

 private:
  struct GameEntry {
    std::string id;
    std::shared_ptr<const GameSpec> spec;
    // Coordinator-owned below (guarded by cycle_mutex_).
    std::shared_ptr<const ModelWeights> model;
    ScoreBounds bounds;
    ReplayBuffer buffer;
    std::uint64_t episodes = 0;
    std::deque<double> recent;
  };

  std::shared_ptr<GameEntry> FindLocked(const std::string& id) const;
  std::string NextGameLocked();
  void LogLocked(std::string type, Json data);
  void Log(std::string type, Json data);
  SuggestionOutcome AddGameLocked(GameSpec spec);
  SuggestionOutcome EnqueueModerated(const Suggestion& suggestion, bool game_checked);
  void TrainAfterEpisode(GameEntry& entry, const EpisodeResult& result, const ParameterSet& params,
                         std::uint64_t episode);
  void MaybeTune(GameEntry& entry, const ParameterSet& params, std::uint64_t episode);

  RuntimeConfig config_;
  Moderator moderator_;
  LiveFeed live_;
  std::chrono::steady_clock::time_point started_;

  mutable std::mutex cycle_mutex_;
  mutable std::mutex mutex_;
  std::condition_variable pause_cv_;
  std::atomic<bool> paused_{false};

  AgentFingerprint fingerprint_;
  std::vector<std::shared_ptr<GameEntry>> games_;
  std::deque<std::string> plays_;
  std::deque<Policy> hints_;
  std::uint64_t round_robin_ = 0;
  std::uint64_t episodes_ = 0;
  std::vector<Event> events_;
  std::uint64_t next_event_ = 0;
  std::vector<std::string> tuner_log_;
  RuntimeStatus status_;
};

}  // namespace thyia

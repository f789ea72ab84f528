#include "thyia/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "thyia/builtin_games.hpp"
#include "thyia/gdf.hpp"
#include "thyia/ntbea.hpp"

namespace thyia {

namespace {

constexpr std::uint64_t kSaltPlanner = 0x706c616e;
constexpr std::uint64_t kSaltLevel = 0x6c65766c;
constexpr std::uint64_t kSaltTrain = 0x74726e;
constexpr std::uint64_t kSaltTune = 0x74756e65;
constexpr std::uint64_t kSaltInit = 0x696e6974;

std::int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool LearningOn(const ParameterSet& params) { return params.Flag("learning"); }

Json PolicyToJson(const Policy& p) { return Json(std::vector<double>(p.begin(), p.end())); }

}  // namespace

// ---- live feed

std::optional<LiveFrame> LiveFeed::Subscription::Next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !frames_.empty(); });
  if (frames_.empty()) return std::nullopt;
  LiveFrame frame = std::move(frames_.front());
  frames_.pop_front();
  return frame;
}

bool LiveFeed::Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

bool LiveFeed::Subscription::Offer(const LiveFrame& frame) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    if (frames_.size() >= capacity_) {
      closed_ = true;
      frames_.clear();
    } else {
      frames_.push_back(frame);
    }
  }
  cv_.notify_all();
  return !closed();
}

void LiveFeed::Subscription::Close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::shared_ptr<LiveFeed::Subscription> LiveFeed::Subscribe() {
  auto sub = std::make_shared<Subscription>(capacity_);
  std::lock_guard lock(mutex_);
  subscribers_.push_back(sub);
  return sub;
}

void LiveFeed::Unsubscribe(const std::shared_ptr<Subscription>& subscription) {
  std::lock_guard lock(mutex_);
  std::erase(subscribers_, subscription);
  subscription->Close();
}

void LiveFeed::Publish(LiveFrame frame) {
  std::lock_guard lock(mutex_);
  frame.seq = next_seq_++;
  std::erase_if(subscribers_, [&](const std::shared_ptr<Subscription>& sub) {
    if (sub->Offer(frame)) return false;
    ++dropped_;
    return true;
  });
}

std::size_t LiveFeed::subscribers() const {
  std::lock_guard lock(mutex_);
  return subscribers_.size();
}

std::uint64_t LiveFeed::published() const {
  std::lock_guard lock(mutex_);
  return next_seq_;
}

std::uint64_t LiveFeed::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

Json FrameToJson(const LiveFrame& frame) {
  Json grid = Json::array();
  for (int y = 0; y < frame.observation.height; ++y) {
    Json row = Json::array();
    for (int x = 0; x < frame.observation.width; ++x) {
      Json cell = Json::array();
      for (int k = 0; k < kNumSpriteKinds; ++k) {
        if (frame.observation.Has(x, y, static_cast<SpriteKind>(k))) {
          cell.push_back(SpriteKindName(static_cast<SpriteKind>(k)));
        }
      }
      row.push_back(std::move(cell));
    }
    grid.push_back(std::move(row));
  }
  return Json{{"seq", frame.seq},
              {"game", frame.game},
              {"tick", frame.tick},
              {"width", frame.observation.width},
              {"height", frame.observation.height},
              {"grid", std::move(grid)},
              {"score", frame.score},
              {"action", ActionName(frame.action)},
              {"policy", PolicyToJson(frame.policy)}};
}

// ---- suggestions and events

const char* SuggestionKindName(SuggestionKind kind) {
  switch (kind) {
    case SuggestionKind::kPlayGame: return "play-game";
    case SuggestionKind::kStrategyHint: return "strategy-hint";
    case SuggestionKind::kQueryStats: return "query-stats";
  }
  return "?";
}

std::optional<SuggestionKind> SuggestionKindFromName(std::string_view name) {
  if (name == "play-game") return SuggestionKind::kPlayGame;
  if (name == "strategy-hint") return SuggestionKind::kStrategyHint;
  if (name == "query-stats") return SuggestionKind::kQueryStats;
  return std::nullopt;
}

std::string FormatEvent(const Event& e) {
  return Json{{"seq", e.seq}, {"type", e.type}, {"time_ms", e.time_ms}, {"data", e.data}}.dump();
}

Event ParseEvent(std::string_view line) {
  try {
    const Json j = Json::parse(line);
    Event e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.type = j.at("type").get<std::string>();
    e.time_ms = j.at("time_ms").get<std::int64_t>();
    e.data = j.at("data");
    return e;
  } catch (const Json::exception& ex) {
    throw Error(std::string("malformed event line: ") + ex.what());
  }
}

StatsReport ComputeStats(const std::vector<Event>& events, const std::string& game, int window) {
  StatsReport r;
  r.scope = game.empty() ? "all" : game;
  std::map<std::string, std::uint64_t> steps;
  std::vector<int> scores;
  double total = 0.0;
  for (const Event& e : events) {
    if (e.type == "fingerprint") {
      r.fingerprint_hash = e.data.at("hash").get<std::uint64_t>();
    } else if (e.type == "suggestion" && !e.data.at("accepted").get<bool>()) {
      ++r.rejections;
    } else if (e.type == "episode") {
      const auto id = e.data.at("game").get<std::string>();
      if (!game.empty() && id != game) continue;
      if (e.data.value("skipped", false)) {
        ++r.skipped;
        continue;
      }
      ++r.episodes;
      if (e.data.at("outcome").get<std::string>() == "win") ++r.wins;
      const int score = e.data.at("score").get<int>();
      scores.push_back(score);
      total += score;
      r.max_score = std::max(r.max_score.value_or(score), score);
      steps[id] = e.data.at("model_steps").get<std::uint64_t>();
    }
  }
  if (r.episodes > 0) {
    r.win_rate = static_cast<double>(r.wins) / static_cast<double>(r.episodes);
    r.mean_score = total / static_cast<double>(r.episodes);
  }
  const auto keep = std::min<std::size_t>(scores.size(), static_cast<std::size_t>(std::max(window, 0)));
  r.trend.assign(scores.end() - static_cast<std::ptrdiff_t>(keep), scores.end());
  for (const auto& [id, n] : steps) r.training_steps += n;
  return r;
}

Json StatsToJson(const StatsReport& r) {
  auto opt = [](const auto& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"scope", r.scope},
              {"episodes", r.episodes},
              {"wins", r.wins},
              {"skipped", r.skipped},
              {"rejections", r.rejections},
              {"win_rate", opt(r.win_rate)},
              {"mean_score", opt(r.mean_score)},
              {"max_score", opt(r.max_score)},
              {"trend", r.trend},
              {"training_steps", r.training_steps},
              {"fingerprint_hash", HexU64(r.fingerprint_hash)}};
}

Json StatusToJson(const RuntimeStatus& s) {
  return Json{{"game", s.game},
              {"tick", s.tick},
              {"score", s.score},
              {"fingerprint_hash", HexU64(s.fingerprint_hash)},
              {"uptime_s", s.uptime_s},
              {"paused", s.paused},
              {"episodes", s.episodes},
              {"hint", s.next_hint ? PolicyToJson(*s.next_hint) : Json(nullptr)}};
}

// ---- runtime

Runtime::Runtime(RuntimeConfig config)
    : config_(std::move(config)),
      moderator_(config_.moderation),
      live_(config_.live_queue),
      started_(std::chrono::steady_clock::now()),
      fingerprint_(MakeFingerprint(config_.params, config_.seed)) {
  if (config_.library.empty()) throw ContractViolation("game library is empty");
  for (const auto& id : config_.library) {
    auto entry = std::make_shared<GameEntry>();
    entry->id = id;
    entry->spec = BuiltinGame(id);
    entry->bounds = InitialBounds(*entry->spec);
    entry->buffer.set_capacity(static_cast<std::size_t>(config_.params.Int("replay_capacity")));
    games_.push_back(std::move(entry));
  }
  LogLocked("fingerprint", Json{{"hash", fingerprint_.Hash()}, {"seed", fingerprint_.seed}});
}

Runtime::~Runtime() { Resume(); }

std::shared_ptr<Runtime::GameEntry> Runtime::FindLocked(const std::string& id) const {
  for (const auto& g : games_) {
    if (g->id == id) return g;
  }
  return nullptr;
}

std::string Runtime::NextGameLocked() {
  if (!plays_.empty()) {
    std::string id = std::move(plays_.front());
    plays_.pop_front();
    return id;
  }
  const auto& entry = games_[round_robin_ % games_.size()];
  ++round_robin_;
  return entry->id;
}

void Runtime::LogLocked(std::string type, Json data) {
  events_.push_back(Event{next_event_++, std::move(type), NowMs(), std::move(data)});
}

void Runtime::Log(std::string type, Json data) {
  std::lock_guard lock(mutex_);
  LogLocked(std::move(type), std::move(data));
}

EpisodeRecord Runtime::StepCycle() {
  std::lock_guard cycle(cycle_mutex_);
  std::shared_ptr<GameEntry> entry;
  std::optional<Policy> hint;
  std::uint64_t episode = 0;
  std::string id;
  std::optional<ParameterSet> params;
  std::uint64_t fp_hash = 0;
  std::uint64_t seed = 0;
  {
    std::lock_guard lock(mutex_);
    id = NextGameLocked();
    entry = FindLocked(id);
    if (!hints_.empty()) {
      hint = hints_.front();
      hints_.pop_front();
    }
    episode = episodes_++;
    params = fingerprint_.params;
    fp_hash = fingerprint_.Hash();
    seed = fingerprint_.seed;
    status_.game = id;
    status_.tick = 0;
    status_.score = 0;
  }

  EpisodeRecord record;
  record.game = id;
  record.fingerprint_hash = fp_hash;
  try {
    if (!entry) throw Error("game not in library: " + id);
    const bool learning = LearningOn(*params);
    if (learning && !entry->model) {
      entry->model = std::make_shared<const ModelWeights>(
          InitModel(id, SizesFor(*entry->spec, *params), DeriveSeed(seed ^ Fnv1a64(id), kSaltInit)));
    }
    std::optional<MlpPolicyValue> guide;
    if (learning) guide.emplace(entry->model, *entry->spec, entry->bounds);

    EpisodeOptions options;
    options.model = guide ? &*guide : nullptr;
    options.hint = hint;
    options.record_ticks = learning;
    options.on_frame = [&](const LiveFrame& frame) {
      {
        std::lock_guard lock(mutex_);
        status_.tick = frame.tick;
        status_.score = frame.score;
      }
      live_.Publish(frame);
    };
    EpisodeResult result =
        PlayEpisode(entry->spec, *params, DeriveSeed(DeriveSeed(seed, kSaltPlanner), episode),
                    DeriveSeed(DeriveSeed(seed, kSaltLevel), episode), entry->bounds, options);
    record = result.record;
    record.fingerprint_hash = fp_hash;
    ++entry->episodes;
    entry->recent.push_back(result.fitness);
    const int tune_every = params->Int("tune_every");
    const auto keep = static_cast<std::size_t>(std::max(tune_every, 1));
    while (entry->recent.size() > keep) entry->recent.pop_front();

    if (learning) TrainAfterEpisode(*entry, result, *params, episode);
    record.model_version = entry->model ? entry->model->steps : 0;
    if (tune_every > 0 && entry->episodes % static_cast<std::uint64_t>(tune_every) == 0) {
      MaybeTune(*entry, *params, episode);
    }
  } catch (const std::exception& ex) {
    record.skipped = true;
    record.error = ex.what();
    Log("error", Json{{"game", id}, {"episode", episode}, {"message", ex.what()}});
  }

  Log("episode", Json{{"game", record.game},
                      {"episode", episode},
                      {"fingerprint", HexU64(record.fingerprint_hash)},
                      {"model_steps", record.model_version},
                      {"ticks", record.ticks},
                      {"score", record.score},
                      {"outcome", StatusName(record.outcome)},
                      {"actions", ActionTrace(record.actions)},
                      {"skipped", record.skipped}});
  return record;
}

void Runtime::TrainAfterEpisode(GameEntry& entry, const EpisodeResult& result,
                                const ParameterSet& params, std::uint64_t episode) {
  RecordEpisode(entry.buffer, result.ticks, result.fitness);
  ModelWeights next = *entry.model;
  Rng rng(DeriveSeed(DeriveSeed(fingerprint_.seed, kSaltTrain), episode));
  try {
    TrainFromBuffer(next, entry.buffer, params, rng);
    entry.model = std::make_shared<const ModelWeights>(std::move(next));
  } catch (const TrainingError& ex) {
    Log("error", Json{{"game", entry.id}, {"episode", episode}, {"message", ex.what()}});
  }
}

void Runtime::MaybeTune(GameEntry& entry, const ParameterSet& params, std::uint64_t episode) {
  const std::uint64_t seed = DeriveSeed(DeriveSeed(fingerprint_.seed, kSaltTune), episode);
  std::optional<MlpPolicyValue> guide;
  if (entry.model) guide.emplace(entry.model, *entry.spec, entry.bounds);
  GameTuningProblem problem(entry.spec, params, OnlineTunedParameters(), config_.tuning_episodes,
                            seed, guide ? &*guide : nullptr, entry.bounds);
  Point start;
  for (const auto& name : OnlineTunedParameters()) {
    start.push_back(params.index(*params.space().IndexOf(name)));
  }
  NtbeaConfig cfg;
  cfg.budget = config_.tuning_budget;
  cfg.neighbours = 20;
  cfg.seed = seed;
  NtbeaResult result = RunNtbea(problem, cfg, start);

  double sum = 0.0;
  int n = 0;
  for (const auto& rec : result.log) {
    if (rec.point == result.recommended.indices()) {
      sum += rec.reward;
      ++n;
    }
  }
  const double candidate = n > 0 ? sum / n : 0.0;
  double incumbent = 0.0;
  for (double f : entry.recent) incumbent += f;
  if (!entry.recent.empty()) incumbent /= static_cast<double>(entry.recent.size());
  const bool apply = candidate > incumbent;

  std::lock_guard lock(mutex_);
  for (const auto& rec : result.log) tuner_log_.push_back(entry.id + "," + FormatLogLine(rec));
  LogLocked("tuned", Json{{"game", entry.id},
                          {"candidate", candidate},
                          {"incumbent", incumbent},
                          {"applied", apply}});
  if (apply) {
    fingerprint_.params = problem.Expand(result.recommended);
    LogLocked("fingerprint", Json{{"hash", fingerprint_.Hash()}, {"seed", fingerprint_.seed}});
  }
}

void Runtime::RunLoop(const std::atomic<bool>& stop, std::uint64_t max_episodes) {
  std::uint64_t done = 0;
  while (!stop.load() && (max_episodes == 0 || done < max_episodes)) {
    {
      std::unique_lock lock(mutex_);
      pause_cv_.wait_for(lock, std::chrono::milliseconds(100),
                         [&] { return !paused_.load() || stop.load(); });
      if (paused_.load()) continue;
    }
    StepCycle();
    ++done;
  }
}

void Runtime::Pause() {
  paused_ = true;
  Log("admin", Json{{"action", "pause"}});
}

void Runtime::Resume() {
  if (paused_.exchange(false)) Log("admin", Json{{"action", "resume"}});
  pause_cv_.notify_all();
}

SuggestionOutcome Runtime::AddGameLocked(GameSpec spec) {
  SuggestionOutcome out;
  out.game = spec.name;
  if (auto existing = FindLocked(spec.name)) {
    if (SerializeGdf(*existing->spec) != SerializeGdf(spec)) {
      out.rule = "structural:name";
      return out;
    }
    out.accepted = true;
    out.message = "already in library";
    return out;
  }
  auto entry = std::make_shared<GameEntry>();
  entry->id = spec.name;
  entry->spec = std::make_shared<const GameSpec>(std::move(spec));
  entry->bounds = InitialBounds(*entry->spec);
  entry->buffer.set_capacity(
      static_cast<std::size_t>(fingerprint_.params.Int("replay_capacity")));
  games_.push_back(std::move(entry));
  out.accepted = true;
  out.message = "added to library";
  return out;
}

SuggestionOutcome Runtime::UploadGame(const std::string& gdf, const std::string& submitter) {
  const ModerationVerdict who = moderator_.CheckText(submitter);
  ModerationVerdict verdict = moderator_.CheckGdf(gdf);
  std::lock_guard lock(mutex_);
  SuggestionOutcome out;
  if (!who.passed) {
    out.rule = who.rule;
  } else if (!verdict.passed) {
    out.rule = verdict.rule;
  } else {
    out = AddGameLocked(std::move(*verdict.spec));
  }
  LogLocked("suggestion", Json{{"kind", "upload"},
                               {"accepted", out.accepted},
                               {"rule", out.rule},
                               {"game", out.accepted ? out.game : ""}});
  return out;
}

SuggestionOutcome Runtime::Enqueue(const Suggestion& s) {
  const ModerationVerdict who = moderator_.CheckText(s.submitter);
  if (!who.passed) {
    SuggestionOutcome out;
    out.rule = who.rule;
    Log("suggestion", Json{{"kind", SuggestionKindName(s.kind)}, {"accepted", false},
                           {"rule", out.rule}, {"game", ""}});
    return out;
  }
  return EnqueueModerated(s, false);
}

// The submitter has been checked by the caller; `game_checked` says the game
// id came from already-moderated text.
SuggestionOutcome Runtime::EnqueueModerated(const Suggestion& s, bool game_checked) {
  SuggestionOutcome out;
  std::optional<GameSpec> inline_spec;
  if (!s.game.empty() && !game_checked) {
    const auto v = moderator_.CheckText(s.game);
    if (!v.passed) out.rule = v.rule;
  }
  if (out.rule.empty() && !s.gdf.empty()) {
    auto v = moderator_.CheckGdf(s.gdf);
    if (!v.passed) {
      out.rule = v.rule;
    } else {
      inline_spec = std::move(v.spec);
    }
  }

  std::lock_guard lock(mutex_);
  if (out.rule.empty()) {
    switch (s.kind) {
      case SuggestionKind::kPlayGame:
        if (inline_spec) {
          out = AddGameLocked(std::move(*inline_spec));
        } else if (FindLocked(s.game)) {
          out.accepted = true;
          out.game = s.game;
        } else {
          out.rule = "unknown-game";
        }
        if (out.accepted) {
          plays_.push_back(out.game);
          out.message = "queued " + out.game;
        }
        break;
      case SuggestionKind::kStrategyHint: {
        const bool finite =
            std::all_of(s.bias.begin(), s.bias.end(), [](double b) { return std::isfinite(b); });
        if (!finite) {
          out.rule = "structural:hint";
        } else {
          hints_.push_back(s.bias);
          out.accepted = true;
          out.message = "hint applies to the next episode";
        }
        break;
      }
      case SuggestionKind::kQueryStats:
        if (!s.game.empty() && !FindLocked(s.game)) {
          out.rule = "unknown-game";
        } else {
          out.accepted = true;
          out.game = s.game;
          out.message = StatsToJson(ComputeStats(events_, s.game, config_.stats_window)).dump();
        }
        break;
    }
  }
  LogLocked("suggestion", Json{{"kind", SuggestionKindName(s.kind)},
                               {"accepted", out.accepted},
                               {"rule", out.rule},
                               {"game", out.accepted ? out.game : ""}});
  return out;
}

std::string Runtime::Command(const std::string& line) {
  const ModerationVerdict verdict = moderator_.CheckText(line);
  if (!verdict.passed) {
    Log("command", Json{{"accepted", false}, {"rule", verdict.rule}});
    return "rejected: " + verdict.rule;
  }
  std::istringstream in(line);
  std::string word;
  std::string arg;
  in >> word;
  std::getline(in >> std::ws, arg);
  word = ToLower(word);
  Log("command", Json{{"accepted", true}, {"keyword", word}});

  if (word == "help") {
    return "commands: play <game>, stats <game>, games, help";
  }
  if (word == "games") {
    std::string out;
    for (const auto& g : Games()) out += (out.empty() ? "" : ", ") + g;
    return out;
  }
  if (word == "play" && !arg.empty()) {
    Suggestion s;
    s.kind = SuggestionKind::kPlayGame;
    s.game = arg;
    s.submitter = "command";
    const auto out = EnqueueModerated(s, true);
    return out.accepted ? out.message : "rejected: " + out.rule;
  }
  if (word == "stats") {
    {
      std::lock_guard lock(mutex_);
      if (!arg.empty() && !FindLocked(arg)) return "unknown game: " + arg;
    }
    const StatsReport r = Stats(arg);
    std::ostringstream out;
    out << r.scope << ": " << r.episodes << " episodes, ";
    if (r.win_rate) {
      out << "win rate " << *r.win_rate << ", mean score " << *r.mean_score;
    } else {
      out << "win rate undefined";
    }
    return out.str();
  }
  return "I don't know that one yet. Try: help";
}

StatsReport Runtime::Stats(const std::string& game) const {
  std::lock_guard lock(mutex_);
  return ComputeStats(events_, game, config_.stats_window);
}

RuntimeStatus Runtime::Status() const {
  std::lock_guard lock(mutex_);
  RuntimeStatus s = status_;
  s.fingerprint_hash = fingerprint_.Hash();
  s.uptime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  s.paused = paused_.load();
  s.episodes = episodes_;
  if (!hints_.empty()) s.next_hint = hints_.front();
  return s;
}

std::vector<std::string> Runtime::Games() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& g : games_) out.push_back(g->id);
  return out;
}

std::vector<Event> Runtime::Events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

std::vector<std::string> Runtime::PendingPlays() const {
  std::lock_guard lock(mutex_);
  return {plays_.begin(), plays_.end()};
}

std::vector<Policy> Runtime::PendingHints() const {
  std::lock_guard lock(mutex_);
  return {hints_.begin(), hints_.end()};
}

AgentFingerprint Runtime::Fingerprint() const {
  std::lock_guard lock(mutex_);
  return fingerprint_;
}

std::shared_ptr<const ModelWeights> Runtime::Model(const std::string& game) const {
  std::lock_guard cycle(cycle_mutex_);
  std::lock_guard lock(mutex_);
  auto entry = FindLocked(game);
  return entry ? entry->model : nullptr;
}

std::optional<ScoreBounds> Runtime::Bounds(const std::string& game) const {
  std::lock_guard cycle(cycle_mutex_);
  std::lock_guard lock(mutex_);
  auto entry = FindLocked(game);
  if (!entry) return std::nullopt;
  return entry->bounds;
}

std::size_t Runtime::BufferSize(const std::string& game) const {
  std::lock_guard cycle(cycle_mutex_);
  std::lock_guard lock(mutex_);
  auto entry = FindLocked(game);
  return entry ? entry->buffer.size() : 0;
}

}  // namespace thyia

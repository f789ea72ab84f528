#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "thyia/common.hpp"

namespace thyia {

// Canonical order is part of the model/planner contract: policy vectors are
// indexed by these values.
enum class Action : std::uint8_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kNil = 4 };

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::kUp, Action::kDown, Action::kLeft, Action::kRight, Action::kNil};

inline int ActionIndex(Action a) { return static_cast<int>(a); }
inline Action ActionFromIndex(std::size_t i) { return kAllActions.at(i); }
std::string_view ActionName(Action a);
std::optional<Action> ActionFromName(std::string_view name);

enum class SpriteKind : std::uint8_t {
  kAvatar = 0,
  kSolid,
  kCollectible,
  kLethal,
  kChaser,
  kKey,
  kDoor,
  kGoal,
};
inline constexpr int kNumSpriteKinds = 8;

std::string_view SpriteKindName(SpriteKind kind);
std::optional<SpriteKind> SpriteKindFromName(std::string_view name);

struct SpriteDef {
  char symbol = '?';
  std::string name;
  SpriteKind kind = SpriteKind::kSolid;
  int score_delta = 0;
  double move_noise = 0.0;  // chasers only

  bool operator==(const SpriteDef&) const = default;
};

enum class Condition : std::uint8_t { kAllCollected, kAvatarOnGoal, kAvatarDead, kTimeout };
enum class Outcome : std::uint8_t { kWin, kLoss };

struct TerminationRule {
  Condition condition = Condition::kTimeout;
  int timeout_ticks = 0;  // kTimeout only
  Outcome outcome = Outcome::kLoss;

  bool operator==(const TerminationRule&) const = default;
};

// Parsed game rules. Sprites are kept sorted by symbol; rules keep their
// declaration order since the first satisfied rule wins.
struct GameSpec {
  std::string name;
  std::vector<SpriteDef> sprites;
  std::vector<TerminationRule> termination;
  std::vector<std::string> level;

  int width() const { return level.empty() ? 0 : static_cast<int>(level.front().size()); }
  int height() const { return static_cast<int>(level.size()); }
  // Tick bound from the (mandatory) timeout rule.
  int timeout() const;
  // Index into `sprites`, or -1.
  int SpriteIndex(char symbol) const;
  bool HasRule(Condition c) const;

  bool operator==(const GameSpec&) const = default;
};

enum class Status : std::uint8_t { kRunning, kWin, kLoss };
std::string_view StatusName(Status s);

struct Pos {
  int x = 0;
  int y = 0;
  bool operator==(const Pos&) const = default;
};

// Running min/max of the score seen for one game.
struct ScoreBounds {
  int min = 0;
  int max = 0;

  void Observe(int score) {
    if (score < min) min = score;
    if (score > max) max = score;
  }
  bool operator==(const ScoreBounds&) const = default;
};

// Starting bounds for a game: [0, total positive score placed in the level].
ScoreBounds InitialBounds(const GameSpec& spec);

// W x H grid; each cell is a bit-set over SpriteKind values.
struct GridObservation {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  std::uint8_t at(int x, int y) const { return cells[static_cast<std::size_t>(y * width + x)]; }
  bool Has(int x, int y, SpriteKind kind) const {
    return (at(x, y) >> static_cast<int>(kind)) & 1u;
  }
  bool operator==(const GridObservation&) const = default;
};

class GameState;
GameState LoadLevel(std::shared_ptr<const GameSpec> spec, std::uint64_t seed);
void AdvanceInPlace(GameState& state, Action action);

// Simulable world state. A plain value: copies are deep and independent.
class GameState {
 public:
  struct Mover {
    int sprite = 0;
    Pos pos;
    bool operator==(const Mover&) const = default;
  };

  const GameSpec& spec() const { return *spec_; }
  const std::shared_ptr<const GameSpec>& spec_ptr() const { return spec_; }
  int tick() const { return tick_; }
  int score() const { return score_; }
  Status status() const { return status_; }
  bool terminal() const { return status_ != Status::kRunning; }
  Pos avatar() const { return avatar_; }
  bool avatar_alive() const { return alive_; }
  bool key_held() const { return keys_ > 0; }
  int collectibles_left() const { return collectibles_left_; }
  const std::vector<Mover>& chasers() const { return chasers_; }

  // Bit-set over sprite indices of the static (non-avatar, non-chaser)
  // sprites in a cell.
  std::uint32_t statics_at(Pos p) const { return statics_[Index(p)]; }

  // Canonical byte encoding of the full state, rng stream included.
  std::string Encode() const;

  bool operator==(const GameState& other) const;

 private:
  friend GameState LoadLevel(std::shared_ptr<const GameSpec> spec, std::uint64_t seed);
  friend void AdvanceInPlace(GameState& state, Action action);

  std::size_t Index(Pos p) const { return static_cast<std::size_t>(p.y * spec_->width() + p.x); }
  bool InBounds(Pos p) const {
    return p.x >= 0 && p.y >= 0 && p.x < spec_->width() && p.y < spec_->height();
  }
  bool HasKind(Pos p, SpriteKind kind) const;

  std::shared_ptr<const GameSpec> spec_;
  int tick_ = 0;
  int score_ = 0;
  Status status_ = Status::kRunning;
  Pos avatar_;
  bool alive_ = true;
  int keys_ = 0;
  int collectibles_left_ = 0;
  std::vector<std::uint32_t> statics_;
  std::vector<Mover> chasers_;
  Rng rng_;
};

// One tick of the forward model. Sub-step order: avatar move, chaser moves,
// interactions, termination rules, tick increment. Throws ContractViolation
// on a terminal state.
GameState Advance(const GameState& state, Action action);

inline GameState CopyState(const GameState& state) { return state; }

GridObservation Observe(const GameState& state);

// Win 1, loss 0, running states mapped into [0.1, 0.9] by score.
double HeuristicValue(const GameState& state, const ScoreBounds& bounds);

}  // namespace thyia

#include "thyia/game.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace thyia {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {"Up", "Down", "Left", "Right",
                                                                    "Nil"};
constexpr std::array<std::string_view, kNumSpriteKinds> kKindNames = {
    "avatar", "solid", "collectible", "lethal", "chaser", "key", "door", "goal"};

// Up, Down, Left, Right.
constexpr std::array<Pos, 4> kSteps = {Pos{0, -1}, Pos{0, 1}, Pos{-1, 0}, Pos{1, 0}};

Pos Step(Pos p, int dir) { return Pos{p.x + kSteps[dir].x, p.y + kSteps[dir].y}; }

int Manhattan(Pos a, Pos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

}  // namespace

std::string HexU64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string_view ActionName(Action a) { return kActionNames[ActionIndex(a)]; }

std::optional<Action> ActionFromName(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == name) return kAllActions[i];
  }
  return std::nullopt;
}

std::string_view SpriteKindName(SpriteKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<SpriteKind> SpriteKindFromName(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<SpriteKind>(i);
  }
  return std::nullopt;
}

std::string_view StatusName(Status s) {
  switch (s) {
    case Status::kRunning: return "running";
    case Status::kWin: return "win";
    case Status::kLoss: return "loss";
  }
  return "?";
}

int GameSpec::timeout() const {
  for (const auto& rule : termination) {
    if (rule.condition == Condition::kTimeout) return rule.timeout_ticks;
  }
  return 0;
}

int GameSpec::SpriteIndex(char symbol) const {
  for (std::size_t i = 0; i < sprites.size(); ++i) {
    if (sprites[i].symbol == symbol) return static_cast<int>(i);
  }
  return -1;
}

bool GameSpec::HasRule(Condition c) const {
  for (const auto& rule : termination) {
    if (rule.condition == c) return true;
  }
  return false;
}

ScoreBounds InitialBounds(const GameSpec& spec) {
  ScoreBounds bounds;
  for (const auto& row : spec.level) {
    for (char c : row) {
      const int idx = spec.SpriteIndex(c);
      if (idx < 0) continue;
      const int delta = spec.sprites[idx].score_delta;
      if (delta > 0) bounds.max += delta;
    }
  }
  return bounds;
}

bool GameState::HasKind(Pos p, SpriteKind kind) const {
  std::uint32_t mask = statics_[Index(p)];
  while (mask != 0) {
    const int bit = __builtin_ctz(mask);
    mask &= mask - 1;
    if (spec_->sprites[bit].kind == kind) return true;
  }
  return false;
}

std::string GameState::Encode() const {
  std::ostringstream out;
  out << spec_->name << '|' << tick_ << '|' << score_ << '|' << static_cast<int>(status_) << '|'
      << avatar_.x << ',' << avatar_.y << '|' << alive_ << '|' << keys_ << '|'
      << collectibles_left_ << '|';
  for (auto m : statics_) out << m << ',';
  out << '|';
  for (const auto& c : chasers_) out << c.sprite << ':' << c.pos.x << ',' << c.pos.y << ';';
  out << '|' << rng_;
  return out.str();
}

bool GameState::operator==(const GameState& other) const {
  return (spec_ == other.spec_ || *spec_ == *other.spec_) && tick_ == other.tick_ &&
         score_ == other.score_ && status_ == other.status_ && avatar_ == other.avatar_ &&
         alive_ == other.alive_ && keys_ == other.keys_ &&
         collectibles_left_ == other.collectibles_left_ && statics_ == other.statics_ &&
         chasers_ == other.chasers_ && rng_ == other.rng_;
}

GameState LoadLevel(std::shared_ptr<const GameSpec> spec, std::uint64_t seed) {
  GameState state;
  state.spec_ = std::move(spec);
  const GameSpec& g = *state.spec_;
  state.statics_.assign(static_cast<std::size_t>(g.width() * g.height()), 0u);
  state.rng_.seed(seed);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const int idx = g.SpriteIndex(g.level[y][x]);
      if (idx < 0) continue;
      const Pos p{x, y};
      switch (g.sprites[idx].kind) {
        case SpriteKind::kAvatar:
          state.avatar_ = p;
          break;
        case SpriteKind::kChaser:
          state.chasers_.push_back({idx, p});
          break;
        case SpriteKind::kCollectible:
          ++state.collectibles_left_;
          [[fallthrough]];
        default:
          state.statics_[state.Index(p)] |= 1u << idx;
      }
    }
  }
  return state;
}

void AdvanceInPlace(GameState& s, Action action) {
  if (s.terminal()) throw ContractViolation("advance called on a terminal state");
  const GameSpec& g = *s.spec_;

  // (1) avatar movement
  if (action != Action::kNil) {
    const Pos target = Step(s.avatar_, ActionIndex(action));
    if (s.InBounds(target) && !s.HasKind(target, SpriteKind::kSolid) &&
        (s.keys_ > 0 || !s.HasKind(target, SpriteKind::kDoor))) {
      s.avatar_ = target;
    }
  }

  // (2) chasers; one uniform draw per chaser keeps the stream layout fixed
  auto chaser_can_enter = [&s](Pos p) {
    return s.InBounds(p) && !s.HasKind(p, SpriteKind::kSolid) && !s.HasKind(p, SpriteKind::kDoor);
  };
  for (auto& chaser : s.chasers_) {
    const double noise = g.sprites[chaser.sprite].move_noise;
    if (UniformReal(s.rng_) < noise) {
      const Pos target = Step(chaser.pos, static_cast<int>(UniformIndex(s.rng_, 4)));
      if (chaser_can_enter(target)) chaser.pos = target;
      continue;
    }
    int best_dist = Manhattan(chaser.pos, s.avatar_);
    int best_dir = -1;
    for (int dir = 0; dir < 4; ++dir) {
      const Pos target = Step(chaser.pos, dir);
      if (!chaser_can_enter(target)) continue;
      const int d = Manhattan(target, s.avatar_);
      if (d < best_dist) {
        best_dist = d;
        best_dir = dir;
      }
    }
    if (best_dir >= 0) chaser.pos = Step(chaser.pos, best_dir);
  }

  // (3) interactions at the avatar cell
  bool dead = false;
  std::uint32_t& cell = s.statics_[s.Index(s.avatar_)];
  std::uint32_t mask = cell;
  std::optional<Outcome> goal_outcome;
  int goal_delta = 0;
  while (mask != 0) {
    const int bit = __builtin_ctz(mask);
    mask &= mask - 1;
    const SpriteDef& sprite = g.sprites[bit];
    switch (sprite.kind) {
      case SpriteKind::kCollectible:
        cell &= ~(1u << bit);
        s.score_ += sprite.score_delta;
        --s.collectibles_left_;
        break;
      case SpriteKind::kKey:
        cell &= ~(1u << bit);
        s.score_ += sprite.score_delta;
        ++s.keys_;
        break;
      case SpriteKind::kLethal:
        dead = true;
        break;
      case SpriteKind::kGoal:
        for (const auto& rule : g.termination) {
          if (rule.condition == Condition::kAvatarOnGoal) {
            goal_outcome = rule.outcome;
            goal_delta += sprite.score_delta;
            break;
          }
        }
        break;
      default:
        break;
    }
  }
  for (const auto& chaser : s.chasers_) {
    if (chaser.pos == s.avatar_) dead = true;
  }
  if (dead) {
    s.alive_ = false;
    s.status_ = Status::kLoss;
  } else if (goal_outcome) {
    s.score_ += goal_delta;
    s.status_ = *goal_outcome == Outcome::kWin ? Status::kWin : Status::kLoss;
  }

  // (4) termination rules, first satisfied wins
  if (s.status_ == Status::kRunning) {
    for (const auto& rule : g.termination) {
      bool fired = false;
      switch (rule.condition) {
        case Condition::kAllCollected: fired = s.collectibles_left_ == 0; break;
        case Condition::kAvatarOnGoal: fired = s.HasKind(s.avatar_, SpriteKind::kGoal); break;
        case Condition::kAvatarDead: fired = !s.alive_; break;
        case Condition::kTimeout: fired = s.tick_ + 1 >= rule.timeout_ticks; break;
      }
      if (fired) {
        s.status_ = rule.outcome == Outcome::kWin ? Status::kWin : Status::kLoss;
        break;
      }
    }
  }

  // (5)
  ++s.tick_;
}

GameState Advance(const GameState& state, Action action) {
  GameState next = state;
  AdvanceInPlace(next, action);
  return next;
}

GridObservation Observe(const GameState& state) {
  const GameSpec& g = state.spec();
  GridObservation obs;
  obs.width = g.width();
  obs.height = g.height();
  obs.cells.assign(static_cast<std::size_t>(obs.width * obs.height), 0);
  for (int y = 0; y < obs.height; ++y) {
    for (int x = 0; x < obs.width; ++x) {
      std::uint32_t mask = state.statics_at({x, y});
      std::uint8_t bits = 0;
      while (mask != 0) {
        const int bit = __builtin_ctz(mask);
        mask &= mask - 1;
        bits |= static_cast<std::uint8_t>(1u << static_cast<int>(g.sprites[bit].kind));
      }
      obs.cells[static_cast<std::size_t>(y * obs.width + x)] = bits;
    }
  }
  auto mark = [&obs](Pos p, SpriteKind kind) {
    obs.cells[static_cast<std::size_t>(p.y * obs.width + p.x)] |=
        static_cast<std::uint8_t>(1u << static_cast<int>(kind));
  };
  for (const auto& chaser : state.chasers()) mark(chaser.pos, SpriteKind::kChaser);
  if (state.avatar_alive()) mark(state.avatar(), SpriteKind::kAvatar);
  return obs;
}

double HeuristicValue(const GameState& state, const ScoreBounds& bounds) {
  switch (state.status()) {
    case Status::kWin: return 1.0;
    case Status::kLoss: return 0.0;
    case Status::kRunning: break;
  }
  const double range = static_cast<double>(bounds.max) - static_cast<double>(bounds.min);
  if (range <= 0.0) return 0.5;
  double frac = (static_cast<double>(state.score()) - bounds.min) / range;
  // Scores outside the bounds (bounds lag behind play) stay in the band.
  if (frac < 0.0) frac = 0.0;
  if (frac > 1.0) frac = 1.0;
  return 0.1 + 0.8 * frac;
}

}  // namespace thyia

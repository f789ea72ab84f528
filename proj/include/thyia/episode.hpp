#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "thyia/game.hpp"
#include "thyia/learner.hpp"
#include "thyia/ntbea.hpp"
#include "thyia/params.hpp"
#include "thyia/policy_value.hpp"

namespace thyia {

// What a watcher sees after each tick.
struct LiveFrame {
  std::uint64_t seq = 0;
  std::string game;
  int tick = 0;
  GridObservation observation;
  int score = 0;
  Action action = Action::kNil;
  Policy policy{};
};

struct EpisodeRecord {
  std::string game;
  std::uint64_t fingerprint_hash = 0;
  std::uint64_t model_version = 0;
  int ticks = 0;
  int score = 0;
  Status outcome = Status::kRunning;
  std::vector<Action> actions;
  // Set when the episode could not run; `error` says why.
  bool skipped = false;
  std::string error;

  bool operator==(const EpisodeRecord&) const = default;
};

std::string ActionTrace(const std::vector<Action>& actions);

struct EpisodeOptions {
  const PolicyValueModel* model = nullptr;
  std::optional<Policy> hint;
  // Collect (features, policy target) per tick for the learner.
  bool record_ticks = false;
  std::function<void(const LiveFrame&)> on_frame;
};

struct EpisodeResult {
  EpisodeRecord record;
  std::vector<TickRecord> ticks;
  // Heuristic value of the final state (1 win, 0 loss).
  double fitness = 0.0;
};

// Plays one episode to termination. `bounds` is widened with every score
// seen, between planner calls only.
EpisodeResult PlayEpisode(std::shared_ptr<const GameSpec> spec, const ParameterSet& params,
                          std::uint64_t planner_seed, std::uint64_t level_seed,
                          ScoreBounds& bounds, const EpisodeOptions& options = {});

// Samples `train_batches` batches of `batch_size` from the buffer and
// applies one step each. Returns the mean pre-update loss, or nullopt when
// the buffer is empty.
std::optional<double> TrainFromBuffer(ModelWeights& model, const ReplayBuffer& buffer,
                                      const ParameterSet& params, Rng& rng);

// Planner parameters the runtime tunes online. Budget and the learner's
// settings stay fixed.
const std::vector<std::string>& OnlineTunedParameters();

// Mean final fitness over `episodes` plays of one game, with the named
// parameters taken from the point and the rest from `base`.
class GameTuningProblem : public TuningProblem {
 public:
  GameTuningProblem(std::shared_ptr<const GameSpec> spec, ParameterSet base,
                    std::vector<std::string> tuned, int episodes, std::uint64_t seed,
                    const PolicyValueModel* model, ScoreBounds bounds);

  std::shared_ptr<const ParameterSpace> space() const override { return space_; }
  double Evaluate(const ParameterSet& point) override;
  // `base` with the point's values applied.
  ParameterSet Expand(const ParameterSet& point) const;

 private:
  std::shared_ptr<const GameSpec> spec_;
  ParameterSet base_;
  std::vector<std::string> tuned_;
  std::shared_ptr<const ParameterSpace> space_;
  int episodes_;
  Rng rng_;
  const PolicyValueModel* model_;
  ScoreBounds bounds_;
};

}  // namespace thyia

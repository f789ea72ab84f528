#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "thyia/common.hpp"
#include "thyia/game.hpp"
#include "thyia/params.hpp"
#include "thyia/policy_value.hpp"

namespace thyia {

enum class CrossoverKind { kNone, kUniform, kOnePoint };
enum class SelectionKind { kTournament, kRank, kTruncation };
enum class GeneBias { kFlat, kFront, kBack };

// Typed view of the planner entries of a ParameterSet.
struct RheaConfig {
  int population_size = 10;
  int individual_length = 6;
  double mutation_rate = 0.2;
  bool mutation_at_least_one = true;
  GeneBias mutation_gene_bias = GeneBias::kFront;
  bool mutation_decay = false;
  bool nn_mutation = false;
  CrossoverKind crossover = CrossoverKind::kUniform;
  double crossover_rate = 1.0;
  SelectionKind selection = SelectionKind::kTournament;
  int tournament_size = 4;
  int elitism = 2;
  bool reevaluate_elites = false;
  bool shift_buffer = true;
  int rollout_length = 0;
  int eval_repeats = 1;
  bool nn_init = false;
  double policy_temperature = 1.0;
  double alpha = 0.0;
  std::int64_t budget = 500;
  double discount = 0.99;
  double hint_strength = 0.5;

  static RheaConfig FromParams(const ParameterSet& params);
};

struct Individual {
  std::vector<Action> genes;
  std::optional<double> fitness;
  // Secondary sort key: sum of discount^t * score gain at step t, plus
  // discount^depth on a win. Earlier reward sorts first among equal fitness.
  double tiebreak = 0.0;

  bool operator==(const Individual&) const = default;
};

struct Population {
  std::vector<Individual> individuals;
  int generation = 0;

  bool operator==(const Population&) const = default;
};

// Hard cap on forward-model calls for one planning step.
class SimulationBudget {
 public:
  explicit SimulationBudget(std::int64_t limit) : limit_(limit) {}

  // Advances `state` unless the budget is spent. Returns whether it did.
  bool TryAdvance(GameState& state, Action action) {
    if (used_ >= limit_) return false;
    ++used_;
    AdvanceInPlace(state, action);
    return true;
  }
  std::int64_t used() const { return used_; }
  std::int64_t limit() const { return limit_; }
  std::int64_t remaining() const { return limit_ - used_; }

 private:
  std::int64_t limit_;
  std::int64_t used_ = 0;
};

// Shared state of one planning step.
struct SearchContext {
  const RheaConfig& config;
  const PolicyValueModel* model;  // may be null
  const ScoreBounds& bounds;
  Rng& rng;
  SimulationBudget& budget;
  // Additive strategy-hint bias on the initial gene distribution.
  const Policy* init_bias = nullptr;
  // Strictly increasing fitness transform hook; null means identity.
  const std::function<double(double)>* fitness_transform = nullptr;
  int fallbacks = 0;
};

// f = (1 - alpha) * R + alpha * N
inline double BlendFitness(double rollout_value, double model_value, double alpha) {
  return (1.0 - alpha) * rollout_value + alpha * model_value;
}

// Zeroes `current` and renormalises. All mass on `current` gives uniform
// over the other actions.
Policy MutationDistribution(const Policy& policy, Action current);

// Reweights a distribution by p^(1/temperature).
Policy Temper(const Policy& policy, double temperature);

// base + strength * bias, clamped at zero and renormalised; falls back to
// `base` when nothing positive remains.
Policy MixBias(const Policy& base, const Policy& bias, double strength);

// Rollout that follows the model's policy from `state`; uses one forward
// model call per gene while the game runs.
Individual NnSeededSequence(const GameState& state, const PolicyValueModel& model, int length,
                            SearchContext& ctx);

// Builds and evaluates the initial population.
Population InitPopulation(const GameState& state, SearchContext& ctx);

// Mutated copy; every mutated gene differs from its previous value. `rate`
// overrides the configured rate (used for decay); `force_one` guarantees at
// least one mutated gene.
Individual Mutate(const Individual& individual, const GameState& root, SearchContext& ctx,
                  double rate, bool force_one);

// Simulates the genes (then the random rollout) from a copy of `root` and
// stores the blended fitness. Returns the fitness.
double Evaluate(Individual& individual, const GameState& root, SearchContext& ctx);

// Shift every individual left by one gene, refill the last gene, re-evaluate.
Population ShiftPopulation(const Population& previous, const GameState& state, SearchContext& ctx);

// Sorted by fitness (then tiebreak) descending; stable.
void SortPopulation(Population& population);

// Worst-case forward-model calls of one generation.
std::int64_t GenerationCost(const RheaConfig& config);

// Rolling horizon planner. Owns its rng and the population carried between
// ticks by the shift buffer.
class Rhea {
 public:
  Rhea(const ParameterSet& params, std::uint64_t seed);
  Rhea(const RheaConfig& config, std::uint64_t seed);

  // Evolves until the tick budget is spent and returns the first gene of the
  // best individual. `model` may be null.
  Action Act(const GameState& state, const PolicyValueModel* model, const ScoreBounds& bounds);

  // Forget the shift buffer (new episode).
  void Reset() { population_.reset(); }

  // Mixed into the initial gene distribution until cleared.
  void SetInitBias(std::optional<Policy> bias) { init_bias_ = bias; }
  void SetFitnessTransform(std::function<double(double)> f) { fitness_transform_ = std::move(f); }

  const RheaConfig& config() const { return config_; }
  const Population& population() const { return *population_; }
  bool has_population() const { return population_.has_value(); }
  std::int64_t last_calls() const { return last_calls_; }
  int generations_last_tick() const { return last_generations_; }
  // Times nn-guided initialisation ran without a model.
  int fallbacks() const { return fallbacks_; }
  // Best fitness after each generation of the last tick.
  const std::vector<double>& best_history() const { return best_history_; }

 private:
  void NextGeneration(Population& pop, const GameState& state, SearchContext& ctx);

  RheaConfig config_;
  Rng rng_;
  std::optional<Population> population_;
  std::optional<Policy> init_bias_;
  std::function<double(double)> fitness_transform_;
  std::int64_t last_calls_ = 0;
  int last_generations_ = 0;
  int fallbacks_ = 0;
  std::vector<double> best_history_;
};

}  // namespace thyia

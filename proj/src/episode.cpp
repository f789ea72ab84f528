#include "thyia/episode.hpp"

#include "thyia/rhea.hpp"

namespace thyia {

std::string ActionTrace(const std::vector<Action>& actions) {
  static constexpr char kLetters[] = {'U', 'D', 'L', 'R', 'N'};
  std::string out;
  out.reserve(actions.size());
  for (Action a : actions) out.push_back(kLetters[ActionIndex(a)]);
  return out;
}

EpisodeResult PlayEpisode(std::shared_ptr<const GameSpec> spec, const ParameterSet& params,
                          std::uint64_t planner_seed, std::uint64_t level_seed,
                          ScoreBounds& bounds, const EpisodeOptions& options) {
  EpisodeResult result;
  result.record.game = spec->name;
  Rhea planner(params, planner_seed);
  if (options.hint) planner.SetInitBias(options.hint);
  GameState state = LoadLevel(spec, level_seed);
  while (!state.terminal()) {
    if (options.record_ticks) {
      result.ticks.push_back(TickRecord{FeaturizeState(state, bounds), {}});
    }
    const Action action = planner.Act(state, options.model, bounds);
    const Policy target = PolicyTarget(planner.population());
    if (options.record_ticks) result.ticks.back().policy_target = target;
    AdvanceInPlace(state, action);
    bounds.Observe(state.score());
    result.record.actions.push_back(action);
    if (options.on_frame) {
      LiveFrame frame;
      frame.game = spec->name;
      frame.tick = state.tick();
      frame.observation = Observe(state);
      frame.score = state.score();
      frame.action = action;
      frame.policy = target;
      options.on_frame(frame);
    }
  }
  result.record.ticks = state.tick();
  result.record.score = state.score();
  result.record.outcome = state.status();
  result.fitness = HeuristicValue(state, bounds);
  return result;
}

std::optional<double> TrainFromBuffer(ModelWeights& model, const ReplayBuffer& buffer,
                                      const ParameterSet& params, Rng& rng) {
  if (buffer.size() == 0) return std::nullopt;
  const int batches = params.Int("train_batches");
  const auto batch_size = static_cast<std::size_t>(params.Int("batch_size"));
  const double lr = params.Real("learning_rate");
  LossTerms terms{params.Real("weight_decay"), params.Real("value_loss_weight")};
  double total = 0.0;
  for (int b = 0; b < batches; ++b) {
    const auto batch = buffer.Sample(rng, batch_size);
    total += TrainStep(model, batch, lr, terms);
  }
  return total / batches;
}

const std::vector<std::string>& OnlineTunedParameters() {
  static const std::vector<std::string> names = {
      "population_size", "individual_length", "mutation_rate", "mutation_gene_bias",
      "crossover",       "selection",         "tournament_size", "elitism",
      "rollout_length",  "init_mode",         "alpha",
  };
  return names;
}

namespace {

std::shared_ptr<const ParameterSpace> SubSpace(const ParameterSpace& full,
                                               const std::vector<std::string>& names) {
  std::vector<ParameterDef> defs;
  for (const auto& name : names) {
    const auto dim = full.IndexOf(name);
    if (!dim) throw ParameterSpaceError("unknown parameter: " + name);
    defs.push_back(full.def(*dim));
  }
  return std::make_shared<const ParameterSpace>(std::move(defs));
}

}  // namespace

GameTuningProblem::GameTuningProblem(std::shared_ptr<const GameSpec> spec, ParameterSet base,
                                     std::vector<std::string> tuned, int episodes,
                                     std::uint64_t seed, const PolicyValueModel* model,
                                     ScoreBounds bounds)
    : spec_(std::move(spec)),
      base_(std::move(base)),
      tuned_(std::move(tuned)),
      space_(SubSpace(base_.space(), tuned_)),
      episodes_(episodes),
      rng_(seed),
      model_(model),
      bounds_(bounds) {}

ParameterSet GameTuningProblem::Expand(const ParameterSet& point) const {
  ParameterSet full = base_;
  for (std::size_t i = 0; i < tuned_.size(); ++i) {
    full.Set(tuned_[i], point.space().def(i).values[point.index(i)]);
  }
  return full;
}

double GameTuningProblem::Evaluate(const ParameterSet& point) {
  const ParameterSet full = Expand(point);
  EpisodeOptions options;
  options.model = model_;
  double total = 0.0;
  for (int e = 0; e < episodes_; ++e) {
    ScoreBounds bounds = bounds_;
    const std::uint64_t planner_seed = rng_();
    const std::uint64_t level_seed = rng_();
    total += PlayEpisode(spec_, full, planner_seed, level_seed, bounds, options).fitness;
  }
  return total / episodes_;
}

}  // namespace thyia

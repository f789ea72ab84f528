#include "thyia/rhea.hpp"

#include <algorithm>
#include <cmath>

namespace thyia {

namespace {

Action RandomOtherAction(Rng& rng, Action current) {
  const int k = static_cast<int>(UniformIndex(rng, kNumActions - 1));
  return ActionFromIndex(k < ActionIndex(current) ? k : k + 1);
}

Action SampleAction(Rng& rng, const Policy& p) { return ActionFromIndex(SampleWeighted(rng, p)); }

double GeneWeight(GeneBias bias, int gene, int length) {
  switch (bias) {
    case GeneBias::kFlat: return 1.0;
    case GeneBias::kFront: return 2.0 * (length - gene) / (length + 1.0);
    case GeneBias::kBack: return 2.0 * (gene + 1) / (length + 1.0);
  }
  return 1.0;
}

int Elites(const RheaConfig& c) { return std::clamp(c.elitism, 0, c.population_size - 1); }

Policy InitDistribution(const SearchContext& ctx) {
  if (ctx.init_bias == nullptr) return UniformPolicy();
  return MixBias(UniformPolicy(), *ctx.init_bias, ctx.config.hint_strength);
}

const Individual& Select(const Population& pop, SearchContext& ctx) {
  const auto& inds = pop.individuals;
  const std::size_t n = inds.size();
  switch (ctx.config.selection) {
    case SelectionKind::kTournament: {
      std::size_t best = UniformIndex(ctx.rng, n);
      for (int i = 1; i < ctx.config.tournament_size; ++i) {
        best = std::min(best, UniformIndex(ctx.rng, n));
      }
      return inds[best];
    }
    case SelectionKind::kRank: {
      std::vector<double> weights(n);
      for (std::size_t i = 0; i < n; ++i) weights[i] = static_cast<double>(n - i);
      return inds[SampleWeighted(ctx.rng, weights)];
    }
    case SelectionKind::kTruncation:
      return inds[UniformIndex(ctx.rng, (n + 1) / 2)];
  }
  return inds.front();
}

Individual Crossover(const Individual& a, const Individual& b, SearchContext& ctx) {
  Individual child;
  child.genes = a.genes;
  const CrossoverKind kind = ctx.config.crossover;
  if (kind == CrossoverKind::kNone || UniformReal(ctx.rng) >= ctx.config.crossover_rate) {
    return child;
  }
  const std::size_t len = a.genes.size();
  if (kind == CrossoverKind::kUniform) {
    for (std::size_t i = 0; i < len; ++i) {
      if (UniformReal(ctx.rng) < 0.5) child.genes[i] = b.genes[i];
    }
  } else if (len >= 2) {
    const std::size_t cut = 1 + UniformIndex(ctx.rng, len - 1);
    std::copy(b.genes.begin() + static_cast<std::ptrdiff_t>(cut), b.genes.end(),
              child.genes.begin() + static_cast<std::ptrdiff_t>(cut));
  }
  return child;
}

}  // namespace

RheaConfig RheaConfig::FromParams(const ParameterSet& p) {
  RheaConfig c;
  c.population_size = p.Int("population_size");
  c.individual_length = p.Int("individual_length");
  c.mutation_rate = p.Real("mutation_rate");
  c.mutation_at_least_one = p.Flag("mutation_at_least_one");
  const auto& bias = p.Text("mutation_gene_bias");
  c.mutation_gene_bias = bias == "front" ? GeneBias::kFront
                         : bias == "back" ? GeneBias::kBack
                                          : GeneBias::kFlat;
  c.mutation_decay = p.Text("mutation_schedule") == "decay";
  c.nn_mutation = p.Text("mutation_mode") == "nn_weighted";
  const auto& cx = p.Text("crossover");
  c.crossover = cx == "none"       ? CrossoverKind::kNone
                : cx == "one_point" ? CrossoverKind::kOnePoint
                                    : CrossoverKind::kUniform;
  c.crossover_rate = p.Real("crossover_rate");
  const auto& sel = p.Text("selection");
  c.selection = sel == "rank"         ? SelectionKind::kRank
                : sel == "truncation" ? SelectionKind::kTruncation
                                      : SelectionKind::kTournament;
  c.tournament_size = p.Int("tournament_size");
  c.elitism = p.Int("elitism");
  c.reevaluate_elites = p.Flag("reevaluate_elites");
  c.shift_buffer = p.Flag("shift_buffer");
  c.rollout_length = p.Int("rollout_length");
  c.eval_repeats = p.Int("eval_repeats");
  c.nn_init = p.Text("init_mode") == "nn_seeded";
  c.policy_temperature = p.Real("policy_temperature");
  c.alpha = p.Real("alpha");
  c.budget = p.Int("budget");
  c.discount = p.Real("discount");
  c.hint_strength = p.Real("hint_strength");
  return c;
}

Policy MutationDistribution(const Policy& policy, Action current) {
  Policy out = policy;
  const int cur = ActionIndex(current);
  out[cur] = 0.0;
  double total = 0.0;
  for (double v : out) total += v;
  if (!(total > 0.0)) {
    out.fill(1.0 / (kNumActions - 1));
    out[cur] = 0.0;
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

Policy Temper(const Policy& policy, double temperature) {
  if (temperature == 1.0) return policy;
  Policy out;
  double total = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    out[i] = policy[i] > 0.0 ? std::pow(policy[i], 1.0 / temperature) : 0.0;
    total += out[i];
  }
  if (!(total > 0.0)) return policy;
  for (double& v : out) v /= total;
  return out;
}

Policy MixBias(const Policy& base, const Policy& bias, double strength) {
  Policy out;
  double total = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    out[i] = std::max(0.0, base[i] + strength * bias[i]);
    total += out[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) return base;
  for (double& v : out) v /= total;
  return out;
}

Individual NnSeededSequence(const GameState& state, const PolicyValueModel& model, int length,
                            SearchContext& ctx) {
  Individual ind;
  ind.genes.reserve(static_cast<std::size_t>(std::max(length, 0)));
  GameState sim = state;
  for (int t = 0; t < length; ++t) {
    Policy pi = Temper(model.Evaluate(sim).policy, ctx.config.policy_temperature);
    if (ctx.init_bias != nullptr) pi = MixBias(pi, *ctx.init_bias, ctx.config.hint_strength);
    const Action a = SampleAction(ctx.rng, pi);
    ind.genes.push_back(a);
    if (!sim.terminal()) ctx.budget.TryAdvance(sim, a);
  }
  return ind;
}

Individual Mutate(const Individual& individual, const GameState& root, SearchContext& ctx,
                  double rate, bool force_one) {
  const int len = static_cast<int>(individual.genes.size());
  if (len == 0) return individual;
  std::vector<char> selected(static_cast<std::size_t>(len), 0);
  bool any = false;
  for (int g = 0; g < len; ++g) {
    const double p = std::min(1.0, rate * GeneWeight(ctx.config.mutation_gene_bias, g, len));
    if (UniformReal(ctx.rng) < p) {
      selected[g] = 1;
      any = true;
    }
  }
  if (!any && force_one) {
    selected[UniformIndex(ctx.rng, static_cast<std::size_t>(len))] = 1;
    any = true;
  }
  if (!any) return individual;

  Individual out;
  out.genes = individual.genes;
  const bool guided = ctx.config.nn_mutation && ctx.model != nullptr;
  if (!guided) {
    for (int g = 0; g < len; ++g) {
      if (selected[g]) out.genes[g] = RandomOtherAction(ctx.rng, individual.genes[g]);
    }
    return out;
  }

  // S_g: the state after playing the original genes 0..g from the root.
  int last = len - 1;
  while (!selected[last]) --last;
  GameState sim = root;
  for (int g = 0; g <= last; ++g) {
    if (!sim.terminal()) ctx.budget.TryAdvance(sim, individual.genes[g]);
    if (!selected[g]) continue;
    const Policy pi = Temper(ctx.model->Evaluate(sim).policy, ctx.config.policy_temperature);
    out.genes[g] = SampleAction(ctx.rng, MutationDistribution(pi, individual.genes[g]));
  }
  return out;
}

double Evaluate(Individual& individual, const GameState& root, SearchContext& ctx) {
  const RheaConfig& c = ctx.config;
  const int repeats = std::max(1, c.eval_repeats);
  double fitness_sum = 0.0;
  double tiebreak_sum = 0.0;
  for (int r = 0; r < repeats; ++r) {
    GameState sim = root;
    int depth = 0;
    auto step = [&](Action a) {
      const double before = sim.score();
      if (!ctx.budget.TryAdvance(sim, a)) return false;
      ++depth;
      tiebreak_sum += std::pow(c.discount, depth) * (sim.score() - before);
      return true;
    };
    for (Action a : individual.genes) {
      if (sim.terminal() || !step(a)) break;
    }
    for (int i = 0; i < c.rollout_length && !sim.terminal(); ++i) {
      if (!step(ActionFromIndex(UniformIndex(ctx.rng, kNumActions)))) break;
    }
    const double rollout_value = HeuristicValue(sim, ctx.bounds);
    double model_value = 0.5;
    if (c.alpha != 0.0 && ctx.model != nullptr) model_value = ctx.model->Evaluate(sim).value;
    fitness_sum += BlendFitness(rollout_value, model_value, c.alpha);
    if (sim.status() == Status::kWin) tiebreak_sum += std::pow(c.discount, depth);
  }
  double fitness = repeats == 1 ? fitness_sum : fitness_sum / repeats;
  if (ctx.fitness_transform != nullptr) fitness = (*ctx.fitness_transform)(fitness);
  individual.fitness = fitness;
  individual.tiebreak = repeats == 1 ? tiebreak_sum : tiebreak_sum / repeats;
  return fitness;
}

void SortPopulation(Population& population) {
  std::stable_sort(population.individuals.begin(), population.individuals.end(),
                   [](const Individual& a, const Individual& b) {
                     const double fa = a.fitness.value_or(-INFINITY);
                     const double fb = b.fitness.value_or(-INFINITY);
                     if (fa != fb) return fa > fb;
                     return a.tiebreak > b.tiebreak;
                   });
}

Population InitPopulation(const GameState& state, SearchContext& ctx) {
  const RheaConfig& c = ctx.config;
  Population pop;
  pop.individuals.reserve(static_cast<std::size_t>(c.population_size));
  if (c.nn_init && ctx.model != nullptr) {
    Individual first = NnSeededSequence(state, *ctx.model, c.individual_length, ctx);
    pop.individuals.push_back(first);
    for (int i = 1; i < c.population_size; ++i) {
      pop.individuals.push_back(Mutate(first, state, ctx, c.mutation_rate, /*force_one=*/true));
    }
  } else {
    if (c.nn_init) ++ctx.fallbacks;
    const Policy dist = InitDistribution(ctx);
    for (int i = 0; i < c.population_size; ++i) {
      Individual ind;
      ind.genes.resize(static_cast<std::size_t>(c.individual_length));
      for (auto& g : ind.genes) g = SampleAction(ctx.rng, dist);
      pop.individuals.push_back(std::move(ind));
    }
  }
  for (auto& ind : pop.individuals) Evaluate(ind, state, ctx);
  SortPopulation(pop);
  return pop;
}

Population ShiftPopulation(const Population& previous, const GameState& state,
                           SearchContext& ctx) {
  Population pop;
  pop.individuals.reserve(previous.individuals.size());
  const bool guided = ctx.config.nn_mutation && ctx.model != nullptr;
  for (const auto& old : previous.individuals) {
    Individual ind;
    ind.genes = old.genes;
    if (!ind.genes.empty()) {
      std::rotate(ind.genes.begin(), ind.genes.begin() + 1, ind.genes.end());
      if (guided) {
        GameState sim = state;
        for (std::size_t g = 0; g + 1 < ind.genes.size() && !sim.terminal(); ++g) {
          ctx.budget.TryAdvance(sim, ind.genes[g]);
        }
        const Policy pi = Temper(ctx.model->Evaluate(sim).policy, ctx.config.policy_temperature);
        ind.genes.back() = SampleAction(ctx.rng, pi);
      } else {
        ind.genes.back() = ActionFromIndex(UniformIndex(ctx.rng, kNumActions));
      }
    }
    pop.individuals.push_back(std::move(ind));
  }
  for (auto& ind : pop.individuals) Evaluate(ind, state, ctx);
  SortPopulation(pop);
  return pop;
}

std::int64_t GenerationCost(const RheaConfig& c) {
  const std::int64_t elites = Elites(c);
  const std::int64_t eval = static_cast<std::int64_t>(c.individual_length + c.rollout_length) *
                            std::max(1, c.eval_repeats);
  const std::int64_t mutation = c.nn_mutation ? c.individual_length : 0;
  std::int64_t cost = (c.population_size - elites) * (eval + mutation);
  if (c.reevaluate_elites) cost += elites * eval;
  return cost;
}

Rhea::Rhea(const ParameterSet& params, std::uint64_t seed)
    : Rhea(RheaConfig::FromParams(params), seed) {}

Rhea::Rhea(const RheaConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {
  if (config_.population_size < 1) throw ContractViolation("population size must be positive");
  if (config_.individual_length < 0) throw ContractViolation("negative individual length");
}

void Rhea::NextGeneration(Population& pop, const GameState& state, SearchContext& ctx) {
  const RheaConfig& c = config_;
  double rate = c.mutation_rate;
  if (c.mutation_decay && c.individual_length > 0) {
    const double floor = std::min(rate, 1.0 / c.individual_length);
    rate = std::max(floor, rate * std::pow(0.9, pop.generation));
  }
  const bool force_one = c.mutation_at_least_one && rate > 0.0;

  Population next;
  next.generation = pop.generation + 1;
  next.individuals.reserve(pop.individuals.size());
  const int elites = Elites(c);
  for (int i = 0; i < elites; ++i) {
    next.individuals.push_back(pop.individuals[static_cast<std::size_t>(i)]);
    if (c.reevaluate_elites) Evaluate(next.individuals.back(), state, ctx);
  }
  while (static_cast<int>(next.individuals.size()) < c.population_size) {
    const Individual& a = Select(pop, ctx);
    const Individual& b = Select(pop, ctx);
    Individual child = Mutate(Crossover(a, b, ctx), state, ctx, rate, force_one);
    Evaluate(child, state, ctx);
    next.individuals.push_back(std::move(child));
  }
  SortPopulation(next);
  pop = std::move(next);
}

Action Rhea::Act(const GameState& state, const PolicyValueModel* model,
                 const ScoreBounds& bounds) {
  if (state.terminal()) throw ContractViolation("planning on a terminal state");
  if (config_.budget < config_.population_size) {
    throw ContractViolation("budget must cover one evaluation per individual");
  }
  SimulationBudget budget(config_.budget);
  SearchContext ctx{config_, model, bounds, rng_, budget};
  if (init_bias_) ctx.init_bias = &*init_bias_;
  if (fitness_transform_) ctx.fitness_transform = &fitness_transform_;

  const bool reuse = config_.shift_buffer && population_ &&
                     static_cast<int>(population_->individuals.size()) == config_.population_size &&
                     !population_->individuals.empty() &&
                     static_cast<int>(population_->individuals.front().genes.size()) ==
                         config_.individual_length;
  Population pop = reuse ? ShiftPopulation(*population_, state, ctx) : InitPopulation(state, ctx);

  best_history_.clear();
  best_history_.push_back(pop.individuals.front().fitness.value_or(0.0));
  const std::int64_t cost = GenerationCost(config_);
  int generations = 0;
  while (cost > 0 && budget.remaining() >= cost) {
    NextGeneration(pop, state, ctx);
    best_history_.push_back(pop.individuals.front().fitness.value_or(0.0));
    ++generations;
  }

  last_calls_ = budget.used();
  last_generations_ = generations;
  fallbacks_ += ctx.fallbacks;
  population_ = std::move(pop);
  const auto& best = population_->individuals.front();
  return best.genes.empty() ? Action::kNil : best.genes.front();
}

}  // namespace thyia

#include "thyia/params.hpp"

#include <charconv>
#include <sstream>

namespace thyia {

namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

ParameterDef P(std::string name, std::vector<std::string> values, std::size_t def,
               std::string description) {
  return ParameterDef{std::move(name), std::move(values), def, std::move(description)};
}

}  // namespace

ParameterSpace::ParameterSpace(std::vector<ParameterDef> defs) {
  for (auto& d : defs) Add(std::move(d));
}

void ParameterSpace::Add(ParameterDef def) {
  if (def.values.empty()) throw ParameterSpaceError("parameter '" + def.name + "' has no values");
  if (def.default_index >= def.values.size()) {
    throw ParameterSpaceError("parameter '" + def.name + "' default out of range");
  }
  if (index_.count(def.name) != 0) {
    throw ParameterSpaceError("duplicate parameter '" + def.name + "'");
  }
  index_.emplace(def.name, defs_.size());
  defs_.push_back(std::move(def));
}

std::optional<std::size_t> ParameterSpace::IndexOf(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> ParameterSpace::Arities() const {
  std::vector<std::size_t> out;
  out.reserve(defs_.size());
  for (const auto& d : defs_) out.push_back(d.values.size());
  return out;
}

std::string ParameterSpace::Describe() const {
  std::ostringstream out;
  out << "# " << defs_.size() << " parameters, " << SpaceCardinality(*this)
      << " combinations\n";
  for (const auto& d : defs_) {
    out << "\n" << d.name << "\n  " << d.description << "\n  values:";
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      out << ' ' << d.values[i] << (i == d.default_index ? "*" : "");
    }
    out << '\n';
  }
  return out.str();
}

BigInt SpaceCardinality(const ParameterSpace& space) {
  BigInt product = 1;
  for (const auto& d : space.defs()) product *= static_cast<unsigned long long>(d.values.size());
  return product;
}

ParameterSet::ParameterSet(std::shared_ptr<const ParameterSpace> space)
    : space_(std::move(space)), indices_(space_->size(), 0) {
  for (std::size_t i = 0; i < space_->size(); ++i) {
    indices_[i] = static_cast<std::uint32_t>(space_->def(i).default_index);
  }
}

ParameterSet ParameterSet::Defaults(std::shared_ptr<const ParameterSpace> space) {
  return ParameterSet(std::move(space));
}

ParameterSet ParameterSet::Random(std::shared_ptr<const ParameterSpace> space, Rng& rng) {
  ParameterSet p(std::move(space));
  for (std::size_t i = 0; i < p.indices_.size(); ++i) {
    p.indices_[i] = static_cast<std::uint32_t>(UniformIndex(rng, p.space_->def(i).values.size()));
  }
  return p;
}

ParameterSet ParameterSet::FromIndices(std::shared_ptr<const ParameterSpace> space,
                                       std::vector<std::uint32_t> indices) {
  ParameterSet p(std::move(space));
  if (indices.size() != p.indices_.size()) {
    throw ParameterSpaceError("index vector does not match the parameter space");
  }
  for (std::size_t i = 0; i < indices.size(); ++i) p.SetIndex(i, indices[i]);
  return p;
}

ParameterSet ParameterSet::Parse(std::shared_ptr<const ParameterSpace> space,
                                 std::string_view text) {
  ParameterSet p(std::move(space));
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = Trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterSpaceError("line " + std::to_string(line_no) + ": expected 'name = value'");
    }
    const auto name = Trim(line.substr(0, eq));
    const auto value = Trim(line.substr(eq + 1));
    if (!p.space_->IndexOf(name)) {
      throw ParameterSpaceError("line " + std::to_string(line_no) + ": unknown parameter '" +
                                std::string(name) + "'");
    }
    p.Set(name, value);
  }
  return p;
}

void ParameterSet::SetIndex(std::size_t dim, std::uint32_t value) {
  if (dim >= indices_.size() || value >= space_->def(dim).values.size()) {
    throw ParameterSpaceError("parameter index out of range");
  }
  indices_[dim] = value;
}

std::size_t ParameterSet::Dim(std::string_view name) const {
  const auto dim = space_->IndexOf(name);
  if (!dim) throw ParameterSpaceError("unknown parameter '" + std::string(name) + "'");
  return *dim;
}

const std::string& ParameterSet::Text(std::string_view name) const {
  const std::size_t dim = Dim(name);
  return space_->def(dim).values[indices_[dim]];
}

double ParameterSet::Real(std::string_view name) const {
  const std::string& text = Text(name);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParameterSpaceError("parameter '" + std::string(name) + "' is not numeric");
  }
  return v;
}

int ParameterSet::Int(std::string_view name) const {
  const std::string& text = Text(name);
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParameterSpaceError("parameter '" + std::string(name) + "' is not an integer");
  }
  return v;
}

bool ParameterSet::Flag(std::string_view name) const { return Text(name) == "on"; }

void ParameterSet::Set(std::string_view name, std::string_view value) {
  const std::size_t dim = Dim(name);
  const auto& values = space_->def(dim).values;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == value) {
      indices_[dim] = static_cast<std::uint32_t>(i);
      return;
    }
  }
  throw ParameterSpaceError("value '" + std::string(value) + "' not allowed for parameter '" +
                            std::string(name) + "'");
}

std::string ParameterSet::Serialize() const {
  std::string out;
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    const auto& d = space_->def(i);
    out += d.name + " = " + d.values[indices_[i]] + "\n";
  }
  return out;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (indices_ != other.indices_) return false;
  if (space_ == other.space_) return true;
  if (space_->size() != other.space_->size()) return false;
  for (std::size_t i = 0; i < space_->size(); ++i) {
    if (space_->def(i).name != other.space_->def(i).name ||
        space_->def(i).values != other.space_->def(i).values) {
      return false;
    }
  }
  return true;
}

std::shared_ptr<const ParameterSpace> DefaultSpace() {
  static const auto space = std::make_shared<const ParameterSpace>(std::vector<ParameterDef>{
      // evolutionary core
      P("population_size", {"2", "5", "10", "15", "20", "30"}, 2, "individuals per population"),
      P("individual_length", {"3", "5", "6", "8", "10", "15"}, 2, "actions per individual"),
      P("mutation_rate", {"0.05", "0.1", "0.2", "0.3", "0.5", "1"}, 2,
        "per-gene mutation probability"),
      P("mutation_at_least_one", {"off", "on"}, 1,
        "force one mutated gene when none was drawn (rate > 0 only)"),
      P("mutation_gene_bias", {"flat", "front", "back"}, 1,
        "scales the per-gene rate towards the start or end of the sequence"),
      P("mutation_schedule", {"constant", "decay"}, 0,
        "decay multiplies the rate by 0.9 per generation, floored at 1/length"),
      P("mutation_mode", {"uniform", "nn_weighted"}, 0,
        "replacement gene drawn uniformly or from the model policy at the gene's state"),
      P("crossover", {"none", "uniform", "one_point"}, 1, "recombination operator"),
      P("crossover_rate", {"0.5", "0.7", "0.9", "1"}, 3, "probability of recombining parents"),
      P("selection", {"tournament", "rank", "truncation"}, 0, "parent selection scheme"),
      P("tournament_size", {"2", "3", "4", "5"}, 2, "entrants per tournament"),
      P("elitism", {"0", "1", "2", "3"}, 2, "individuals carried unchanged to the next generation"),
      P("reevaluate_elites", {"off", "on"}, 0, "re-simulate elites every generation"),
      P("shift_buffer", {"off", "on"}, 1, "carry the population between ticks, shifted by one"),
      P("rollout_length", {"0", "2", "5", "10"}, 0,
        "uniform random actions appended when evaluating"),
      P("eval_repeats", {"1", "2", "3"}, 0, "simulations averaged per evaluation"),
      P("init_mode", {"uniform", "nn_seeded"}, 0,
        "initial population from uniform genes or from a model-guided rollout"),
      P("policy_temperature", {"0.5", "1", "2"}, 1, "temperature applied to model policies"),
      P("alpha", {"0", "0.25", "0.5", "0.75", "1"}, 0,
        "weight of the model value in the fitness blend"),
      P("budget", {"50", "100", "200", "500", "1000", "2000"}, 3,
        "forward-model calls per tick"),
      P("discount", {"0.9", "0.95", "0.99", "1"}, 2,
        "earlier wins preferred by discount^depth among equal fitness"),
      P("hint_strength", {"0.25", "0.5", "1"}, 1,
        "weight of a strategy hint added to the initial gene distribution"),
      // learner
      P("learning", {"off", "on"}, 1, "train per-game models between episodes"),
      P("hidden1", {"32", "64"}, 0, "first hidden layer width"),
      P("hidden2", {"32", "64"}, 0, "second hidden layer width"),
      P("shared", {"16", "32"}, 0, "shared trunk width feeding both heads"),
      P("learning_rate", {"0.001", "0.003", "0.01", "0.03"}, 2, "gradient descent step size"),
      P("train_batches", {"1", "4", "8", "16"}, 1, "minibatches per episode"),
      P("batch_size", {"16", "32", "64"}, 1, "examples per minibatch"),
      P("replay_capacity", {"1000", "5000", "20000"}, 1, "replay buffer size per game"),
      P("value_loss_weight", {"0.5", "1", "2"}, 1, "weight of the value term in the loss"),
      P("weight_decay", {"0", "0.00001", "0.0001"}, 0, "L2 penalty on weights"),
      // runtime
      P("tune_every", {"0", "10", "25", "50"}, 0,
        "episodes per game between tuning runs (0 disables)"),
  });
  return space;
}

std::string AgentFingerprint::Serialize() const {
  return "seed = " + std::to_string(seed) + "\n" + params.Serialize();
}

AgentFingerprint AgentFingerprint::Parse(std::shared_ptr<const ParameterSpace> space,
                                         std::string_view text) {
  std::string rest;
  std::optional<std::uint64_t> seed;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    const auto eq = line.find('=');
    if (eq != std::string_view::npos && Trim(line.substr(0, eq)) == "seed") {
      const auto v = Trim(line.substr(eq + 1));
      std::uint64_t s = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ParameterSpaceError("bad seed in fingerprint");
      }
      seed = s;
    } else {
      rest.append(line);
      rest.push_back('\n');
    }
  }
  if (!seed) throw ParameterSpaceError("fingerprint has no seed");
  return AgentFingerprint{ParameterSet::Parse(std::move(space), rest), *seed};
}

std::uint64_t AgentFingerprint::Hash() const { return Fnv1a64(Serialize()); }

AgentFingerprint MakeFingerprint(const ParameterSet& params, std::uint64_t seed) {
  return AgentFingerprint{params, seed};
}

}  // namespace thyia

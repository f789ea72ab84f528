#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "thyia/common.hpp"
#include "thyia/game.hpp"
#include "thyia/params.hpp"
#include "thyia/policy_value.hpp"
#include "thyia/rhea.hpp"

namespace thyia {

// Flattened one-hot grid planes (kind-major: kind * W * H + y * W + x)
// followed by three scalars: tick / timeout, normalised score, key held.
using FeatureVector = std::vector<double>;

struct StateScalars {
  double tick_fraction = 0.0;
  double score_norm = 0.0;
  double key_held = 0.0;
};

inline std::size_t FeatureSize(int width, int height) {
  return static_cast<std::size_t>(width * height * kNumSpriteKinds) + 3;
}

FeatureVector Featurize(const GridObservation& observation, const StateScalars& scalars);
FeatureVector FeaturizeState(const GameState& state, const ScoreBounds& bounds);

// Max-subtracted softmax.
Policy Softmax(std::span<const double, kNumActions> logits);

class DimensionError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct LayerSizes {
  int input = 0;
  int hidden1 = 32;
  int hidden2 = 32;
  int shared = 16;
  bool operator==(const LayerSizes&) const = default;
};

// Multilayer perceptron: input -> hidden1 -> hidden2 -> shared (all ReLU),
// then a policy head (shared -> 5 logits, softmax) and a value head
// (shared -> 1 logit, sigmoid). Parameters live in one flat vector:
// W1 b1 W2 b2 W3 b3 Wp bp Wv bv, weights row-major [out][in].
struct ModelWeights {
  std::string game_id;
  LayerSizes sizes;
  std::vector<double> params;
  std::uint64_t steps = 0;

  static std::size_t ParamCount(const LayerSizes& sizes);
  bool operator==(const ModelWeights&) const = default;
};

// Uniform in +-1/sqrt(fan_in) for weights, zero biases.
ModelWeights InitModel(std::string game_id, const LayerSizes& sizes, std::uint64_t seed);

// All-zero parameters.
ModelWeights ZeroModel(std::string game_id, const LayerSizes& sizes);

PolicyValue Predict(const ModelWeights& model, std::span<const double> features);

struct TrainingExample {
  FeatureVector features;
  Policy target_policy{};
  double target_value = 0.0;
};

struct LossTerms {
  double weight_decay = 0.0;
  double value_weight = 1.0;
};

// Mean over the batch of cross-entropy(target policy, output policy) plus
// value_weight * squared value error.
double BatchLoss(const ModelWeights& model, std::span<const TrainingExample> batch,
                 double value_weight = 1.0);

// Loss and d(loss)/d(params), with the L2 term folded into the gradient only.
std::pair<double, std::vector<double>> LossAndGradient(const ModelWeights& model,
                                                       std::span<const TrainingExample> batch,
                                                       const LossTerms& terms = {});

// One gradient-descent step. Returns the pre-update loss. A non-finite loss
// or gradient throws TrainingError and leaves the model untouched.
double TrainStep(ModelWeights& model, std::span<const TrainingExample> batch, double learning_rate,
                 const LossTerms& terms = {});

// target[a] proportional to the summed fitness of individuals starting with a.
Policy PolicyTarget(const Population& population);

// Bounded FIFO of training examples for one game.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000) : capacity_(capacity) {}

  void Push(TrainingExample example);
  std::vector<TrainingExample> Sample(Rng& rng, std::size_t count) const;
  void set_capacity(std::size_t capacity);

  std::size_t size() const { return examples_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<TrainingExample>& examples() const { return examples_; }

 private:
  std::size_t capacity_;
  std::deque<TrainingExample> examples_;
};

struct TickRecord {
  FeatureVector features;
  Policy policy_target{};
};

// One example per tick, all labelled with the terminal outcome value.
void RecordEpisode(ReplayBuffer& buffer, std::span<const TickRecord> ticks, double outcome_value);

// Binary model file: "THY1", u32 id length, id bytes, u32 x 5 dims (input,
// hidden1, hidden2, shared, actions), f64 params, u64 steps. Little-endian.
std::string EncodeModel(const ModelWeights& model);
ModelWeights DecodeModel(std::string_view bytes);
void SaveModel(const ModelWeights& model, const std::string& path);
ModelWeights LoadModel(const std::string& path);

// Throws DimensionError if the model was not built for this game.
void CheckCompatible(const ModelWeights& model, const GameSpec& spec);

LayerSizes SizesFor(const GameSpec& spec, const ParameterSet& params);

// PolicyValueModel over an immutable weights snapshot.
class MlpPolicyValue : public PolicyValueModel {
 public:
  MlpPolicyValue(std::shared_ptr<const ModelWeights> weights, const GameSpec& spec,
                 ScoreBounds bounds);

  PolicyValue Evaluate(const GameState& state) const override;
  const ModelWeights& weights() const { return *weights_; }

 private:
  std::shared_ptr<const ModelWeights> weights_;
  ScoreBounds bounds_;
};

}  // namespace thyia

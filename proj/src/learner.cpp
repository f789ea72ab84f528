#include "thyia/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace thyia {

namespace {

static_assert(std::endian::native == std::endian::little, "model files assume little-endian");

struct Offsets {
  std::size_t w1, b1, w2, b2, w3, b3, wp, bp, wv, bv, end;
};

Offsets OffsetsFor(const LayerSizes& s) {
  Offsets o{};
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t start = at;
    at += n;
    return start;
  };
  const auto in = static_cast<std::size_t>(s.input);
  const auto h1 = static_cast<std::size_t>(s.hidden1);
  const auto h2 = static_cast<std::size_t>(s.hidden2);
  const auto sh = static_cast<std::size_t>(s.shared);
  o.w1 = take(h1 * in);
  o.b1 = take(h1);
  o.w2 = take(h2 * h1);
  o.b2 = take(h2);
  o.w3 = take(sh * h2);
  o.b3 = take(sh);
  o.wp = take(kNumActions * sh);
  o.bp = take(kNumActions);
  o.wv = take(sh);
  o.bv = take(1);
  o.end = at;
  return o;
}

// out[r] = b[r] + sum_c W[r][c] * in[c]
void Dense(const double* w, const double* b, const double* in, std::size_t rows, std::size_t cols,
           double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * in[c];
    out[r] = acc;
  }
}

void Relu(const std::vector<double>& z, std::vector<double>& a) {
  a.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Activations {
  std::vector<double> z1, a1, z2, a2, z3, a3;
  std::array<double, kNumActions> logits{};
  double value_logit = 0.0;
};

void Forward(const ModelWeights& m, const Offsets& o, std::span<const double> x, Activations& act) {
  const auto& s = m.sizes;
  const double* p = m.params.data();
  act.z1.resize(static_cast<std::size_t>(s.hidden1));
  act.z2.resize(static_cast<std::size_t>(s.hidden2));
  act.z3.resize(static_cast<std::size_t>(s.shared));
  Dense(p + o.w1, p + o.b1, x.data(), act.z1.size(), x.size(), act.z1.data());
  Relu(act.z1, act.a1);
  Dense(p + o.w2, p + o.b2, act.a1.data(), act.z2.size(), act.a1.size(), act.z2.data());
  Relu(act.z2, act.a2);
  Dense(p + o.w3, p + o.b3, act.a2.data(), act.z3.size(), act.a2.size(), act.z3.data());
  Relu(act.z3, act.a3);
  Dense(p + o.wp, p + o.bp, act.a3.data(), kNumActions, act.a3.size(), act.logits.data());
  Dense(p + o.wv, p + o.bv, act.a3.data(), 1, act.a3.size(), &act.value_logit);
}

void CheckInput(const ModelWeights& m, std::size_t n) {
  if (n != static_cast<std::size_t>(m.sizes.input)) {
    throw DimensionError("feature vector has " + std::to_string(n) + " entries, model '" +
                         m.game_id + "' expects " + std::to_string(m.sizes.input));
  }
}

// -sum t log softmax(logits)
double CrossEntropy(const Policy& target, const std::array<double, kNumActions>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double log_norm = mx + std::log(sum);
  double ce = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    if (target[a] != 0.0) ce -= target[a] * (logits[a] - log_norm);
  }
  return ce;
}

// dst[c] += sum_r W[r][c] * d[r]
void BackInput(const double* w, const double* d, std::size_t rows, std::size_t cols, double* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    const double dr = d[r];
    if (dr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += row[c] * dr;
  }
}

// gW[r][c] += d[r] * in[c]; gb[r] += d[r]
void AccumulateDense(const double* d, const double* in, std::size_t rows, std::size_t cols,
                     double* gw, double* gb) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double dr = d[r];
    gb[r] += dr;
    if (dr == 0.0) continue;
    double* row = gw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += dr * in[c];
  }
}

template <typename T>
void Put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    if (bytes_.size() - pos_ < sizeof(T)) throw ModelFormatError("model file truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view Take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw ModelFormatError("model file truncated");
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic = "THY1";
constexpr std::uint32_t kMaxDim = 1u << 20;

}  // namespace

FeatureVector Featurize(const GridObservation& obs, const StateScalars& scalars) {
  const std::size_t plane = static_cast<std::size_t>(obs.width * obs.height);
  FeatureVector f(FeatureSize(obs.width, obs.height), 0.0);
  for (std::size_t cell = 0; cell < plane; ++cell) {
    const std::uint8_t bits = obs.cells[cell];
    for (int k = 0; k < kNumSpriteKinds; ++k) {
      if ((bits >> k) & 1u) f[static_cast<std::size_t>(k) * plane + cell] = 1.0;
    }
  }
  const std::size_t base = plane * kNumSpriteKinds;
  f[base] = std::clamp(scalars.tick_fraction, 0.0, 1.0);
  f[base + 1] = std::clamp(scalars.score_norm, 0.0, 1.0);
  f[base + 2] = std::clamp(scalars.key_held, 0.0, 1.0);
  return f;
}

FeatureVector FeaturizeState(const GameState& state, const ScoreBounds& bounds) {
  const int timeout = std::max(1, state.spec().timeout());
  StateScalars scalars;
  scalars.tick_fraction = static_cast<double>(state.tick()) / timeout;
  scalars.score_norm = HeuristicValue(state, bounds);
  scalars.key_held = state.key_held() ? 1.0 : 0.0;
  return Featurize(Observe(state), scalars);
}

Policy Softmax(std::span<const double, kNumActions> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Policy out;
  double sum = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::size_t ModelWeights::ParamCount(const LayerSizes& sizes) { return OffsetsFor(sizes).end; }

ModelWeights ZeroModel(std::string game_id, const LayerSizes& sizes) {
  ModelWeights m;
  m.game_id = std::move(game_id);
  m.sizes = sizes;
  m.params.assign(ModelWeights::ParamCount(sizes), 0.0);
  return m;
}

ModelWeights InitModel(std::string game_id, const LayerSizes& sizes, std::uint64_t seed) {
  ModelWeights m = ZeroModel(std::move(game_id), sizes);
  const Offsets o = OffsetsFor(sizes);
  Rng rng(seed);
  auto fill = [&](std::size_t start, std::size_t count, int fan_in) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
    for (std::size_t i = 0; i < count; ++i) {
      m.params[start + i] = (2.0 * UniformReal(rng) - 1.0) * limit;
    }
  };
  fill(o.w1, o.b1 - o.w1, sizes.input);
  fill(o.w2, o.b2 - o.w2, sizes.hidden1);
  fill(o.w3, o.b3 - o.w3, sizes.hidden2);
  fill(o.wp, o.bp - o.wp, sizes.shared);
  fill(o.wv, o.bv - o.wv, sizes.shared);
  return m;
}

PolicyValue Predict(const ModelWeights& model, std::span<const double> features) {
  CheckInput(model, features.size());
  const Offsets o = OffsetsFor(model.sizes);
  Activations act;
  Forward(model, o, features, act);
  PolicyValue out;
  out.policy = Softmax(act.logits);
  out.value = Sigmoid(act.value_logit);
  return out;
}

double BatchLoss(const ModelWeights& model, std::span<const TrainingExample> batch,
                 double value_weight) {
  const Offsets o = OffsetsFor(model.sizes);
  Activations act;
  double total = 0.0;
  for (const auto& ex : batch) {
    CheckInput(model, ex.features.size());
    Forward(model, o, ex.features, act);
    const double v = Sigmoid(act.value_logit);
    total += CrossEntropy(ex.target_policy, act.logits) +
             value_weight * (v - ex.target_value) * (v - ex.target_value);
  }
  return batch.empty() ? 0.0 : total / static_cast<double>(batch.size());
}

std::pair<double, std::vector<double>> LossAndGradient(const ModelWeights& model,
                                                       std::span<const TrainingExample> batch,
                                                       const LossTerms& terms) {
  if (batch.empty()) throw ContractViolation("empty training batch");
  const Offsets o = OffsetsFor(model.sizes);
  const auto& s = model.sizes;
  const auto h1 = static_cast<std::size_t>(s.hidden1);
  const auto h2 = static_cast<std::size_t>(s.hidden2);
  const auto sh = static_cast<std::size_t>(s.shared);
  const double* p = model.params.data();

  std::vector<double> grad(model.params.size(), 0.0);
  double* g = grad.data();
  Activations act;
  std::vector<double> d3(sh), d2(h2), d1(h1);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  for (const auto& ex : batch) {
    CheckInput(model, ex.features.size());
    Forward(model, o, ex.features, act);
    const Policy probs = Softmax(act.logits);
    const double v = Sigmoid(act.value_logit);
    total += CrossEntropy(ex.target_policy, act.logits) +
             terms.value_weight * (v - ex.target_value) * (v - ex.target_value);

    double target_mass = 0.0;
    for (double t : ex.target_policy) target_mass += t;
    std::array<double, kNumActions> dlogits;
    for (int a = 0; a < kNumActions; ++a) {
      dlogits[a] = (probs[a] * target_mass - ex.target_policy[a]) * scale;
    }
    const double dvalue = 2.0 * terms.value_weight * (v - ex.target_value) * v * (1.0 - v) * scale;

    AccumulateDense(dlogits.data(), act.a3.data(), kNumActions, sh, g + o.wp, g + o.bp);
    AccumulateDense(&dvalue, act.a3.data(), 1, sh, g + o.wv, g + o.bv);

    std::fill(d3.begin(), d3.end(), 0.0);
    BackInput(p + o.wp, dlogits.data(), kNumActions, sh, d3.data());
    BackInput(p + o.wv, &dvalue, 1, sh, d3.data());
    for (std::size_t i = 0; i < sh; ++i) d3[i] = act.z3[i] > 0.0 ? d3[i] : 0.0;
    AccumulateDense(d3.data(), act.a2.data(), sh, h2, g + o.w3, g + o.b3);

    std::fill(d2.begin(), d2.end(), 0.0);
    BackInput(p + o.w3, d3.data(), sh, h2, d2.data());
    for (std::size_t i = 0; i < h2; ++i) d2[i] = act.z2[i] > 0.0 ? d2[i] : 0.0;
    AccumulateDense(d2.data(), act.a1.data(), h2, h1, g + o.w2, g + o.b2);

    std::fill(d1.begin(), d1.end(), 0.0);
    BackInput(p + o.w2, d2.data(), h2, h1, d1.data());
    for (std::size_t i = 0; i < h1; ++i) d1[i] = act.z1[i] > 0.0 ? d1[i] : 0.0;
    AccumulateDense(d1.data(), ex.features.data(), h1, ex.features.size(), g + o.w1, g + o.b1);
  }

  if (terms.weight_decay != 0.0) {
    const std::pair<std::size_t, std::size_t> weight_ranges[] = {
        {o.w1, o.b1}, {o.w2, o.b2}, {o.w3, o.b3}, {o.wp, o.bp}, {o.wv, o.bv}};
    for (auto [start, end] : weight_ranges) {
      for (std::size_t i = start; i < end; ++i) grad[i] += terms.weight_decay * p[i];
    }
  }
  return {total * scale, std::move(grad)};
}

double TrainStep(ModelWeights& model, std::span<const TrainingExample> batch, double learning_rate,
                 const LossTerms& terms) {
  auto [loss, grad] = LossAndGradient(model, batch, terms);
  if (!std::isfinite(loss)) throw TrainingError("non-finite loss; step skipped");
  for (double gi : grad) {
    if (!std::isfinite(gi)) throw TrainingError("non-finite gradient; step skipped");
  }
  if (learning_rate != 0.0) {
    for (std::size_t i = 0; i < grad.size(); ++i) model.params[i] -= learning_rate * grad[i];
  }
  ++model.steps;
  return loss;
}

Policy PolicyTarget(const Population& population) {
  Policy target{};
  double total = 0.0;
  for (const auto& ind : population.individuals) {
    if (ind.genes.empty()) continue;
    const double f = std::max(0.0, ind.fitness.value_or(0.0));
    target[ActionIndex(ind.genes.front())] += f;
    total += f;
  }
  if (!(total > 0.0)) return UniformPolicy();
  for (double& v : target) v /= total;
  return target;
}

void ReplayBuffer::Push(TrainingExample example) {
  if (capacity_ == 0) return;
  if (examples_.size() == capacity_) examples_.pop_front();
  examples_.push_back(std::move(example));
}

void ReplayBuffer::set_capacity(std::size_t capacity) {
  capacity_ = capacity;
  while (examples_.size() > capacity_) examples_.pop_front();
}

std::vector<TrainingExample> ReplayBuffer::Sample(Rng& rng, std::size_t count) const {
  std::vector<TrainingExample> out;
  if (examples_.empty()) return out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(examples_[UniformIndex(rng, examples_.size())]);
  return out;
}

void RecordEpisode(ReplayBuffer& buffer, std::span<const TickRecord> ticks, double outcome_value) {
  for (const auto& tick : ticks) {
    buffer.Push(TrainingExample{tick.features, tick.policy_target, outcome_value});
  }
}

std::string EncodeModel(const ModelWeights& m) {
  std::string out(kMagic);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(m.game_id.size()));
  out += m.game_id;
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(m.sizes.input));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(m.sizes.hidden1));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(m.sizes.hidden2));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(m.sizes.shared));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(kNumActions));
  for (double v : m.params) Put<double>(out, v);
  Put<std::uint64_t>(out, m.steps);
  return out;
}

ModelWeights DecodeModel(std::string_view bytes) {
  Reader r(bytes);
  if (r.Take(kMagic.size()) != kMagic) throw ModelFormatError("bad model file magic");
  ModelWeights m;
  const auto id_len = r.Get<std::uint32_t>();
  if (id_len > 4096) throw ModelFormatError("implausible game id length");
  m.game_id = std::string(r.Take(id_len));
  std::uint32_t dims[5];
  for (auto& d : dims) {
    d = r.Get<std::uint32_t>();
    if (d == 0 || d > kMaxDim) throw ModelFormatError("implausible layer size");
  }
  if (dims[4] != static_cast<std::uint32_t>(kNumActions)) {
    throw ModelFormatError("model action count does not match");
  }
  m.sizes = LayerSizes{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                       static_cast<int>(dims[2]), static_cast<int>(dims[3])};
  m.params.resize(ModelWeights::ParamCount(m.sizes));
  for (double& v : m.params) v = r.Get<double>();
  m.steps = r.Get<std::uint64_t>();
  if (!r.done()) throw ModelFormatError("trailing bytes after model");
  return m;
}

void SaveModel(const ModelWeights& model, const std::string& path) {
  const std::string bytes = EncodeModel(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model file " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing model file " + path);
}

ModelWeights LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return DecodeModel(buf.str());
}

void CheckCompatible(const ModelWeights& model, const GameSpec& spec) {
  if (model.game_id != spec.name) {
    throw DimensionError("model was trained for '" + model.game_id + "', not '" + spec.name + "'");
  }
  CheckInput(model, FeatureSize(spec.width(), spec.height()));
}

LayerSizes SizesFor(const GameSpec& spec, const ParameterSet& params) {
  LayerSizes s;
  s.input = static_cast<int>(FeatureSize(spec.width(), spec.height()));
  s.hidden1 = params.Int("hidden1");
  s.hidden2 = params.Int("hidden2");
  s.shared = params.Int("shared");
  return s;
}

MlpPolicyValue::MlpPolicyValue(std::shared_ptr<const ModelWeights> weights, const GameSpec& spec,
                               ScoreBounds bounds)
    : weights_(std::move(weights)), bounds_(bounds) {
  CheckCompatible(*weights_, spec);
}

PolicyValue MlpPolicyValue::Evaluate(const GameState& state) const {
  return Predict(*weights_, FeaturizeState(state, bounds_));
}

}  // namespace thyia

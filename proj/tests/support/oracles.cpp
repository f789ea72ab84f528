#include "oracles.hpp"

#include <cmath>
#include <deque>
#include <set>

namespace thyia::oracle {

SequenceScore ScoreSequence(const GameState& root, const std::vector<Action>& seq,
                            const ScoreBounds& bounds, double discount) {
  GameState s = root;
  SequenceScore out;
  double weight = 1.0;
  for (Action a : seq) {
    if (s.terminal()) break;
    const int before = s.score();
    s = Advance(s, a);
    weight *= discount;
    out.tiebreak += weight * (s.score() - before);
    if (s.status() == Status::kWin) out.tiebreak += weight;
  }
  out.fitness = HeuristicValue(s, bounds);
  return out;
}

std::vector<Action> OptimalFirstActions(const GameState& root, int length,
                                        const ScoreBounds& bounds, double discount) {
  std::size_t total = 1;
  for (int i = 0; i < length; ++i) total *= kNumActions;
  std::vector<SequenceScore> scores(total);
  std::vector<Action> seq(static_cast<std::size_t>(length));
  SequenceScore best{-1.0, -1.0};
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (int g = length - 1; g >= 0; --g) {
      seq[static_cast<std::size_t>(g)] = ActionFromIndex(c % kNumActions);
      c /= kNumActions;
    }
    scores[code] = ScoreSequence(root, seq, bounds, discount);
    const auto& s = scores[code];
    if (s.fitness > best.fitness + 1e-12 ||
        (std::abs(s.fitness - best.fitness) <= 1e-12 && s.tiebreak > best.tiebreak)) {
      best = s;
    }
  }
  std::set<int> firsts;
  const std::size_t per_first = total / kNumActions;
  for (std::size_t code = 0; code < total; ++code) {
    const auto& s = scores[code];
    if (std::abs(s.fitness - best.fitness) <= 1e-12 && std::abs(s.tiebreak - best.tiebreak) <= 1e-12) {
      firsts.insert(static_cast<int>(code / per_first));
    }
  }
  std::vector<Action> out;
  for (int f : firsts) out.push_back(ActionFromIndex(static_cast<std::size_t>(f)));
  return out;
}

namespace {

// Everything the agent can affect, minus the clock.
std::vector<std::uint8_t> StateKey(const GameState& s) {
  std::vector<std::uint8_t> key = Observe(s).cells;
  key.push_back(s.key_held() ? 1 : 0);
  key.push_back(static_cast<std::uint8_t>(s.score() & 0xff));
  return key;
}

}  // namespace

std::optional<Action> BfsAction(const GameState& state, int max_depth) {
  struct Node {
    GameState state;
    Action first;
    int depth;
  };
  std::set<std::vector<std::uint8_t>> seen{StateKey(state)};
  std::deque<Node> frontier;
  const Action moves[] = {Action::kUp, Action::kDown, Action::kLeft, Action::kRight};
  for (Action a : moves) {
    GameState next = Advance(state, a);
    if (next.status() == Status::kWin || next.score() > state.score()) return a;
    if (next.terminal() || !seen.insert(StateKey(next)).second) continue;
    frontier.push_back({std::move(next), a, 1});
  }
  while (!frontier.empty()) {
    Node node = std::move(frontier.front());
    frontier.pop_front();
    if (node.depth >= max_depth) continue;
    for (Action a : moves) {
      GameState next = Advance(node.state, a);
      if (next.status() == Status::kWin || next.score() > state.score()) return node.first;
      if (next.terminal() || !seen.insert(StateKey(next)).second) continue;
      frontier.push_back({std::move(next), node.first, node.depth + 1});
    }
  }
  return std::nullopt;
}

std::vector<GameState> RandomStates(std::shared_ptr<const GameSpec> spec, std::size_t count,
                                    std::uint64_t seed) {
  std::vector<GameState> out;
  std::set<std::string> seen;
  Rng rng(seed);
  for (int walk = 0; out.size() < count && walk < 100000; ++walk) {
    GameState s = LoadLevel(spec, rng());
    while (!s.terminal() && out.size() < count) {
      if (seen.insert(s.Encode()).second) out.push_back(s);
      s = Advance(s, ActionFromIndex(UniformIndex(rng, kNumActions)));
    }
  }
  return out;
}

double ReferenceLoss(const ModelWeights& m, std::span<const TrainingExample> batch,
                     double value_weight, std::vector<bool>* signs) {
  const std::size_t in = static_cast<std::size_t>(m.sizes.input);
  const std::size_t h1 = static_cast<std::size_t>(m.sizes.hidden1);
  const std::size_t h2 = static_cast<std::size_t>(m.sizes.hidden2);
  const std::size_t sh = static_cast<std::size_t>(m.sizes.shared);
  const double* p = m.params.data();
  // Walks the flat parameter vector in file order.
  auto layer = [&](const std::vector<double>& x, std::size_t rows, bool relu) {
    const double* w = p;
    const double* b = p + rows * x.size();
    std::vector<double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      long double acc = b[r];
      for (std::size_t c = 0; c < x.size(); ++c) acc += static_cast<long double>(w[r * x.size() + c]) * x[c];
      y[r] = static_cast<double>(acc);
      if (relu) {
        if (signs) signs->push_back(y[r] > 0.0);
        y[r] = y[r] > 0.0 ? y[r] : 0.0;
      }
    }
    return y;
  };
  long double total = 0.0;
  for (const auto& ex : batch) {
    p = m.params.data();
    std::vector<double> x(ex.features.begin(), ex.features.end());
    x.resize(in, 0.0);
    auto a1 = layer(x, h1, true);
    p += h1 * in + h1;
    auto a2 = layer(a1, h2, true);
    p += h2 * h1 + h2;
    auto a3 = layer(a2, sh, true);
    p += sh * h2 + sh;
    auto logits = layer(a3, kNumActions, false);
    p += kNumActions * sh + kNumActions;
    auto vlogit = layer(a3, 1, false);
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    long double z = 0.0;
    for (double l : logits) z += std::exp(static_cast<long double>(l - mx));
    const long double logz = std::log(z) + mx;
    long double ce = 0.0;
    for (int a = 0; a < kNumActions; ++a) ce -= ex.target_policy[a] * (logits[a] - logz);
    const long double v = 1.0L / (1.0L + std::exp(-static_cast<long double>(vlogit[0])));
    const long double dv = v - ex.target_value;
    total += ce + value_weight * dv * dv;
  }
  return static_cast<double>(total / batch.size());
}

GradientCheck CheckGradient(const ModelWeights& model, std::span<const TrainingExample> batch,
                            double h, double value_weight) {
  const auto [loss, grad] = LossAndGradient(model, batch, LossTerms{0.0, value_weight});
  GradientCheck out;
  ModelWeights probe = model;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    std::vector<bool> plus_signs;
    std::vector<bool> minus_signs;
    probe.params[i] = model.params[i] + h;
    const double up = ReferenceLoss(probe, batch, value_weight, &plus_signs);
    probe.params[i] = model.params[i] - h;
    const double down = ReferenceLoss(probe, batch, value_weight, &minus_signs);
    probe.params[i] = model.params[i];
    if (plus_signs != minus_signs) {
      ++out.skipped_kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(numeric) + std::abs(grad[i]));
    out.max_relative_error = std::max(out.max_relative_error, std::abs(numeric - grad[i]) / denom);
    ++out.checked;
  }
  return out;
}

}  // namespace thyia::oracle

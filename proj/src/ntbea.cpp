#include "thyia/ntbea.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace thyia {

double Ucb(const TupleStats& stats, std::int64_t n_total, double k, double epsilon) {
  const double mean = stats.n > 0 ? stats.sum / static_cast<double>(stats.n) : 0.5;
  if (k == 0.0) return mean;
  return mean + k * std::sqrt(std::log(static_cast<double>(n_total) + 1.0) /
                              (static_cast<double>(stats.n) + epsilon));
}

NTupleModel::NTupleModel(std::vector<std::size_t> arities) : arities_(std::move(arities)) {
  const std::size_t n = arities_.size();
  for (std::size_t i = 0; i < n; ++i) tuples_.push_back({i});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) tuples_.push_back({i, j});
  }
  if (n > 2) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    tuples_.push_back(std::move(all));
  }
  stats_.resize(tuples_.size());
}

Point NTupleModel::Project(std::size_t tuple, const Point& point) const {
  Point key;
  key.reserve(tuples_[tuple].size());
  for (std::size_t dim : tuples_[tuple]) key.push_back(point.at(dim));
  return key;
}

void NTupleModel::Update(const Point& point, double reward) {
  if (point.size() != arities_.size()) throw ContractViolation("point dimension mismatch");
  if (!std::isfinite(reward)) throw ContractViolation("non-finite reward");
  for (std::size_t t = 0; t < tuples_.size(); ++t) {
    TupleStats& s = stats_[t][Project(t, point)];
    s.n += 1;
    s.sum += reward;
  }
  ++total_;
}

TupleStats NTupleModel::Lookup(std::size_t tuple, const Point& point) const {
  auto it = stats_.at(tuple).find(Project(tuple, point));
  return it == stats_[tuple].end() ? TupleStats{} : it->second;
}

double NTupleModel::Score(const Point& point, double k, double epsilon) const {
  if (tuples_.empty()) return 0.5;
  double sum = 0.0;
  for (std::size_t t = 0; t < tuples_.size(); ++t) {
    sum += Ucb(Lookup(t, point), total_, k, epsilon);
  }
  return sum / static_cast<double>(tuples_.size());
}

std::vector<Point> Neighbours(const Point& point, const std::vector<std::size_t>& arities,
                              int count, Rng& rng, double rate) {
  std::vector<std::size_t> mutable_dims;
  for (std::size_t d = 0; d < arities.size(); ++d) {
    if (arities[d] > 1) mutable_dims.push_back(d);
  }
  auto change = [&](Point& p, std::size_t dim) {
    const auto k = static_cast<std::uint32_t>(UniformIndex(rng, arities[dim] - 1));
    p[dim] = k < p[dim] ? k : k + 1;
  };
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    Point candidate = point;
    bool changed = false;
    for (std::size_t dim : mutable_dims) {
      if (UniformReal(rng) < rate) {
        change(candidate, dim);
        changed = true;
      }
    }
    if (!changed && !mutable_dims.empty()) {
      change(candidate, mutable_dims[UniformIndex(rng, mutable_dims.size())]);
    }
    out.push_back(std::move(candidate));
  }
  return out;
}

Point Recommend(const NTupleModel& model, const std::vector<Point>& evaluated) {
  if (evaluated.empty()) throw ContractViolation("nothing evaluated to recommend from");
  std::size_t best = 0;
  double best_value = model.Estimate(evaluated[0]);
  for (std::size_t i = 1; i < evaluated.size(); ++i) {
    const double v = model.Estimate(evaluated[i]);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return evaluated[best];
}

NtbeaResult RunNtbea(TuningProblem& problem, const NtbeaConfig& config) {
  Rng rng(config.seed);
  const auto space = problem.space();
  Point start = ParameterSet::Random(space, rng).indices();
  return RunNtbea(problem, config, start);
}

NtbeaResult RunNtbea(TuningProblem& problem, const NtbeaConfig& config, const Point& start) {
  if (config.budget < 1) throw ContractViolation("tuning budget must be at least 1");
  const auto space = problem.space();
  // Separate stream from the one that drew a random start.
  Rng rng(DeriveSeed(config.seed, 0x4e54));
  NTupleModel model(space->Arities());
  std::vector<EvaluationRecord> log;
  std::vector<Point> evaluated;
  Point current = start;
  for (int t = 0; t < config.budget; ++t) {
    const double reward = problem.Evaluate(ParameterSet::FromIndices(space, current));
    model.Update(current, reward);
    log.push_back({t, current, reward});
    evaluated.push_back(current);
    if (t + 1 == config.budget) break;

    const auto candidates =
        Neighbours(current, model.arities(), config.neighbours, rng, config.resample_rate);
    if (candidates.empty()) continue;
    std::size_t best = 0;
    double best_score = model.Score(candidates[0], config.k, config.epsilon);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const double s = model.Score(candidates[i], config.k, config.epsilon);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    current = candidates[best];
  }
  ParameterSet recommended = ParameterSet::FromIndices(space, Recommend(model, evaluated));
  return NtbeaResult{std::move(recommended), std::move(log), std::move(model)};
}

std::string FormatLogLine(const EvaluationRecord& r) {
  std::ostringstream out;
  out << r.index << ',';
  for (std::size_t i = 0; i < r.point.size(); ++i) out << (i ? " " : "") << r.point[i];
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), r.reward);
  out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  return out.str();
}

EvaluationRecord ParseLogLine(std::string_view line) {
  const auto c1 = line.find(',');
  const auto c2 = line.rfind(',');
  if (c1 == std::string_view::npos || c2 == c1) throw Error("malformed tuning log line");
  EvaluationRecord r;
  auto parse = [](std::string_view s, auto& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error("malformed tuning log field");
  };
  parse(line.substr(0, c1), r.index);
  std::string_view values = line.substr(c1 + 1, c2 - c1 - 1);
  while (!values.empty()) {
    const auto sp = values.find(' ');
    std::uint32_t v = 0;
    parse(values.substr(0, sp), v);
    r.point.push_back(v);
    if (sp == std::string_view::npos) break;
    values.remove_prefix(sp + 1);
  }
  parse(line.substr(c2 + 1), r.reward);
  return r;
}

OneMaxProblem::OneMaxProblem(int bits, double noise_sigma, std::uint64_t seed)
    : sigma_(noise_sigma), rng_(seed) {
  std::vector<ParameterDef> defs;
  for (int i = 0; i < bits; ++i) {
    defs.push_back(ParameterDef{"bit" + std::to_string(i), {"0", "1"}, 0, "OneMax bit"});
  }
  space_ = std::make_shared<const ParameterSpace>(std::move(defs));
}

double OneMaxProblem::Evaluate(const ParameterSet& point) {
  double ones = 0.0;
  for (auto v : point.indices()) ones += v;
  double reward = ones / static_cast<double>(point.indices().size());
  if (sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_);
    reward += noise(rng_);
  }
  return std::clamp(reward, 0.0, 1.0);
}

}  // namespace thyia

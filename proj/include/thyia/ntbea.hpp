#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "thyia/common.hpp"
#include "thyia/params.hpp"

namespace thyia {

// One point in a space, as value indices.
using Point = std::vector<std::uint32_t>;

struct TupleStats {
  std::int64_t n = 0;
  double sum = 0.0;
  bool operator==(const TupleStats&) const = default;
};

// mean + k * sqrt(ln(n_total + 1) / (n + epsilon)); mean is 0.5 for an
// unvisited combination.
double Ucb(const TupleStats& stats, std::int64_t n_total, double k, double epsilon);

// Bandit statistics over all 1-tuples, all 2-tuples and the full tuple.
class NTupleModel {
 public:
  explicit NTupleModel(std::vector<std::size_t> arities);

  void Update(const Point& point, double reward);
  // Mean of per-tuple UCB values.
  double Score(const Point& point, double k, double epsilon) const;
  // Mean of per-tuple means (k = 0).
  double Estimate(const Point& point) const { return Score(point, 0.0, 0.5); }

  std::int64_t total() const { return total_; }
  const std::vector<std::vector<std::size_t>>& tuples() const { return tuples_; }
  const std::map<Point, TupleStats>& stats(std::size_t tuple) const { return stats_.at(tuple); }
  TupleStats Lookup(std::size_t tuple, const Point& point) const;
  const std::vector<std::size_t>& arities() const { return arities_; }

 private:
  Point Project(std::size_t tuple, const Point& point) const;

  std::vector<std::size_t> arities_;
  std::vector<std::vector<std::size_t>> tuples_;
  std::vector<std::map<Point, TupleStats>> stats_;
  std::int64_t total_ = 0;
};

// M copies of `point`, each dimension resampled (to a different value) with
// probability `rate`; a candidate with no change gets one forced change.
std::vector<Point> Neighbours(const Point& point, const std::vector<std::size_t>& arities,
                              int count, Rng& rng, double rate = 0.3);

// Evaluated point with the highest model estimate; earliest wins ties.
Point Recommend(const NTupleModel& model, const std::vector<Point>& evaluated);

// Objective to maximise. Implementations own their rng stream.
class TuningProblem {
 public:
  virtual ~TuningProblem() = default;
  virtual std::shared_ptr<const ParameterSpace> space() const = 0;
  virtual double Evaluate(const ParameterSet& point) = 0;
};

struct NtbeaConfig {
  double k = 1.0;
  int neighbours = 50;
  int budget = 100;
  std::uint64_t seed = 0;
  double epsilon = 0.5;
  double resample_rate = 0.3;
};

struct EvaluationRecord {
  int index = 0;
  Point point;
  double reward = 0.0;
};

struct NtbeaResult {
  ParameterSet recommended;
  std::vector<EvaluationRecord> log;
  NTupleModel model;
};

NtbeaResult RunNtbea(TuningProblem& problem, const NtbeaConfig& config);
NtbeaResult RunNtbea(TuningProblem& problem, const NtbeaConfig& config, const Point& start);

// `eval_index, v0 v1 ..., reward` per line.
std::string FormatLogLine(const EvaluationRecord& record);
EvaluationRecord ParseLogLine(std::string_view line);

// OneMax over `bits` binary parameters: reward = ones / bits, plus optional
// Gaussian noise, clipped to [0, 1].
class OneMaxProblem : public TuningProblem {
 public:
  OneMaxProblem(int bits, double noise_sigma, std::uint64_t seed);

  std::shared_ptr<const ParameterSpace> space() const override { return space_; }
  double Evaluate(const ParameterSet& point) override;

 private:
  std::shared_ptr<const ParameterSpace> space_;
  double sigma_;
  Rng rng_;
};

}  // namespace thyia

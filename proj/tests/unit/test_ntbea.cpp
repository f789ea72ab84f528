#include <cmath>
#include <functional>
#include <map>

#include <gtest/gtest.h>

#include "thyia/ntbea.hpp"

namespace thyia {
namespace {

// Reward = fixed table lookup; no noise.
class TableProblem : public TuningProblem {
 public:
  TableProblem(std::vector<std::size_t> arities, std::function<double(const Point&)> f) : f_(std::move(f)) {
    std::vector<ParameterDef> defs;
    for (std::size_t i = 0; i < arities.size(); ++i) {
      ParameterDef d{"d" + std::to_string(i), {}, 0, "test"};
      for (std::size_t v = 0; v < arities[i]; ++v) d.values.push_back(std::to_string(v));
      defs.push_back(d);
    }
    space_ = std::make_shared<const ParameterSpace>(defs);
  }
  std::shared_ptr<const ParameterSpace> space() const override { return space_; }
  double Evaluate(const ParameterSet& p) override {
    ++calls;
    return f_(p.indices());
  }
  int calls = 0;

 private:
  std::shared_ptr<const ParameterSpace> space_;
  std::function<double(const Point&)> f_;
};

TEST(Ucb, Examples) {
  EXPECT_DOUBLE_EQ(Ucb({}, 0, 1.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(Ucb({4, 3.0}, 100, 0.0, 0.5), 0.75);
  EXPECT_NEAR(Ucb({1'000'000'000, 0.3e9}, 10, 2.0, 0.5), 0.3, 1e-3);
  EXPECT_NEAR(Ucb({2, 1.0}, 9, 1.0, 0.5), 0.5 + std::sqrt(std::log(10.0) / 2.5), 1e-15);
}

TEST(Neighbours, EachDiffersFromPoint) {
  Rng rng(1);
  const Point p{0, 1, 2};
  const auto ns = Neighbours(p, {2, 3, 4}, 3, rng);
  ASSERT_EQ(ns.size(), 3u);
  for (const auto& n : ns) {
    EXPECT_NE(n, p);
    EXPECT_LT(n[0], 2u);
    EXPECT_LT(n[1], 3u);
    EXPECT_LT(n[2], 4u);
  }
}

TEST(Neighbours, SingleBinaryDimensionFlips) {
  Rng rng(2);
  for (const auto& n : Neighbours({1}, {2}, 20, rng)) EXPECT_EQ(n, Point{0});
}

TEST(Neighbours, ChangeFrequency) {
  Rng rng(3);
  const int samples = 10000;
  const std::vector<std::size_t> arities(5, 3);
  const Point p(5, 0);
  std::vector<int> changed(5, 0);
  for (const auto& n : Neighbours(p, arities, samples, rng)) {
    for (int d = 0; d < 5; ++d) changed[d] += n[d] != p[d];
  }
  const double expected = 0.3 + std::pow(0.7, 5) / 5.0;
  for (int d = 0; d < 5; ++d) EXPECT_NEAR(changed[d] / double(samples), expected, 0.03) << d;
}

TEST(NTupleModel, UpdateAndConservation) {
  NTupleModel model({2, 3, 2});
  EXPECT_EQ(model.tuples().size(), 3u + 3u + 1u);
  model.Update({1, 2, 0}, 0.8);
  const std::size_t full = model.tuples().size() - 1;
  EXPECT_EQ(model.Lookup(full, {1, 2, 0}), (TupleStats{1, 0.8}));
  model.Update({1, 2, 0}, 0.4);
  for (std::size_t t = 0; t < model.tuples().size(); ++t) EXPECT_EQ(model.Lookup(t, {1, 2, 0}).n, 2);

  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    model.Update({std::uint32_t(UniformIndex(rng, 2)), std::uint32_t(UniformIndex(rng, 3)),
                  std::uint32_t(UniformIndex(rng, 2))},
                 UniformReal(rng));
  }
  for (std::size_t t = 0; t < model.tuples().size(); ++t) {
    std::int64_t n = 0;
    for (const auto& [k, s] : model.stats(t)) n += s.n;
    EXPECT_EQ(n, model.total());
  }
  EXPECT_THROW(model.Update({0, 0}, 0.1), ContractViolation);
  EXPECT_THROW(model.Update({0, 0, 0}, NAN), ContractViolation);
}

TEST(Recommend, Examples) {
  NTupleModel model({2, 2, 2});
  model.Update({0, 0, 0}, 0.1);
  EXPECT_EQ(Recommend(model, {{0, 0, 0}}), (Point{0, 0, 0}));
  model.Update({1, 1, 1}, 0.9);
  EXPECT_EQ(Recommend(model, {{0, 0, 0}, {1, 1, 1}}), (Point{1, 1, 1}));
  EXPECT_THROW(Recommend(model, {}), ContractViolation);
}

TEST(RunNtbea, SingleEvaluationReturnsStart) {
  TableProblem problem({3, 3}, [](const Point&) { return 0.5; });
  NtbeaConfig config;
  config.budget = 1;
  const auto result = RunNtbea(problem, config, {2, 1});
  EXPECT_EQ(result.recommended.indices(), (std::vector<std::uint32_t>{2, 1}));
  EXPECT_EQ(problem.calls, 1);
  EXPECT_THROW(RunNtbea(problem, NtbeaConfig{.budget = 0}), ContractViolation);
}

TEST(RunNtbea, NoiselessOneMax) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    OneMaxProblem problem(5, 0.0, seed);
    NtbeaConfig config;
    config.budget = 100;
    config.seed = seed;
    const auto result = RunNtbea(problem, config);
    hits += result.recommended.indices() == std::vector<std::uint32_t>(5, 1);
  }
  EXPECT_EQ(hits, 30);
}

TEST(RunNtbea, OneTupleMeansMatchLog) {
  OneMaxProblem problem(4, 0.1, 7);
  NtbeaConfig config;
  config.budget = 60;
  config.seed = 7;
  const auto result = RunNtbea(problem, config);
  std::map<std::pair<std::size_t, std::uint32_t>, std::pair<double, int>> raw;
  for (const auto& line : result.log) {
    const auto back = ParseLogLine(FormatLogLine(line));
    EXPECT_EQ(back.point, line.point);
    EXPECT_EQ(back.reward, line.reward);
    for (std::size_t d = 0; d < back.point.size(); ++d) {
      auto& [sum, n] = raw[{d, back.point[d]}];
      sum += back.reward;
      ++n;
    }
  }
  for (const auto& [key, agg] : raw) {
    Point probe(4, 0);
    probe[key.first] = key.second;
    const auto stats = result.model.Lookup(key.first, probe);
    EXPECT_EQ(stats.n, agg.second);
    EXPECT_NEAR(stats.sum / stats.n, agg.first / agg.second, 1e-12);
  }
}

TEST(RunNtbea, Deterministic) {
  auto run = [] {
    OneMaxProblem problem(5, 0.1, 11);
    NtbeaConfig config;
    config.budget = 50;
    config.seed = 3;
    return RunNtbea(problem, config);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].point, b.log[i].point);
    EXPECT_EQ(a.log[i].reward, b.log[i].reward);
  }
  EXPECT_EQ(a.recommended, b.recommended);
}

TEST(RunNtbea, FindsInteraction) {
  // Only the pair (d0, d1) = (2, 2) pays; 1-tuples alone cannot see it.
  TableProblem problem({3, 3, 3}, [](const Point& p) { return p[0] == 2 && p[1] == 2 ? 1.0 : 0.2; });
  NtbeaConfig config;
  config.budget = 150;
  config.seed = 5;
  const auto result = RunNtbea(problem, config, {0, 0, 0});
  EXPECT_EQ(result.recommended.index(0), 2u);
  EXPECT_EQ(result.recommended.index(1), 2u);
}

}  // namespace
}  // namespace thyia

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cpd/metrics.hpp"
#include "oracles.hpp"

namespace cpd {
namespace {

Tensor map_from(std::size_t h, std::size_t w, std::vector<float> v) { return Tensor(Shape{1, 1, h, w}, std::move(v)); }

Tensor random_map(std::size_t h, std::size_t w, std::mt19937_64& rng, bool binary) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor t(Shape{1, 1, h, w});
  for (auto& v : t.data()) v = binary ? static_cast<float>(u(rng) < 0.4f) : u(rng);
  return t;
}

using testing::brute_max_f;

TEST(FMeasure, MatchesBruteForceOnThreeImages) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tensor> maps, gts;
    for (int k = 0; k < 3; ++k) {
      maps.push_back(random_map(6 + k, 5, rng, false));
      gts.push_back(random_map(6 + k, 5, rng, true));
    }
    // Values sitting exactly on threshold grid points exercise the >= edge.
    maps[0].data()[0] = 128.0f / 255.0f;
    maps[1].data()[1] = 1.0f;
    maps[2].data()[2] = 0.0f;
    EXPECT_NEAR(f_measure(maps, gts).max_f, brute_max_f(maps, gts), 1e-12) << trial;
  }
}

TEST(FMeasure, QuantizedMapsMatchBruteForce) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<Tensor> maps, gts;
  for (int k = 0; k < 3; ++k) {
    Tensor m(Shape{1, 1, 9, 9});
    for (auto& v : m.data()) v = static_cast<float>(byte(rng)) / 255.0f;
    maps.push_back(m);
    gts.push_back(random_map(9, 9, rng, true));
  }
  EXPECT_NEAR(f_measure(maps, gts).max_f, brute_max_f(maps, gts), 1e-12);
}

TEST(FMeasure, AllZeroPredictionScoresZero) {
  std::mt19937_64 rng(7);
  std::vector<Tensor> maps, gts;
  for (int k = 0; k < 3; ++k) {
    maps.push_back(Tensor(Shape{1, 1, 8, 8}, 0.0f));
    Tensor g = random_map(8, 8, rng, true);
    g.data()[0] = 1.0f;
    gts.push_back(g);
  }
  const FMeasure f = f_measure(maps, gts);
  EXPECT_EQ(f.max_f, 0.0);
  EXPECT_EQ(f.avg_f, 0.0);
}

TEST(FMeasure, MaxAtLeastAverageOnRandomSets) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> maps, gts;
    for (int k = 0; k < 4; ++k) {
      maps.push_back(random_map(8, 8, rng, false));
      Tensor g = random_map(8, 8, rng, true);
      // A noisy copy of the truth keeps the sweep informative.
      for (std::size_t j = 0; j < g.numel(); ++j) maps.back().data()[j] = 0.5f * maps.back().data()[j] + 0.5f * g.data()[j];
      gts.push_back(g);
    }
    const FMeasure f = f_measure(maps, gts);
    EXPECT_GE(f.max_f + 1e-12, f.avg_f) << trial;
  }
}

TEST(FMeasure, InvariantToImageOrder) {
  std::mt19937_64 rng(9);
  std::vector<Tensor> maps, gts;
  for (int k = 0; k < 5; ++k) {
    maps.push_back(random_map(7, 7, rng, false));
    gts.push_back(random_map(7, 7, rng, true));
  }
  const FMeasure a = f_measure(maps, gts);
  std::reverse(maps.begin(), maps.end());
  std::reverse(gts.begin(), gts.end());
  const FMeasure b = f_measure(maps, gts);
  EXPECT_NEAR(a.max_f, b.max_f, 1e-12);
  EXPECT_NEAR(a.avg_f, b.avg_f, 1e-12);
}

TEST(FMeasure, AdaptiveThresholdByHand) {
  // mean 0.25 -> threshold 0.5; predicted {0.6, 0.4>=0.5? no} -> P = 1, R = 1/2
  const Tensor m = map_from(1, 4, {0.6f, 0.4f, 0.0f, 0.0f});
  const Tensor g = map_from(1, 4, {1, 1, 0, 0});
  const double p = 1.0, r = 0.5;
  EXPECT_NEAR(f_measure(std::span(&m, 1), std::span(&g, 1)).avg_f, 1.3 * p * r / (0.3 * p + r), 1e-12);
}

TEST(Metrics, PerfectPrediction) {
  const Tensor g = map_from(2, 3, {1, 0, 1, 0, 0, 1});
  EXPECT_EQ(mae(g, g), 0.0);
  EXPECT_EQ(ber(g, g).ber, 0.0);
  EXPECT_EQ(iou(g, g), 1.0);
  const MetricReport r = evaluate(std::span(&g, 1), std::span(&g, 1));
  EXPECT_EQ(r.max_f, 1.0);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.ber, 0.0);
  EXPECT_EQ(r.mean_iou, 1.0);
}

TEST(Metrics, InvertedPrediction) {
  const Tensor g = map_from(2, 2, {1, 0, 0, 1});
  const Tensor inv = map_from(2, 2, {0, 1, 1, 0});
  EXPECT_EQ(mae(inv, g), 1.0);
  EXPECT_EQ(ber(inv, g).ber, 100.0);
  EXPECT_EQ(iou(inv, g), 0.0);
}

TEST(Metrics, HalfOverlappingSquares) {
  // Two 4x4 squares sharing a 4x2 strip: |A n B| = 8, |A u B| = 24.
  Tensor a(Shape{1, 1, 8, 8}), b(Shape{1, 1, 8, 8});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      a.at(0, 0, y, x) = 1.0f;
      b.at(0, 0, y, x + 2) = 1.0f;
    }
  EXPECT_NEAR(iou(a, b), 1.0 / 3.0, 1e-15);
}

TEST(Metrics, LoopOraclesOnRandomMaps) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor m = random_map(5, 7, rng, false);
    const Tensor g = random_map(5, 7, rng, true);
    double abs_sum = 0, tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t j = 0; j < m.numel(); ++j) {
      const double v = m.data()[j];
      const bool gt = g.data()[j] == 1.0f;
      abs_sum += std::abs(v - g.data()[j]);
      const bool p = v >= 0.5;
      tp += p && gt;
      tn += !p && !gt;
      fp += p && !gt;
      fn += !p && gt;
    }
    EXPECT_NEAR(mae(m, g), abs_sum / m.numel(), 1e-12);
    if (tp + fn > 0 && tn + fp > 0) {
      EXPECT_NEAR(ber(m, g).ber, 100.0 * (1.0 - 0.5 * (tp / (tp + fn) + tn / (tn + fp))), 1e-9);
    }
    const double uni = tp + fp + fn;
    EXPECT_NEAR(iou(m, g), uni == 0 ? 1.0 : tp / uni, 1e-12);
  }
}

TEST(Metrics, SingleClassGroundTruthIsFlagged) {
  const Tensor g(Shape{1, 1, 2, 2}, 0.0f);
  const Tensor m = map_from(2, 2, {0.9f, 0.1f, 0.1f, 0.1f});
  const BerResult r = ber(m, g);
  EXPECT_TRUE(r.single_class);
  EXPECT_NEAR(r.ber, 25.0, 1e-12);
  const MetricReport rep = evaluate(std::span(&m, 1), std::span(&g, 1));
  EXPECT_EQ(rep.ber_flagged, 1u);
}

TEST(Metrics, EmptyConventions) {
  const Tensor zero(Shape{1, 1, 2, 2}, 0.0f);
  const PrPoint both = precision_recall(zero, zero, 0.5);
  EXPECT_EQ(both.precision, 1.0);
  EXPECT_EQ(both.recall, 1.0);
  EXPECT_EQ(iou(zero, zero), 1.0);
  const Tensor one(Shape{1, 1, 2, 2}, 1.0f);
  const PrPoint miss = precision_recall(zero, one, 0.5);
  EXPECT_EQ(miss.precision, 0.0);
  EXPECT_EQ(miss.recall, 0.0);
  const PrPoint spurious = precision_recall(one, zero, 0.5);
  EXPECT_EQ(spurious.precision, 0.0);
  EXPECT_EQ(spurious.recall, 1.0);
  EXPECT_EQ(f_beta(0.0, 0.0), 0.0);
}

TEST(Metrics, Errors) {
  const Tensor a(Shape{1, 1, 2, 2}), b(Shape{1, 1, 2, 3});
  EXPECT_THROW(mae(a, b), ShapeError);
  EXPECT_THROW(evaluate({}, {}), std::invalid_argument);
  std::vector<Tensor> two{a, a};
  EXPECT_THROW(evaluate(two, std::span(&a, 1)), std::invalid_argument);
}

TEST(Report, TsvLayout) {
  const Tensor g = map_from(1, 2, {1, 0});
  const MetricReport r = evaluate(std::span(&g, 1), std::span(&g, 1), std::vector<std::string>{"img0"});
  const std::vector<NamedReport> reps{{"a", r}, {"b", r}};
  const std::string tsv = report_tsv(reps, true);
  EXPECT_EQ(tsv.rfind("model\tmae\tmax_f\tavg_f\tmean_iou\tber\tber_single_class_images\n", 0), 0u);
  EXPECT_NE(tsv.find("\n\nimage\ta.mae\ta.iou\ta.ber\tb.mae"), std::string::npos);
  EXPECT_NE(tsv.find("\nimg0\t0.000000"), std::string::npos);
  EXPECT_EQ(report_tsv(reps, false).find("ber"), std::string::npos);
}

}  // namespace
}  // namespace cpd

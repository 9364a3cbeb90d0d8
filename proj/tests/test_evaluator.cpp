#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "patchcon/evaluator.hpp"

using namespace patchcon;

namespace {

Mask from_rows(std::initializer_list<std::initializer_list<int>> rows) {
    Mask m(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
    int y = 0;
    for (const auto& r : rows) {
        int x = 0;
        for (int v : r) m.at(y, x++) = static_cast<std::uint8_t>(v);
        ++y;
    }
    return m;
}

}  // namespace

TEST(Binarize, StrictThreshold) {
    Raster<float> p(1, 4);
    p.at(0, 0) = 0.0f;
    p.at(0, 1) = 0.5f;
    p.at(0, 2) = 0.51f;
    p.at(0, 3) = 1.0f;
    EXPECT_EQ(binarize(p, 0.5), from_rows({{0, 0, 1, 1}}));
    EXPECT_EQ(binarize(p, 0.0), from_rows({{0, 1, 1, 1}}));
    EXPECT_EQ(binarize(p, 1.0), from_rows({{0, 0, 0, 0}}));
}

TEST(ComputeMetrics, PerfectPrediction) {
    const Mask gt = from_rows({{1, 0}, {1, 1}});
    const auto m = compute_metrics(gt, gt).metrics;
    EXPECT_EQ(m.precision, 1.0);
    EXPECT_EQ(m.recall, 1.0);
    EXPECT_EQ(m.f1, 1.0);
    EXPECT_EQ(m.iou, 1.0);
}

TEST(ComputeMetrics, DisjointMasks) {
    const auto m = compute_metrics(from_rows({{1, 0}, {0, 0}}), from_rows({{0, 1}, {0, 0}})).metrics;
    EXPECT_EQ(m.precision, 0.0);
    EXPECT_EQ(m.recall, 0.0);
    EXPECT_EQ(m.f1, 0.0);
    EXPECT_EQ(m.iou, 0.0);
}

TEST(ComputeMetrics, PredictionCoversTruthPlusEqualExtra) {
    const Mask gt = from_rows({{1, 1, 0, 0}});
    const Mask pred = from_rows({{1, 1, 1, 1}});
    const auto r = compute_metrics(pred, gt);
    EXPECT_EQ(r.counts, (ConfusionCounts{2, 2, 0}));
    EXPECT_DOUBLE_EQ(r.metrics.precision, 0.5);
    EXPECT_DOUBLE_EQ(r.metrics.recall, 1.0);
    EXPECT_DOUBLE_EQ(r.metrics.f1, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.metrics.iou, 0.5);
}

TEST(ComputeMetrics, EmptyDenominatorConventions) {
    const Mask empty(2, 2), some = from_rows({{1, 0}, {0, 0}});
    auto both = compute_metrics(empty, empty).metrics;
    EXPECT_EQ(both.precision, 1.0);
    EXPECT_EQ(both.recall, 1.0);
    EXPECT_EQ(both.f1, 1.0);
    EXPECT_EQ(both.iou, 1.0);
    auto no_pred = compute_metrics(empty, some).metrics;
    EXPECT_EQ(no_pred.precision, 0.0);
    EXPECT_EQ(no_pred.recall, 0.0);
    EXPECT_EQ(no_pred.f1, 0.0);
    auto no_gt = compute_metrics(some, empty).metrics;
    EXPECT_EQ(no_gt.precision, 0.0);
    EXPECT_EQ(no_gt.recall, 0.0);
    EXPECT_EQ(no_gt.iou, 0.0);
}

TEST(ComputeMetrics, ShapeMismatchThrows) {
    EXPECT_THROW(compute_metrics(Mask(2, 2), Mask(2, 3)), std::invalid_argument);
}

TEST(Aggregate, MicroAndMeanFromKnownCounts) {
    // Image a: TP 3, FP 1, FN 0.  Image b: TP 1, FP 0, FN 3.
    ImageMetrics a{"a", {3, 1, 0}, metrics_from_counts({3, 1, 0})};
    ImageMetrics b{"b", {1, 0, 3}, metrics_from_counts({1, 0, 3})};
    const auto r = aggregate({a, b}, 0.5, Aggregation::per_image_mean);
    // mean: P = (3/4 + 1)/2, R = (1 + 1/4)/2, F1 = (6/7 + 2/5)/2, IoU = (3/4 + 1/4)/2
    EXPECT_DOUBLE_EQ(r.per_image_mean.precision, 0.875);
    EXPECT_DOUBLE_EQ(r.per_image_mean.recall, 0.625);
    EXPECT_DOUBLE_EQ(r.per_image_mean.f1, (6.0 / 7.0 + 2.0 / 5.0) / 2.0);
    EXPECT_DOUBLE_EQ(r.per_image_mean.iou, 0.5);
    // micro: TP 4, FP 1, FN 3
    EXPECT_DOUBLE_EQ(r.dataset_micro.precision, 0.8);
    EXPECT_DOUBLE_EQ(r.dataset_micro.recall, 4.0 / 7.0);
    EXPECT_DOUBLE_EQ(r.dataset_micro.f1, 8.0 / 12.0);
    EXPECT_DOUBLE_EQ(r.dataset_micro.iou, 0.5);
    EXPECT_DOUBLE_EQ(r.summary.f1, r.per_image_mean.f1);
    EXPECT_DOUBLE_EQ(aggregate({a, b}, 0.5, Aggregation::dataset_micro).summary.f1, r.dataset_micro.f1);
}

TEST(MetricsProperty, MatchesSetArithmeticAndF1IoURelation) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Mask pred = oracle::random_mask(rng, 32, 32, 0.02 + 0.5 * (trial % 7) / 7.0);
        const Mask gt = oracle::random_mask(rng, 32, 32, 0.02 + 0.5 * (trial % 5) / 5.0);
        const auto got = compute_metrics(pred, gt).metrics;
        const auto want = oracle::set_metrics(pred, gt);
        EXPECT_EQ(got.precision, want.precision);
        EXPECT_EQ(got.recall, want.recall);
        EXPECT_EQ(got.f1, want.f1);
        EXPECT_EQ(got.iou, want.iou);
        EXPECT_NEAR(got.f1, 2 * got.iou / (1 + got.iou), 1e-9);
        EXPECT_LE(got.iou, got.f1);
        EXPECT_LE(got.f1, 1.0);
    }
}

TEST(MetricsProperty, SwappingPredAndTruthSwapsPrecisionAndRecall) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        const Mask a = oracle::random_mask(rng, 16, 16, 0.3);
        const Mask b = oracle::random_mask(rng, 16, 16, 0.2);
        const auto ab = compute_metrics(a, b).metrics;
        const auto ba = compute_metrics(b, a).metrics;
        EXPECT_EQ(ab.precision, ba.recall);
        EXPECT_EQ(ab.recall, ba.precision);
        EXPECT_NEAR(ab.f1, ba.f1, 1e-15);
        EXPECT_EQ(ab.iou, ba.iou);
    }
}

TEST(Report, JsonCarriesThresholdAndBothAggregations) {
    ImageMetrics a{"a", {3, 1, 0}, metrics_from_counts({3, 1, 0})};
    const auto j = to_json(aggregate({a}, 0.3, Aggregation::dataset_micro));
    EXPECT_EQ(j["threshold"], 0.3);
    EXPECT_EQ(j["aggregation"], "dataset-micro");
    EXPECT_TRUE(j.contains("per_image_mean"));
    EXPECT_TRUE(j.contains("dataset_micro"));
    EXPECT_EQ(j["per_image"][0]["id"], "a");
    EXPECT_EQ(j["per_image"][0]["tp"], 3);
    EXPECT_NE(format_table(aggregate({a}, 0.3, Aggregation::dataset_micro)).find("75.00%"), std::string::npos);
}

TEST(Overlay, RedTruthGreenPrediction) {
    const auto o = make_overlay(from_rows({{1, 0, 1}}), from_rows({{0, 1, 1}}));
    EXPECT_EQ(o.at(0, 0, 0), 255);
    EXPECT_EQ(o.at(0, 0, 1), 0);
    EXPECT_EQ(o.at(0, 1, 0), 0);
    EXPECT_EQ(o.at(0, 1, 1), 255);
    EXPECT_EQ(o.at(0, 2, 0), 255);
    EXPECT_EQ(o.at(0, 2, 1), 255);
    EXPECT_EQ(o.at(0, 2, 2), 0);
}

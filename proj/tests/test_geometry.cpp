#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "idoc/error.hpp"
#include "idoc/geometry.hpp"
#include "support.hpp"

using namespace idoc;
using idoc::testing::Gen;

TEST(Iou, IdenticalBoxesGiveOne)
{
    EXPECT_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero)
{
    EXPECT_EQ(iou({0, 0, 10, 10}, {100, 100, 5, 5}), 0.0);
    EXPECT_EQ(iou({0, 0, 10, 10}, {10, 0, 10, 10}), 0.0);  // touching edges share no area
}

TEST(Iou, HalfShiftIsOneThird)
{
    EXPECT_EQ(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0);
    EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 0.3333, 1e-4);
}

TEST(Iou, DiagonalShiftIs81Over119)
{
    EXPECT_EQ(iou({0, 0, 10, 10}, {1, 1, 10, 10}), 81.0 / 119.0);
}

TEST(Iou, ContainedBox)
{
    EXPECT_EQ(iou({0, 0, 10, 10}, {2, 2, 5, 5}), 25.0 / 100.0);
}

TEST(Iou, LargeCoordinatesDoNotOverflow)
{
    const BBox a{0, 0, 100000, 100000};
    const BBox b{50000, 0, 100000, 100000};
    EXPECT_EQ(iou(a, b), 5e9 / 1.5e10);
}

TEST(Iou, PropertiesOnRandomBoxes)
{
    Gen gen(1);
    for (int i = 0; i < 100000; ++i) {
        const BBox a = gen.box();
        const BBox b = gen.box();
        const double ab = iou(a, b);
        ASSERT_EQ(ab, iou(b, a));
        ASSERT_GE(ab, 0.0);
        ASSERT_LE(ab, 1.0);
        ASSERT_EQ(iou(a, a), 1.0);
    }
}

TEST(Geometry, ClipAndContains)
{
    EXPECT_EQ(clip({-5, -5, 10, 10}, 100, 100), (BBox{0, 0, 5, 5}));
    EXPECT_EQ(clip({95, 98, 10, 10}, 100, 100), (BBox{95, 98, 5, 2}));
    EXPECT_FALSE(clip({100, 0, 10, 10}, 100, 100).has_value());
    EXPECT_TRUE(contains({0, 0, 10, 10}, {2, 2, 8, 8}));
    EXPECT_FALSE(contains({0, 0, 10, 10}, {2, 2, 9, 8}));
}

TEST(Nms, EmptyInput)
{
    EXPECT_TRUE(nms({}, 0.5).empty());
}

TEST(Nms, ExactDuplicateSuppressed)
{
    const std::vector<ScoredBox> boxes{{{0, 0, 10, 10}, 0.9}, {{0, 0, 10, 10}, 0.8}};
    const auto kept = nms(boxes, 0.5);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].score, 0.9);
}

TEST(Nms, KeepsFirstAndThird)
{
    const std::vector<ScoredBox> boxes{{{0, 0, 10, 10}, 0.9}, {{1, 1, 10, 10}, 0.8}, {{20, 20, 5, 5}, 0.7}};
    EXPECT_EQ(nms_indices(boxes, 0.5), (std::vector<std::size_t>{0, 2}));
}

TEST(Nms, OutputIsInDescendingScoreOrder)
{
    const std::vector<ScoredBox> boxes{{{50, 50, 5, 5}, 0.2}, {{0, 0, 5, 5}, 0.9}, {{20, 20, 5, 5}, 0.5}};
    EXPECT_EQ(nms_indices(boxes, 0.5), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Nms, ScoreTiesBrokenByBoxThenPosition)
{
    const std::vector<ScoredBox> boxes{{{5, 0, 4, 4}, 0.5}, {{0, 9, 4, 4}, 0.5}, {{0, 0, 4, 4}, 0.5}};
    EXPECT_EQ(nms_indices(boxes, 0.5), (std::vector<std::size_t>{2, 1, 0}));
    // Identical boxes and scores: the earlier input survives.
    const std::vector<ScoredBox> same{{{0, 0, 4, 4}, 0.5}, {{0, 0, 4, 4}, 0.5}};
    EXPECT_EQ(nms_indices(same, 0.5), (std::vector<std::size_t>{0}));
}

TEST(Nms, ThresholdIsStrict)
{
    // IoU exactly 1/3 survives a 1/3 threshold.
    const std::vector<ScoredBox> boxes{{{0, 0, 10, 10}, 0.9}, {{5, 0, 10, 10}, 0.8}};
    EXPECT_EQ(nms(boxes, 50.0 / 150.0).size(), 2u);
    EXPECT_EQ(nms(boxes, 0.33).size(), 1u);
}

TEST(Nms, RejectsThresholdOutsideUnitInterval)
{
    const std::vector<ScoredBox> boxes{{{0, 0, 10, 10}, 0.9}};
    EXPECT_THROW(nms(boxes, 1.5), Error);
    EXPECT_THROW(nms(boxes, -0.1), Error);
    EXPECT_THROW(nms(boxes, std::nan("")), Error);
}

namespace {

std::vector<ScoredBox> random_set(Gen& gen, int max_boxes)
{
    std::vector<ScoredBox> boxes(static_cast<std::size_t>(gen.integer(0, max_boxes)));
    for (ScoredBox& b : boxes) {
        b.bbox = gen.box(60, 40);
        // Coarse scores force plenty of ties.
        b.score = gen.integer(0, 10) / 10.0;
    }
    return boxes;
}

// Straight from the definition: repeatedly take the best remaining box and
// drop everything overlapping it by more than the threshold.
std::vector<std::size_t> brute_force_nms(const std::vector<ScoredBox>& boxes, double t)
{
    std::vector<std::size_t> remaining(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        remaining[i] = i;
    }
    std::vector<std::size_t> kept;
    while (!remaining.empty()) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < remaining.size(); ++r) {
            const ScoredBox& a = boxes[remaining[r]];
            const ScoredBox& b = boxes[remaining[best]];
            const bool better = a.score > b.score || (a.score == b.score && a.bbox < b.bbox);
            if (better) {
                best = r;
            }
        }
        const std::size_t chosen = remaining[best];
        kept.push_back(chosen);
        std::vector<std::size_t> next;
        for (std::size_t r : remaining) {
            if (r != chosen) {
                const BBox& a = boxes[r].bbox;
                const BBox& b = boxes[chosen].bbox;
                const long long iw = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
                const long long ih = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
                const long long inter = iw * ih;
                const double v = inter == 0 ? 0.0
                                            : static_cast<double>(inter) /
                                                  static_cast<double>(a.area() + b.area() - inter);
                if (!(v > t)) {
                    next.push_back(r);
                }
            }
        }
        remaining = next;
    }
    return kept;
}

}  // namespace

TEST(Nms, MatchesBruteForceOnSmallSets)
{
    Gen gen(2);
    for (int trial = 0; trial < 20000; ++trial) {
        const auto boxes = random_set(gen, 8);
        const double t = gen.integer(0, 10) / 10.0;
        ASSERT_EQ(nms_indices(boxes, t), brute_force_nms(boxes, t)) << "trial " << trial;
    }
}

TEST(Nms, PropertiesOnRandomSets)
{
    Gen gen(3);
    for (int trial = 0; trial < 10000; ++trial) {
        const auto boxes = random_set(gen, 30);
        const double t = gen.real(0.0, 1.0);
        const auto kept = nms(boxes, t);

        ASSERT_LE(kept.size(), boxes.size());
        for (const ScoredBox& k : kept) {
            ASSERT_TRUE(std::any_of(boxes.begin(), boxes.end(), [&](const ScoredBox& b) {
                return b.bbox == k.bbox && b.score == k.score;
            }));
        }
        for (std::size_t i = 0; i < kept.size(); ++i) {
            for (std::size_t j = i + 1; j < kept.size(); ++j) {
                ASSERT_LE(iou(kept[i].bbox, kept[j].bbox), t);
            }
            if (i > 0) {
                ASSERT_GE(kept[i - 1].score, kept[i].score);
            }
        }

        const auto again = nms(kept, t);
        ASSERT_EQ(again.size(), kept.size());
        for (std::size_t i = 0; i < kept.size(); ++i) {
            ASSERT_EQ(again[i].bbox, kept[i].bbox);
        }
        ASSERT_EQ(nms(boxes, 1.0).size(), boxes.size());
    }
}

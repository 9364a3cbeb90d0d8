#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "patchcon/morphology.hpp"

using namespace patchcon;

namespace {

const StructuringElement kSquare = StructuringElement::square3();

Mask single_pixel(int rows, int cols, int y, int x) {
    Mask m(rows, cols);
    m.at(y, x) = 1;
    return m;
}

Mask block(int rows, int cols, int top, int left, int h, int w) {
    Mask m(rows, cols);
    for (int y = top; y < top + h; ++y)
        for (int x = left; x < left + w; ++x) m.at(y, x) = 1;
    return m;
}

}  // namespace

TEST(StructuringElement, RejectsMissingOriginOrAsymmetry) {
    EXPECT_THROW(StructuringElement({{0, 1}, {0, -1}}), std::invalid_argument);
    EXPECT_THROW(StructuringElement({{0, 0}, {0, 1}}), std::invalid_argument);
    EXPECT_NO_THROW(StructuringElement({{0, 0}, {0, 1}, {0, -1}}));
    EXPECT_EQ(kSquare.offsets().size(), 9u);
}

TEST(Erode, IsolatedPixelVanishes) {
    EXPECT_EQ(count_foreground(erode(single_pixel(7, 7, 3, 3), kSquare, 1)), 0u);
}

TEST(Erode, SolidFourByFourLeavesTwoByTwoCore) {
    const Mask m = block(8, 8, 2, 2, 4, 4);
    const Mask expected = oracle::morph_scan(m, true, 1);
    EXPECT_EQ(erode(m, kSquare, 1), expected);
    EXPECT_EQ(expected, block(8, 8, 3, 3, 2, 2));
}

TEST(Erode, ZeroIterationsIsIdentity) {
    std::mt19937_64 rng(2);
    const Mask m = oracle::random_mask(rng, 9, 13, 0.5);
    EXPECT_EQ(erode(m, kSquare, 0), m);
    EXPECT_EQ(dilate(m, kSquare, 0), m);
    EXPECT_THROW(erode(m, kSquare, -1), std::invalid_argument);
}

TEST(Erode, OutOfBoundsCountsAsBackground) {
    const Mask full(5, 5, 1, 1);
    const Mask e = erode(full, kSquare, 1);
    EXPECT_EQ(e, block(5, 5, 1, 1, 3, 3));
}

TEST(Dilate, SinglePixelGrowsToThreeByThree) {
    const Mask d = dilate(single_pixel(7, 7, 3, 3), kSquare, 1);
    EXPECT_EQ(d, oracle::morph_scan(single_pixel(7, 7, 3, 3), false, 1));
    EXPECT_EQ(count_foreground(d), 9u);
}

TEST(Dilate, EmptyStaysEmpty) {
    EXPECT_EQ(count_foreground(dilate(Mask(10, 10), kSquare, 5)), 0u);
}

TEST(MorphologyProperty, DualityOnInteriorPaddedMasks) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int iters = 1 + trial % 3;
        Mask m(16, 16);
        const Mask noise = oracle::random_mask(rng, 16, 16, 0.6);
        for (int y = iters; y < 16 - iters; ++y)
            for (int x = iters; x < 16 - iters; ++x) m.at(y, x) = noise.at(y, x);
        EXPECT_EQ(erode(m, kSquare, iters), complement(dilate(complement(m), kSquare, iters)));
    }
}

TEST(MorphologyProperty, ExtensivityAndMonotonicity) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const Mask m1 = oracle::random_mask(rng, 16, 16, 0.4);
        Mask m2 = m1;
        const Mask extra = oracle::random_mask(rng, 16, 16, 0.2);
        for (std::size_t i = 0; i < m2.size(); ++i) m2.data()[i] |= extra.data()[i];
        for (int iters : {1, 2}) {
            EXPECT_TRUE(is_subset(erode(m1, kSquare, iters), m1));
            EXPECT_TRUE(is_subset(m1, dilate(m1, kSquare, iters)));
            EXPECT_TRUE(is_subset(erode(m1, kSquare, iters), erode(m2, kSquare, iters)));
            EXPECT_TRUE(is_subset(dilate(m1, kSquare, iters), dilate(m2, kSquare, iters)));
        }
    }
}

TEST(MorphologyProperty, MatchesNeighborhoodScanOracle) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 60; ++trial) {
        const Mask m = oracle::random_mask(rng, 16, 16, 0.3 + 0.4 * (trial % 3) / 2.0);
        for (int iters : {1, 2, 5}) {
            ASSERT_EQ(erode(m, kSquare, iters), oracle::morph_scan(m, true, iters));
            ASSERT_EQ(dilate(m, kSquare, iters), oracle::morph_scan(m, false, iters));
        }
    }
}

TEST(PatchContours, IterationCountsByDensity) {
    EXPECT_EQ(contour_iterations(DensityClass::dense).erosion, 2);
    EXPECT_EQ(contour_iterations(DensityClass::dense).dilation, 2);
    EXPECT_EQ(contour_iterations(DensityClass::sparse).erosion, 1);
    EXPECT_EQ(contour_iterations(DensityClass::sparse).dilation, 5);
}

TEST(PatchContours, EmptySparsePatchHasNoContours) {
    const auto c = patch_contours(Mask(16, 16), DensityClass::sparse);
    EXPECT_EQ(count_foreground(c.inner), 0u);
    EXPECT_EQ(count_foreground(c.outer), 0u);
}

TEST(PatchContours, SinglePixelSparsePatch) {
    const Mask m = single_pixel(16, 16, 8, 8);
    const auto c = patch_contours(m, DensityClass::sparse);
    EXPECT_EQ(c.inner, m);
    const Mask halo = subtract(oracle::morph_scan(m, false, 5), m);
    EXPECT_EQ(c.outer, halo);
    EXPECT_EQ(count_foreground(c.outer), 120u);
}

TEST(PatchContours, SolidSixBySixDenseBlock) {
    const Mask m = block(8, 8, 1, 1, 6, 6);
    const auto c = patch_contours(m, DensityClass::dense);
    EXPECT_EQ(c.inner, subtract(m, oracle::morph_scan(m, true, 2)));
    EXPECT_EQ(count_foreground(c.inner), 32u);
    EXPECT_EQ(c.outer, subtract(oracle::morph_scan(m, false, 2), m));
}

TEST(PatchContours, InnerAndCorePartitionThePatch) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const Mask m = oracle::random_blob_mask(rng, 16, 16, 3, 8);
        for (auto cls : {DensityClass::dense, DensityClass::sparse}) {
            const auto c = patch_contours(m, cls);
            const Mask core = erode(m, kSquare, contour_iterations(cls).erosion);
            EXPECT_TRUE(is_disjoint(c.inner, core));
            for (std::size_t i = 0; i < m.size(); ++i)
                ASSERT_EQ(m.data()[i], c.inner.data()[i] | core.data()[i]);
            EXPECT_TRUE(is_disjoint(c.outer, m));
        }
    }
}

TEST(ComposeContours, AllZeroMask) {
    const Mask gt(64, 64);
    const auto c = compose_contours(partition(gt, 4), gt);
    EXPECT_EQ(count_foreground(c.inner), 0u);
    EXPECT_EQ(count_foreground(c.outer), 0u);
}

TEST(ComposeContours, SingleLesionInsideOnePatch) {
    const Mask gt = block(64, 64, 20, 21, 3, 4);  // inside patch (1, 1) of a 4x4 grid of 16px patches
    const auto grid = partition(gt, 4);
    const auto c = compose_contours(grid, gt);
    const auto& info = grid.at(1, 1);
    const auto local = patch_contours(patch_view(gt, info).to_raster(), info.density_class);
    Mask inner(64, 64), outer(64, 64);
    paste(inner, local.inner, info.window);
    paste(outer, local.outer, info.window);
    EXPECT_EQ(c.inner, inner);
    EXPECT_EQ(c.outer, outer);
}

TEST(ComposeContours, PatchesAreProcessedIndependently) {
    // A bar crossing the seam between two patches must not dilate across the seam.
    Mask gt(16, 32);
    for (int y = 4; y < 8; ++y)
        for (int x = 12; x < 20; ++x) gt.at(y, x) = 1;
    const auto c = compose_contours(partition(gt, 2), gt);  // 8x16 patches
    for (int y = 8; y < 16; ++y)
        for (int x = 0; x < 32; ++x) EXPECT_EQ(c.outer.at(y, x), 0) << y << "," << x;
}

TEST(ComposeContours, InvariantsOnRandomMasks) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 10; ++trial) {
        const Mask gt = oracle::random_blob_mask(rng, 256, 256, 40, 30);
        const auto c = compose_contours(partition(gt, 16), gt);
        EXPECT_TRUE(is_subset(c.inner, gt));
        EXPECT_TRUE(is_disjoint(c.outer, gt));
    }
}

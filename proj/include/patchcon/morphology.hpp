#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "patchcon/patching.hpp"
#include "patchcon/raster.hpp"

namespace patchcon {

/// Set of (dy, dx) neighbor offsets. Must contain the origin and be closed under negation.
class StructuringElement {
public:
    using Offset = std::pair<int, int>;

    explicit StructuringElement(std::vector<Offset> offsets) : offsets_(std::move(offsets)) {
        std::sort(offsets_.begin(), offsets_.end());
        offsets_.erase(std::unique(offsets_.begin(), offsets_.end()), offsets_.end());
        if (!std::binary_search(offsets_.begin(), offsets_.end(), Offset{0, 0}))
            throw std::invalid_argument("structuring element must contain (0, 0)");
        for (const auto& [dy, dx] : offsets_)
            if (!std::binary_search(offsets_.begin(), offsets_.end(), Offset{-dy, -dx}))
                throw std::invalid_argument("structuring element must be symmetric under negation");
    }

    /// 3x3 full square (8-connected).
    static StructuringElement square3() {
        std::vector<Offset> o;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) o.emplace_back(dy, dx);
        return StructuringElement(std::move(o));
    }

    const std::vector<Offset>& offsets() const noexcept { return offsets_; }

private:
    std::vector<Offset> offsets_;
};

namespace detail {

// Combines the mask shifted by every offset, whole rows at a time. Out-of-bounds reads are 0.
template <bool Intersect>
Mask shift_combine(const Mask& in, const StructuringElement& se) {
    const int rows = in.rows();
    const int cols = in.cols();
    Mask out(rows, cols, 1, Intersect ? 1 : 0);
    for (const auto& [dy, dx] : se.offsets()) {
        for (int y = 0; y < rows; ++y) {
            const int sy = y + dy;
            const bool row_inside = sy >= 0 && sy < rows;
            for (int x = 0; x < cols; ++x) {
                const int sx = x + dx;
                const std::uint8_t v = (row_inside && sx >= 0 && sx < cols) ? in.at(sy, sx) : 0;
                if constexpr (Intersect)
                    out.at(y, x) &= v;
                else
                    out.at(y, x) |= v;
            }
        }
    }
    return out;
}

}  // namespace detail

inline Mask erode(const Mask& mask, const StructuringElement& se, int iterations) {
    if (iterations < 0) throw std::invalid_argument("erode: iterations must be >= 0");
    Mask cur = mask;
    for (int i = 0; i < iterations; ++i) cur = detail::shift_combine<true>(cur, se);
    return cur;
}

inline Mask dilate(const Mask& mask, const StructuringElement& se, int iterations) {
    if (iterations < 0) throw std::invalid_argument("dilate: iterations must be >= 0");
    Mask cur = mask;
    for (int i = 0; i < iterations; ++i) cur = detail::shift_combine<false>(cur, se);
    return cur;
}

/// Inner band (lesion pixels near the edge) and outer band (background pixels near the edge).
struct ContourPair {
    Mask inner;
    Mask outer;
};

struct ContourIterations {
    int erosion = 0;
    int dilation = 0;
};

/// Dense patches use (erosion 2, dilation 2); sparse patches (erosion 1, dilation 5) to reach more background.
inline ContourIterations contour_iterations(DensityClass density) {
    return density == DensityClass::dense ? ContourIterations{2, 2} : ContourIterations{1, 5};
}

inline ContourPair patch_contours(const Mask& patch_mask, DensityClass density,
                                  const StructuringElement& se = StructuringElement::square3()) {
    const auto it = contour_iterations(density);
    ContourPair pair;
    pair.inner = subtract(patch_mask, erode(patch_mask, se, it.erosion));
    pair.outer = subtract(dilate(patch_mask, se, it.dilation), patch_mask);
    return pair;
}

/// Runs patch_contours on every patch independently and writes each result into its window.
inline ContourPair compose_contours(const PatchGrid& grid, const Mask& gt_mask,
                                    const StructuringElement& se = StructuringElement::square3()) {
    if (grid.source_rows() != gt_mask.rows() || grid.source_cols() != gt_mask.cols())
        throw std::invalid_argument("compose_contours: grid does not match mask dimensions");
    ContourPair full{Mask(gt_mask.rows(), gt_mask.cols()), Mask(gt_mask.rows(), gt_mask.cols())};
    for (const auto& info : grid.entries) {
        if (info.foreground_pixels == 0) continue;
        const Mask patch = patch_view(gt_mask, info).to_raster();
        const ContourPair pc = patch_contours(patch, info.density_class, se);
        paste(full.inner, pc.inner, info.window);
        paste(full.outer, pc.outer, info.window);
    }
    return full;
}

}  // namespace patchcon

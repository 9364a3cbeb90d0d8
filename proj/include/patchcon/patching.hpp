#pragma once

#include <cstddef>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "patchcon/raster.hpp"

namespace patchcon {

enum class DensityClass { sparse, dense };

inline const char* to_string(DensityClass c) { return c == DensityClass::dense ? "dense" : "sparse"; }

/// Lesion-dense iff strictly more than half the window is foreground. Ties are sparse.
inline DensityClass classify_density(double foreground_proportion) {
    return foreground_proportion > 0.5 ? DensityClass::dense : DensityClass::sparse;
}

struct PixelWindow {
    int top = 0;
    int left = 0;
    int height = 0;
    int width = 0;

    int area() const noexcept { return height * width; }
    friend bool operator==(const PixelWindow&, const PixelWindow&) = default;
};

struct PatchInfo {
    int row = 0;
    int col = 0;
    PixelWindow window;
    std::size_t foreground_pixels = 0;
    double foreground_proportion = 0.0;
    DensityClass density_class = DensityClass::sparse;
};

/// n x n tiling of an H x W raster into equal windows.
struct PatchGrid {
    int n = 1;
    int patch_h = 0;
    int patch_w = 0;
    std::vector<PatchInfo> entries;  // row-major, index = row * n + col

    int source_rows() const noexcept { return patch_h * n; }
    int source_cols() const noexcept { return patch_w * n; }
    const PatchInfo& at(int row, int col) const { return entries.at(static_cast<std::size_t>(row) * n + col); }
};

inline void check_divisible(int rows, int cols, int n) {
    if (n < 1 || rows % n != 0 || cols % n != 0) {
        std::ostringstream msg;
        msg << "cannot partition " << rows << "x" << cols << " (H=" << rows << ", W=" << cols
            << ") into a " << n << "x" << n << " grid: dimensions must be divisible by n";
        throw std::invalid_argument(msg.str());
    }
}

inline PatchGrid partition(const Mask& mask, int n) {
    check_divisible(mask.rows(), mask.cols(), n);
    PatchGrid grid;
    grid.n = n;
    grid.patch_h = mask.rows() / n;
    grid.patch_w = mask.cols() / n;
    grid.entries.reserve(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            PatchInfo info;
            info.row = r;
            info.col = c;
            info.window = {r * grid.patch_h, c * grid.patch_w, grid.patch_h, grid.patch_w};
            for (int y = 0; y < grid.patch_h; ++y)
                for (int x = 0; x < grid.patch_w; ++x)
                    info.foreground_pixels += mask.at(info.window.top + y, info.window.left + x) != 0;
            info.foreground_proportion =
                static_cast<double>(info.foreground_pixels) / static_cast<double>(info.window.area());
            info.density_class = classify_density(info.foreground_proportion);
            grid.entries.push_back(info);
        }
    }
    return grid;
}

/// Non-owning window into a Raster.
template <typename T>
class RasterView {
public:
    RasterView(const Raster<T>& source, PixelWindow window) : source_(&source), window_(window) {}

    int rows() const noexcept { return window_.height; }
    int cols() const noexcept { return window_.width; }
    int channels() const noexcept { return source_->channels(); }
    const PixelWindow& window() const noexcept { return window_; }

    const T& at(int y, int x, int c = 0) const noexcept {
        return source_->at(window_.top + y, window_.left + x, c);
    }

    Raster<T> to_raster() const {
        Raster<T> out(rows(), cols(), channels());
        for (int y = 0; y < rows(); ++y)
            for (int x = 0; x < cols(); ++x)
                for (int c = 0; c < channels(); ++c) out.at(y, x, c) = at(y, x, c);
        return out;
    }

private:
    const Raster<T>* source_;
    PixelWindow window_;
};

template <typename T>
RasterView<T> patch_view(const Raster<T>& array, const PixelWindow& window) {
    if (window.top < 0 || window.left < 0 || window.height < 0 || window.width < 0 ||
        window.top + window.height > array.rows() || window.left + window.width > array.cols()) {
        std::ostringstream msg;
        msg << "patch window (" << window.top << ", " << window.left << ", " << window.height << ", "
            << window.width << ") out of bounds for " << array.rows() << "x" << array.cols() << " array";
        throw std::out_of_range(msg.str());
    }
    return RasterView<T>(array, window);
}

template <typename T>
RasterView<T> patch_view(const Raster<T>& array, const PatchInfo& info) {
    return patch_view(array, info.window);
}

/// Writes `patch` into `target` at `window`.
template <typename T>
void paste(Raster<T>& target, const Raster<T>& patch, const PixelWindow& window) {
    for (int y = 0; y < window.height; ++y)
        for (int x = 0; x < window.width; ++x)
            for (int c = 0; c < target.channels(); ++c)
                target.at(window.top + y, window.left + x, c) = patch.at(y, x, c);
}

/// Debug dump: one line per patch.
inline void write_patch_csv(std::ostream& out, const PatchGrid& grid) {
    out << "row,col,proportion,class\n";
    for (const auto& p : grid.entries)
        out << p.row << ',' << p.col << ',' << p.foreground_proportion << ',' << to_string(p.density_class)
            << '\n';
}

}  // namespace patchcon

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace patchcon {

/// Dense row-major H x W x C array. Channels are interleaved per pixel.
template <typename T>
class Raster {
public:
    using value_type = T;

    Raster() = default;
    Raster(int rows, int cols, int channels = 1, T fill = T{})
        : rows_(rows), cols_(cols), channels_(channels) {
        if (rows < 0 || cols < 0 || channels < 1) {
            std::ostringstream msg;
            msg << "invalid raster shape " << rows << "x" << cols << "x" << channels;
            throw std::invalid_argument(msg.str());
        }
        data_.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
    }

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
    const T& at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

    bool contains(int y, int x) const noexcept { return y >= 0 && y < rows_ && x >= 0 && x < cols_; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    bool same_shape(const Raster& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_ && channels_ == other.channels_;
    }
    template <typename U>
    bool same_extent(const Raster<U>& other) const noexcept {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * cols_ + x) * channels_ + c;
    }

    int rows_ = 0;
    int cols_ = 0;
    int channels_ = 1;
    std::vector<T> data_;
};

/// Binary mask, values in {0, 1}.
using Mask = Raster<std::uint8_t>;
/// RGB image, values in [0, 1].
using Image = Raster<float>;

inline bool is_binary(const Mask& m) {
    for (auto v : m.data())
        if (v > 1) return false;
    return true;
}

inline std::size_t count_foreground(const Mask& m) {
    std::size_t n = 0;
    for (auto v : m.data()) n += v != 0;
    return n;
}

inline Mask complement(const Mask& m) {
    Mask out(m.rows(), m.cols());
    auto src = m.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 0 : 1;
    return out;
}

/// a AND NOT b
inline Mask subtract(const Mask& a, const Mask& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mask subtract: shape mismatch");
    Mask out(a.rows(), a.cols());
    auto pa = a.data();
    auto pb = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < pa.size(); ++i) dst[i] = (pa[i] && !pb[i]) ? 1 : 0;
    return out;
}

/// True when every foreground pixel of `inner` is foreground in `outer`.
inline bool is_subset(const Mask& inner, const Mask& outer) {
    if (!inner.same_shape(outer)) throw std::invalid_argument("mask subset: shape mismatch");
    auto a = inner.data();
    auto b = outer.data();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i]) return false;
    return true;
}

inline bool is_disjoint(const Mask& a, const Mask& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mask disjoint: shape mismatch");
    auto pa = a.data();
    auto pb = b.data();
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i] && pb[i]) return false;
    return true;
}

}  // namespace patchcon

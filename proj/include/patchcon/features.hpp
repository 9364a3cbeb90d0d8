#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "patchcon/patching.hpp"
#include "patchcon/raster.hpp"

namespace patchcon {

enum class FeatureTag : std::int64_t { sparse = 0, dense = 1, edge = 2, background = 3 };

inline const char* to_string(FeatureTag t) {
    switch (t) {
        case FeatureTag::sparse: return "sparse";
        case FeatureTag::dense: return "dense";
        case FeatureTag::edge: return "edge";
        case FeatureTag::background: return "background";
    }
    return "?";
}

inline FeatureTag density_tag(DensityClass c) {
    return c == DensityClass::dense ? FeatureTag::dense : FeatureTag::sparse;
}

/// Where a pooled vector came from: sample id plus patch index, or a negative region code for
/// contour features.
struct SourceId {
    static constexpr int kEdgeRegion = -1;
    static constexpr int kBackgroundRegion = -2;

    std::string sample;
    int region = 0;

    friend bool operator==(const SourceId&, const SourceId&) = default;
    friend auto operator<=>(const SourceId&, const SourceId&) = default;
};

struct PooledFeature {
    torch::Tensor vector;  // [C], unit L2 norm
    FeatureTag tag = FeatureTag::sparse;
    SourceId source;
};

inline torch::Tensor to_tensor(const Mask& m) {
    auto t = torch::empty({m.rows(), m.cols()}, torch::kFloat32);
    auto acc = t.accessor<float, 2>();
    for (int y = 0; y < m.rows(); ++y)
        for (int x = 0; x < m.cols(); ++x) acc[y][x] = m.at(y, x);
    return t;
}

/// [3, H, W] tensor from an HWC image.
inline torch::Tensor to_tensor(const Image& img) {
    auto hwc = torch::from_blob(const_cast<float*>(img.data().data()), {img.rows(), img.cols(), img.channels()},
                                torch::kFloat32);
    return hwc.permute({2, 0, 1}).contiguous();
}

inline void check_pool_shapes(const torch::Tensor& activations, const torch::Tensor& region_mask) {
    if (activations.dim() != 3 || region_mask.dim() != 2 || activations.size(1) != region_mask.size(0) ||
        activations.size(2) != region_mask.size(1)) {
        std::ostringstream msg;
        msg << "masked pooling: activations " << activations.sizes() << " do not match mask "
            << region_mask.sizes();
        throw std::invalid_argument(msg.str());
    }
}

/// Mask-weighted mean of the per-pixel feature columns, before normalization. nullopt when the
/// region is empty.
inline std::optional<torch::Tensor> masked_mean(const torch::Tensor& activations, const torch::Tensor& region_mask) {
    check_pool_shapes(activations, region_mask);
    const auto mask = region_mask.to(activations.scalar_type());
    const double mass = mask.sum().item<double>();
    if (mass == 0.0) return std::nullopt;
    return (activations * mask.unsqueeze(0)).sum({1, 2}) / mass;
}

// Pooled means shorter than this have no usable direction (e.g. every channel dead after ReLU).
inline constexpr double kMinPooledNorm = 1e-12;

/// Masked average pooling followed by L2 normalization. nullopt for an empty region or a zero mean.
inline std::optional<torch::Tensor> masked_average_pool(const torch::Tensor& activations,
                                                        const torch::Tensor& region_mask) {
    auto mean = masked_mean(activations, region_mask);
    if (!mean || mean->detach().norm().item<double>() <= kMinPooledNorm) return std::nullopt;
    return torch::nn::functional::normalize(*mean, torch::nn::functional::NormalizeFuncOptions().dim(0));
}

inline std::optional<torch::Tensor> masked_average_pool(const torch::Tensor& activations, const Mask& region_mask) {
    return masked_average_pool(activations, to_tensor(region_mask).to(activations.scalar_type()));
}

struct PatchFeatures {
    torch::Tensor vectors;           // [K, C], normalized
    std::vector<int> patch_indices;  // row-major index into the grid, one per row of vectors
};

/// Pools `activations` [C, H, W] against `mask` inside every grid patch at once. Patches with no
/// foreground, or whose pooled mean is zero, are skipped.
inline PatchFeatures pool_patches(const torch::Tensor& activations, const torch::Tensor& mask, const PatchGrid& grid) {
    check_pool_shapes(activations, mask);
    if (grid.source_rows() != mask.size(0) || grid.source_cols() != mask.size(1))
        throw std::invalid_argument("pool_patches: grid does not match mask dimensions");
    const int64_t C = activations.size(0);
    const int n = grid.n;
    const auto m = mask.to(activations.scalar_type());
    auto sums = (activations * m.unsqueeze(0)).view({C, n, grid.patch_h, n, grid.patch_w}).sum({2, 4}).view({C, n * n});

    const auto sum_norms = sums.detach().norm(2, 0).to(torch::kFloat64).contiguous();
    const double* norms = sum_norms.data_ptr<double>();

    PatchFeatures out;
    std::vector<int64_t> idx;
    std::vector<double> mass;
    for (std::size_t p = 0; p < grid.entries.size(); ++p) {
        const auto fg = grid.entries[p].foreground_pixels;
        if (fg == 0 || norms[p] / static_cast<double>(fg) <= kMinPooledNorm) continue;
        idx.push_back(static_cast<int64_t>(p));
        mass.push_back(static_cast<double>(grid.entries[p].foreground_pixels));
        out.patch_indices.push_back(static_cast<int>(p));
    }
    if (idx.empty()) {
        out.vectors = torch::empty({0, C}, activations.options());
        return out;
    }
    auto index = torch::tensor(idx, torch::kInt64);
    auto denom = torch::tensor(mass, torch::kFloat64).to(activations.scalar_type()).unsqueeze(1);
    auto means = sums.index_select(1, index).t() / denom;
    out.vectors = torch::nn::functional::normalize(means, torch::nn::functional::NormalizeFuncOptions().dim(1));
    return out;
}

inline void check_unit_norm(const torch::Tensor& rows, double tolerance, const char* what) {
    if (rows.numel() == 0) return;
    auto norms = rows.detach().reshape({-1, rows.size(-1)}).to(torch::kFloat64).norm(2, 1);
    const double worst = (norms - 1.0).abs().max().item<double>();
    if (!(worst <= tolerance)) {
        std::ostringstream msg;
        msg << what << ": feature vectors must be L2-normalized (max |norm - 1| = " << worst << ")";
        throw std::invalid_argument(msg.str());
    }
}

/// Bounded FIFO store of detached, normalized feature vectors.
class MemoryBank {
public:
    static constexpr double kNormTolerance = 1e-4;

    explicit MemoryBank(std::size_t capacity = 1024) : capacity_(capacity) {}

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::deque<PooledFeature>& entries() const noexcept { return entries_; }

    void push(const std::vector<PooledFeature>& features) {
        for (const auto& f : features) check_unit_norm(f.vector.unsqueeze(0), kNormTolerance, "memory bank push");
        for (const auto& f : features) {
            entries_.push_back({f.vector.detach().clone(), f.tag, f.source});
            if (entries_.size() > capacity_) entries_.pop_front();
        }
    }

    /// Uniform sample without replacement among entries satisfying `predicate`; all matches
    /// when there are at most `max_count`. Returned in bank order.
    std::vector<PooledFeature> sample(const std::function<bool(const PooledFeature&)>& predicate,
                                      std::size_t max_count, std::uint64_t seed) const {
        std::vector<std::size_t> matches;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (predicate(entries_[i])) matches.push_back(i);
        std::vector<std::size_t> chosen;
        std::mt19937_64 rng(seed);
        std::sample(matches.begin(), matches.end(), std::back_inserter(chosen), max_count, rng);
        std::vector<PooledFeature> out;
        out.reserve(chosen.size());
        for (auto i : chosen) out.push_back(entries_[i]);
        return out;
    }

    void clear() { entries_.clear(); }

private:
    std::size_t capacity_;
    std::deque<PooledFeature> entries_;
};

inline std::function<bool(const PooledFeature&)> has_tag(FeatureTag tag) {
    return [tag](const PooledFeature& f) { return f.tag == tag; };
}

}  // namespace patchcon

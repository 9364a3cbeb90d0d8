// Brute-force reference implementations used only by tests. Each is written directly from the
// defining formula, without sharing code paths with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "patchcon/raster.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline patchcon::Mask random_mask(std::mt19937_64& rng, int rows, int cols, double p) {
    std::bernoulli_distribution coin(p);
    patchcon::Mask m(rows, cols);
    for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) m.at(y, x) = coin(rng) ? 1 : 0;
    return m;
}

/// Random mask made of filled rectangles, closer to lesion shapes than salt-and-pepper noise.
inline patchcon::Mask random_blob_mask(std::mt19937_64& rng, int rows, int cols, int blobs, int max_side) {
    patchcon::Mask m(rows, cols);
    std::uniform_int_distribution<int> ry(0, rows - 1), rx(0, cols - 1), side(1, max_side);
    for (int b = 0; b < blobs; ++b) {
        const int y0 = ry(rng), x0 = rx(rng), h = side(rng), w = side(rng);
        for (int y = y0; y < std::min(rows, y0 + h); ++y)
            for (int x = x0; x < std::min(cols, x0 + w); ++x) m.at(y, x) = 1;
    }
    return m;
}

/// One pass of 3x3 erosion (all_of) or dilation (any_of) by scanning each pixel's neighborhood.
inline patchcon::Mask morph_scan_once(const patchcon::Mask& in, bool erode) {
    patchcon::Mask out(in.rows(), in.cols());
    for (int y = 0; y < in.rows(); ++y)
        for (int x = 0; x < in.cols(); ++x) {
            bool all = true, any = false;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    const bool v = yy >= 0 && yy < in.rows() && xx >= 0 && xx < in.cols() && in.at(yy, xx);
                    all = all && v;
                    any = any || v;
                }
            out.at(y, x) = (erode ? all : any) ? 1 : 0;
        }
    return out;
}

inline patchcon::Mask morph_scan(patchcon::Mask m, bool erode, int iterations) {
    for (int i = 0; i < iterations; ++i) m = morph_scan_once(m, erode);
    return m;
}

/// Pre-normalization masked mean; activations indexed [c][y][x]. Empty result for zero mass.
inline Vec masked_mean(const std::vector<std::vector<Vec>>& act, const patchcon::Mask& mask) {
    const std::size_t C = act.size();
    Vec sum(C, 0.0);
    double mass = 0.0;
    for (int y = 0; y < mask.rows(); ++y)
        for (int x = 0; x < mask.cols(); ++x) {
            if (!mask.at(y, x)) continue;
            mass += 1.0;
            for (std::size_t c = 0; c < C; ++c) sum[c] += act[c][y][x];
        }
    if (mass == 0.0) return {};
    for (auto& v : sum) v /= mass;
    return sum;
}

inline Vec normalized(Vec v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    return v;
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double cosine(const Vec& a, const Vec& b) {
    return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

/// Direct evaluation of the supervised contrastive term. Requires |P| >= 1.
inline double supcon(const Vec& anchor, const std::vector<Vec>& pos, const std::vector<Vec>& neg, double tau) {
    double denom = 0.0;
    for (const auto& k : pos) denom += std::exp(cosine(k, anchor) / tau);
    for (const auto& k : neg) denom += std::exp(cosine(k, anchor) / tau);
    double acc = 0.0;
    for (const auto& q : pos) acc += std::log(std::exp(cosine(q, anchor) / tau) / denom);
    return -acc / static_cast<double>(pos.size());
}

struct Labeled {
    Vec v;
    int label;
};

/// Anchors are `batch`; candidates are all of `batch` (minus the anchor) plus `extra`.
/// Anchors need a positive, and a negative when `require_negative`. Mean over qualifying anchors.
inline double contrastive_reference(const std::vector<Labeled>& batch, const std::vector<Labeled>& extra, double tau,
                                    bool require_negative) {
    double total = 0.0;
    int count = 0;
    for (std::size_t a = 0; a < batch.size(); ++a) {
        std::vector<Vec> pos, neg;
        auto consider = [&](const Labeled& c) { (c.label == batch[a].label ? pos : neg).push_back(c.v); };
        for (std::size_t k = 0; k < batch.size(); ++k)
            if (k != a) consider(batch[k]);
        for (const auto& c : extra) consider(c);
        if (pos.empty() || (require_negative && neg.empty())) continue;
        total += supcon(batch[a].v, pos, neg, tau);
        ++count;
    }
    return count ? total / count : 0.0;
}

inline double bce(const std::vector<double>& p, const std::vector<double>& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::min(std::max(p[i], 1e-7), 1.0 - 1e-7);
        s += -(t[i] * std::log(q) + (1 - t[i]) * std::log(1 - q));
    }
    return s / static_cast<double>(p.size());
}

struct SetMetrics {
    double precision, recall, f1, iou;
};

/// Metrics from explicit pixel sets.
inline SetMetrics set_metrics(const patchcon::Mask& pred, const patchcon::Mask& gt) {
    std::set<int> P, G, I, U;
    for (int y = 0; y < pred.rows(); ++y)
        for (int x = 0; x < pred.cols(); ++x) {
            const int id = y * pred.cols() + x;
            if (pred.at(y, x)) P.insert(id);
            if (gt.at(y, x)) G.insert(id);
        }
    for (int id : P) {
        U.insert(id);
        if (G.count(id)) I.insert(id);
    }
    for (int id : G) U.insert(id);
    SetMetrics m{};
    if (P.empty() && G.empty()) return {1, 1, 1, 1};
    m.precision = P.empty() ? 0.0 : double(I.size()) / P.size();
    m.recall = G.empty() ? 0.0 : double(I.size()) / G.size();
    if (P.empty() || G.empty()) return {m.precision, m.recall, 0.0, 0.0};
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.iou = double(I.size()) / U.size();
    return m;
}

/// Quarter-turn rotation by index permutation (k counter-clockwise quarter turns) of a square mask.
inline patchcon::Mask rot90(const patchcon::Mask& m, int k) {
    patchcon::Mask cur = m;
    const int n = m.rows();
    for (int t = 0; t < ((k % 4) + 4) % 4; ++t) {
        patchcon::Mask next(n, n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) next.at(n - 1 - x, y) = cur.at(y, x);
        cur = next;
    }
    return cur;
}

}  // namespace oracle

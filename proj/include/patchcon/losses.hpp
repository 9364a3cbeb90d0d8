#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "patchcon/features.hpp"

namespace patchcon {

struct ContrastiveConfig {
    double temperature = 0.05;
    double alpha = 0.02;  // density weight
    double beta = 0.1;    // edge weight

    void validate() const {
        if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
        if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
        if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    }
};

struct LossBreakdown {
    double l_sup = 0.0;
    double l_pd = 0.0;
    double l_pe = 0.0;
    double total = 0.0;
};

inline constexpr double kBceEpsilon = 1e-7;
inline constexpr double kNormTolerance = 1e-4;

/// Mean binary cross-entropy over all pixels, probabilities clamped to [eps, 1 - eps].
inline torch::Tensor bce_loss(const torch::Tensor& probabilities, const torch::Tensor& targets) {
    if (probabilities.sizes() != targets.sizes()) {
        std::ostringstream msg;
        msg << "bce: predictions " << probabilities.sizes() << " vs targets " << targets.sizes();
        throw std::invalid_argument(msg.str());
    }
    auto p = probabilities.clamp(kBceEpsilon, 1.0 - kBceEpsilon);
    auto t = targets.to(p.scalar_type());
    return -(t * torch::log(p) + (1.0 - t) * torch::log(1.0 - p)).mean();
}

/// Supervised contrastive term for one anchor:
///   -1/|P| * sum_{q in P} log( exp(sim(q,a)/tau) / sum_{k in P u N} exp(sim(k,a)/tau) ).
/// All vectors must be unit length; similarities are dot products clamped to [-1, 1].
/// Returns nullopt when P is empty.
inline std::optional<torch::Tensor> supcon_term(const torch::Tensor& anchor, const torch::Tensor& positives,
                                                const torch::Tensor& negatives, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("supcon: temperature must be > 0");
    if (positives.size(0) == 0) return std::nullopt;
    check_unit_norm(anchor.unsqueeze(0), kNormTolerance, "supcon anchor");
    check_unit_norm(positives, kNormTolerance, "supcon positives");
    check_unit_norm(negatives, kNormTolerance, "supcon negatives");
    auto candidates = negatives.size(0) ? torch::cat({positives, negatives}, 0) : positives;
    auto logits = candidates.matmul(anchor).clamp(-1.0, 1.0) / temperature;
    auto log_denominator = torch::logsumexp(logits, 0);
    auto pos_logits = logits.slice(0, 0, positives.size(0));
    return -(pos_logits - log_denominator).mean();
}

struct ContrastiveResult {
    torch::Tensor loss;  // scalar; 0 when no anchor qualifies
    int64_t valid_anchors = 0;
};

/// Vectorized supervised contrastive loss over binary labels.
///
/// Each anchor row contrasts against every candidate row except itself (`anchor_self[a]` is the
/// anchor's row in `candidates`, or -1 when absent). Positives share the anchor's label. Anchors
/// without a positive, or without a negative when `require_negative`, are skipped; the result is
/// the mean over the remaining anchors.
inline ContrastiveResult contrastive_loss(const torch::Tensor& anchors, const std::vector<int64_t>& anchor_labels,
                                          const std::vector<int64_t>& anchor_self, const torch::Tensor& candidates,
                                          const std::vector<int64_t>& candidate_labels, double temperature,
                                          bool require_negative) {
    if (!(temperature > 0.0)) throw std::invalid_argument("contrastive loss: temperature must be > 0");
    const auto A = anchors.size(0);
    const auto K = candidates.size(0);
    if (static_cast<int64_t>(anchor_labels.size()) != A || static_cast<int64_t>(anchor_self.size()) != A ||
        static_cast<int64_t>(candidate_labels.size()) != K)
        throw std::invalid_argument("contrastive loss: label/index count mismatch");
    check_unit_norm(anchors, kNormTolerance, "contrastive anchors");
    check_unit_norm(candidates, kNormTolerance, "contrastive candidates");

    std::vector<int64_t> keep;
    std::vector<uint8_t> pos_flags, self_flags;
    for (int64_t a = 0; a < A; ++a) {
        int64_t n_pos = 0, n_neg = 0;
        for (int64_t k = 0; k < K; ++k) {
            if (k == anchor_self[a]) continue;
            (candidate_labels[k] == anchor_labels[a] ? n_pos : n_neg)++;
        }
        if (n_pos == 0 || (require_negative && n_neg == 0)) continue;
        keep.push_back(a);
        for (int64_t k = 0; k < K; ++k) {
            const bool self = k == anchor_self[a];
            self_flags.push_back(self);
            pos_flags.push_back(!self && candidate_labels[k] == anchor_labels[a]);
        }
    }
    auto opts = anchors.options();
    if (keep.empty()) return {torch::zeros({}, opts), 0};

    const auto V = static_cast<int64_t>(keep.size());
    auto bool_opts = torch::TensorOptions().dtype(torch::kUInt8);
    auto self_mask = torch::from_blob(self_flags.data(), {V, K}, bool_opts).to(torch::kBool).clone();
    auto pos_mask = torch::from_blob(pos_flags.data(), {V, K}, bool_opts).to(torch::kBool).clone();

    auto chosen = anchors.index_select(0, torch::tensor(keep, torch::kInt64));
    auto logits = chosen.matmul(candidates.t()).clamp(-1.0, 1.0) / temperature;  // [V, K]
    auto log_denominator =
        torch::logsumexp(logits.masked_fill(self_mask, -std::numeric_limits<double>::infinity()), 1, true);
    auto log_prob = logits - log_denominator;
    auto pos_f = pos_mask.to(logits.scalar_type());
    auto per_anchor = -(log_prob * pos_f).sum(1) / pos_f.sum(1);
    return {per_anchor.mean(), V};
}

/// Tagged features pooled from the current batch.
struct FeatureBatch {
    torch::Tensor vectors;  // [K, C]
    std::vector<FeatureTag> tags;
    std::vector<SourceId> sources;

    int64_t size() const { return static_cast<int64_t>(tags.size()); }
};

/// Patch-wise density loss. Anchors are the current batch's dense/sparse features; candidates
/// are the batch plus memory-bank features (bank entries sharing a source with a batch feature
/// are dropped). Anchors need at least one positive and one negative.
inline torch::Tensor density_loss(const FeatureBatch& batch, const std::vector<PooledFeature>& bank_features,
                                  const ContrastiveConfig& config) {
    config.validate();
    if (batch.size() == 0) return torch::zeros({});
    std::vector<torch::Tensor> rows{batch.vectors};
    std::vector<int64_t> labels, anchor_labels, anchor_self;
    for (int64_t i = 0; i < batch.size(); ++i) {
        labels.push_back(static_cast<int64_t>(batch.tags[i]));
        anchor_labels.push_back(labels.back());
        anchor_self.push_back(i);
    }
    std::vector<SourceId> batch_sources = batch.sources;
    std::sort(batch_sources.begin(), batch_sources.end());
    for (const auto& f : bank_features) {
        if (std::binary_search(batch_sources.begin(), batch_sources.end(), f.source)) continue;
        rows.push_back(f.vector.detach().to(batch.vectors.scalar_type()).unsqueeze(0));
        labels.push_back(static_cast<int64_t>(f.tag));
    }
    auto candidates = torch::cat(rows, 0);
    return contrastive_loss(batch.vectors, anchor_labels, anchor_self, candidates, labels, config.temperature, true)
        .loss;
}

/// Patch-wise edge-aware loss over the batch's edge (inner contour) and background (outer
/// contour) features. Every feature is an anchor; anchors without a positive are skipped.
inline torch::Tensor edge_loss(const torch::Tensor& edge_features, const torch::Tensor& background_features,
                               const ContrastiveConfig& config) {
    config.validate();
    const auto E = edge_features.size(0);
    const auto B = background_features.size(0);
    if (E + B == 0) return torch::zeros({});
    auto all = torch::cat({edge_features, background_features}, 0);
    std::vector<int64_t> labels(E + B), self(E + B);
    for (int64_t i = 0; i < E + B; ++i) {
        labels[i] = i < E ? 0 : 1;
        self[i] = i;
    }
    return contrastive_loss(all, labels, self, all, labels, config.temperature, false).loss;
}

/// Weighted total l_sup + alpha * l_pd + beta * l_pe.
inline LossBreakdown total_loss(double l_sup, double l_pd, double l_pe, const ContrastiveConfig& config) {
    const std::pair<const char*, double> parts[] = {{"l_sup", l_sup}, {"l_pd", l_pd}, {"l_pe", l_pe}};
    for (const auto& [name, v] : parts)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string("non-finite loss component ") + name);
    return {l_sup, l_pd, l_pe, l_sup + config.alpha * l_pd + config.beta * l_pe};
}

}  // namespace patchcon

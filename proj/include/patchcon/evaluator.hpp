#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchcon/raster.hpp"

namespace patchcon {

enum class Aggregation { per_image_mean, dataset_micro };

inline const char* to_string(Aggregation a) {
    return a == Aggregation::per_image_mean ? "per-image-mean" : "dataset-micro";
}

inline Aggregation parse_aggregation(const std::string& s) {
    if (s == "per-image-mean" || s == "mean") return Aggregation::per_image_mean;
    if (s == "dataset-micro" || s == "micro") return Aggregation::dataset_micro;
    throw std::invalid_argument("unknown aggregation '" + s + "'");
}

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou = 0.0;
};

/// Pixel-wise metrics from counts.
///
/// Empty denominators: precision is 1 when nothing is predicted and the ground truth is
/// empty, otherwise 0; recall likewise with the roles swapped. F1 and IoU are 1 when both
/// masks are empty and 0 when exactly one is.
inline Metrics metrics_from_counts(const ConfusionCounts& c) {
    const bool pred_empty = c.tp + c.fp == 0;
    const bool gt_empty = c.tp + c.fn == 0;
    Metrics m;
    m.precision = pred_empty ? (gt_empty ? 1.0 : 0.0) : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    m.recall = gt_empty ? (pred_empty ? 1.0 : 0.0) : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (pred_empty && gt_empty) {
        m.f1 = 1.0;
        m.iou = 1.0;
    } else if (pred_empty || gt_empty) {
        m.f1 = 0.0;
        m.iou = 0.0;
    } else {
        const double denom = m.precision + m.recall;
        m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
        m.iou = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp + c.fn);
    }
    return m;
}

inline Mask binarize(const Raster<float>& probabilities, double threshold) {
    Mask out(probabilities.rows(), probabilities.cols());
    auto src = probabilities.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] > threshold ? 1 : 0;
    return out;
}

inline ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
    if (!pred.same_shape(gt)) {
        std::ostringstream msg;
        msg << "metrics: prediction is " << pred.rows() << "x" << pred.cols() << " but ground truth is "
            << gt.rows() << "x" << gt.cols();
        throw std::invalid_argument(msg.str());
    }
    ConfusionCounts c;
    auto p = pred.data();
    auto g = gt.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pi = p[i] != 0;
        const bool gi = g[i] != 0;
        c.tp += pi && gi;
        c.fp += pi && !gi;
        c.fn += !pi && gi;
    }
    return c;
}

struct ImageMetrics {
    std::string id;
    ConfusionCounts counts;
    Metrics metrics;
};

inline ImageMetrics compute_metrics(const Mask& pred, const Mask& gt, std::string id = {}) {
    ImageMetrics r;
    r.id = std::move(id);
    r.counts = confusion(pred, gt);
    r.metrics = metrics_from_counts(r.counts);
    return r;
}

struct MetricsReport {
    Metrics summary;
    Metrics per_image_mean;
    Metrics dataset_micro;
    std::vector<ImageMetrics> per_image;
    double threshold = 0.5;
    Aggregation aggregation = Aggregation::per_image_mean;
};

inline MetricsReport aggregate(std::vector<ImageMetrics> per_image, double threshold, Aggregation aggregation) {
    MetricsReport report;
    report.threshold = threshold;
    report.aggregation = aggregation;
    ConfusionCounts total;
    for (const auto& im : per_image) {
        total += im.counts;
        report.per_image_mean.precision += im.metrics.precision;
        report.per_image_mean.recall += im.metrics.recall;
        report.per_image_mean.f1 += im.metrics.f1;
        report.per_image_mean.iou += im.metrics.iou;
    }
    if (!per_image.empty()) {
        const double n = static_cast<double>(per_image.size());
        report.per_image_mean.precision /= n;
        report.per_image_mean.recall /= n;
        report.per_image_mean.f1 /= n;
        report.per_image_mean.iou /= n;
    }
    report.dataset_micro = metrics_from_counts(total);
    report.summary = aggregation == Aggregation::per_image_mean ? report.per_image_mean : report.dataset_micro;
    report.per_image = std::move(per_image);
    return report;
}

inline nlohmann::ordered_json to_json(const Metrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"iou", m.iou}};
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["threshold"] = r.threshold;
    j["aggregation"] = to_string(r.aggregation);
    j["summary"] = to_json(r.summary);
    j["per_image_mean"] = to_json(r.per_image_mean);
    j["dataset_micro"] = to_json(r.dataset_micro);
    auto& arr = j["per_image"] = nlohmann::ordered_json::array();
    for (const auto& im : r.per_image) {
        auto e = to_json(im.metrics);
        e["id"] = im.id;
        e["tp"] = im.counts.tp;
        e["fp"] = im.counts.fp;
        e["fn"] = im.counts.fn;
        arr.push_back(std::move(e));
    }
    return j;
}

inline std::string format_table(const MetricsReport& r) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    auto row = [&](const char* name, const Metrics& m) {
        out << std::left << std::setw(16) << name << std::right << std::setw(10) << m.precision * 100 << '%'
            << std::setw(10) << m.recall * 100 << '%' << std::setw(10) << m.f1 * 100 << '%' << std::setw(10)
            << m.iou * 100 << "%\n";
    };
    out << "threshold " << r.threshold << ", " << r.per_image.size() << " images\n";
    out << std::left << std::setw(16) << "aggregation" << std::right << std::setw(11) << "Precision"
        << std::setw(11) << "Recall" << std::setw(11) << "F1" << std::setw(11) << "IoU" << '\n';
    row("per-image-mean", r.per_image_mean);
    row("dataset-micro", r.dataset_micro);
    return out.str();
}

/// RGB overlay: ground truth in red, prediction in green (overlap renders yellow).
inline Raster<std::uint8_t> make_overlay(const Mask& gt, const Mask& pred) {
    if (!gt.same_shape(pred)) throw std::invalid_argument("overlay: shape mismatch");
    Raster<std::uint8_t> out(gt.rows(), gt.cols(), 3);
    for (int y = 0; y < gt.rows(); ++y)
        for (int x = 0; x < gt.cols(); ++x) {
            out.at(y, x, 0) = gt.at(y, x) ? 255 : 0;
            out.at(y, x, 1) = pred.at(y, x) ? 255 : 0;
        }
    return out;
}

}  // namespace patchcon

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <ATen/CPUGeneratorImpl.h>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "patchcon/config.hpp"
#include "patchcon/dataset.hpp"
#include "patchcon/evaluator.hpp"
#include "patchcon/features.hpp"
#include "patchcon/image_io.hpp"
#include "patchcon/losses.hpp"
#include "patchcon/morphology.hpp"
#include "patchcon/patching.hpp"
#include "patchcon/unet.hpp"

namespace patchcon {

inline constexpr std::int64_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepRecord {
    std::int64_t step = 0;
    int epoch = 0;
    double lr = 0.0;
    LossBreakdown losses;
};

inline nlohmann::ordered_json to_json(const StepRecord& r) {
    return {{"step", r.step},           {"epoch", r.epoch},          {"lr", r.lr},
            {"l_sup", r.losses.l_sup}, {"l_pd", r.losses.l_pd},     {"l_pe", r.losses.l_pe},
            {"total", r.losses.total}};
}

/// Differentiable loss terms of one forward pass, plus the density features to bank afterwards.
struct StepLosses {
    torch::Tensor l_sup;
    torch::Tensor l_pd;
    torch::Tensor l_pe;
    std::vector<PooledFeature> to_bank;
};

struct FitOptions {
    std::filesystem::path out_dir;  // empty: no files written
    std::function<void(const StepRecord&)> on_step;
};

struct FitResult {
    std::vector<StepRecord> log;
    std::vector<std::filesystem::path> checkpoints;
};

namespace detail {

inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::seed_seq seq(parts.begin(), parts.end());
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline torch::Tensor stack_images(const std::vector<Sample>& batch) {
    std::vector<torch::Tensor> t;
    for (const auto& s : batch) t.push_back(to_tensor(s.image));
    return torch::stack(t);
}

inline torch::Tensor stack_masks(const std::vector<Sample>& batch) {
    std::vector<torch::Tensor> t;
    for (const auto& s : batch) t.push_back(to_tensor(s.mask).unsqueeze(0));
    return torch::stack(t);
}

}  // namespace detail

/// Owns the model, the Adam optimizer and the density memory bank for one training run.
class Trainer {
public:
    explicit Trainer(TrainConfig config)
        : config_(std::move(config)),
          model_(build_backbone(config_.backbone, config_.seed)),
          optimizer_(model_->parameters(), torch::optim::AdamOptions(config_.lr_initial)),
          bank_(config_.bank_capacity) {
        if (auto p = config_.problems(); !p.empty()) throw ConfigError(std::move(p));
    }

    const TrainConfig& config() const noexcept { return config_; }
    UNet& model() noexcept { return model_; }
    const MemoryBank& bank() const noexcept { return bank_; }
    int epoch() const noexcept { return epoch_; }
    std::int64_t step() const noexcept { return step_; }

    double learning_rate() const {
        return static_cast<const torch::optim::AdamOptions&>(optimizer_.param_groups().front().options()).lr();
    }
    void set_learning_rate(double lr) {
        for (auto& g : optimizer_.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
    }

    /// Forward pass and all loss terms for `batch`, in training mode. No parameter update.
    StepLosses forward_losses(const std::vector<Sample>& batch) {
        if (batch.empty()) throw std::invalid_argument("train step: empty batch");
        for (const auto& s : batch) validate(s);
        model_->train();
        auto images = detail::stack_images(batch);
        auto masks = detail::stack_masks(batch);
        auto out = model_->forward(images);

        StepLosses losses;
        losses.l_sup = bce_loss(torch::sigmoid(out.logits), masks);
        losses.l_pd = torch::zeros({});
        losses.l_pe = torch::zeros({});
        if (!config_.contrastive_enabled) return losses;

        std::vector<torch::Tensor> density_rows;
        std::vector<FeatureTag> density_tags;
        std::vector<SourceId> density_sources;
        std::vector<torch::Tensor> edge_rows, background_rows;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Mask& gt = batch[b].mask;
            const auto grid = partition(gt, config_.grid_n);
            const auto features = out.features[static_cast<int64_t>(b)];
            auto pooled = pool_patches(features, masks[static_cast<int64_t>(b)][0], grid);
            for (std::size_t k = 0; k < pooled.patch_indices.size(); ++k) {
                const int p = pooled.patch_indices[k];
                density_rows.push_back(pooled.vectors[static_cast<int64_t>(k)]);
                density_tags.push_back(density_tag(grid.entries[p].density_class));
                density_sources.push_back({batch[b].id, p});
            }
            const auto contours = compose_contours(grid, gt);
            if (auto e = masked_average_pool(features, contours.inner)) edge_rows.push_back(*e);
            if (auto g = masked_average_pool(features, contours.outer)) background_rows.push_back(*g);
        }

        const auto step_seed = detail::mix_seed({config_.seed, static_cast<std::uint64_t>(step_), 0xd5});
        std::vector<std::size_t> keep;
        for (FeatureTag tag : {FeatureTag::sparse, FeatureTag::dense}) {
            std::vector<std::size_t> of_tag;
            for (std::size_t i = 0; i < density_tags.size(); ++i)
                if (density_tags[i] == tag) of_tag.push_back(i);
            std::mt19937_64 rng(step_seed + static_cast<std::uint64_t>(tag));
            std::sample(of_tag.begin(), of_tag.end(), std::back_inserter(keep), config_.sample_cap, rng);
        }
        std::sort(keep.begin(), keep.end());

        if (!keep.empty()) {
            FeatureBatch fb;
            std::vector<torch::Tensor> rows;
            for (auto i : keep) {
                rows.push_back(density_rows[i]);
                fb.tags.push_back(density_tags[i]);
                fb.sources.push_back(density_sources[i]);
            }
            fb.vectors = torch::stack(rows);
            auto bank_features = bank_.sample(has_tag(FeatureTag::sparse), config_.sample_cap, step_seed + 11);
            auto dense_bank = bank_.sample(has_tag(FeatureTag::dense), config_.sample_cap, step_seed + 13);
            bank_features.insert(bank_features.end(), dense_bank.begin(), dense_bank.end());
            losses.l_pd = density_loss(fb, bank_features, config_.contrastive);
            for (std::size_t j = 0; j < keep.size(); ++j)
                losses.to_bank.push_back({rows[j].detach().clone(), fb.tags[j], fb.sources[j]});
        }

        const auto C = out.features.size(1);
        auto stack_or_empty = [&](const std::vector<torch::Tensor>& v) {
            return v.empty() ? torch::empty({0, C}, out.features.options()) : torch::stack(v);
        };
        if (!edge_rows.empty() || !background_rows.empty())
            losses.l_pe = edge_loss(stack_or_empty(edge_rows), stack_or_empty(background_rows), config_.contrastive);
        return losses;
    }

    /// One optimizer step on l_sup + alpha * l_pd + beta * l_pe; banks this step's density
    /// features afterwards.
    LossBreakdown train_step(const std::vector<Sample>& batch) {
        StepLosses losses;
        LossBreakdown breakdown;
        try {
            losses = forward_losses(batch);
            breakdown = total_loss(losses.l_sup.item<double>(), losses.l_pd.item<double>(),
                                   losses.l_pe.item<double>(), config_.contrastive);
        } catch (const std::exception& e) {
            throw std::runtime_error("train step " + std::to_string(step_) + ": " + e.what());
        }
        auto total = losses.l_sup + config_.contrastive.alpha * losses.l_pd + config_.contrastive.beta * losses.l_pe;
        optimizer_.zero_grad();
        total.backward();
        optimizer_.step();
        bank_.push(losses.to_bank);
        ++step_;
        return breakdown;
    }

    /// Trains from the current epoch up to config.epochs. Checkpoints after every decay boundary
    /// and after the final epoch when `options.out_dir` is set.
    FitResult fit(const std::vector<Sample>& dataset, const FitOptions& options = {}) {
        if (dataset.empty()) throw std::invalid_argument("fit: dataset is empty");
        FitResult result;
        std::ofstream log;
        if (!options.out_dir.empty()) {
            std::filesystem::create_directories(options.out_dir);
            const auto log_path = options.out_dir / "train_log.jsonl";
            log.open(log_path, epoch_ == 0 ? std::ios::trunc : std::ios::app);
            if (!log) throw IoError("cannot write training log: " + log_path.string());
        }
        const int size = config_.augmentation.output_size;
        for (; epoch_ < config_.epochs;) {
            const double lr = config_.learning_rate(epoch_);
            set_learning_rate(lr);
            std::vector<std::size_t> order(dataset.size());
            std::iota(order.begin(), order.end(), 0);
            std::mt19937_64 rng(detail::mix_seed({config_.seed, static_cast<std::uint64_t>(epoch_), 0x5f}));
            std::shuffle(order.begin(), order.end(), rng);

            for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
                std::vector<Sample> batch;
                for (std::size_t i = start; i < std::min(order.size(), start + config_.batch_size); ++i) {
                    const Sample& s = dataset[order[i]];
                    if (config_.augment)
                        batch.push_back(augment(s, config_.augmentation,
                                                detail::mix_seed({config_.seed, static_cast<std::uint64_t>(epoch_),
                                                                  static_cast<std::uint64_t>(order[i])})));
                    else
                        batch.push_back(resize_and_crop(s, size));
                }
                StepRecord rec{step_, epoch_, lr, train_step(batch)};
                if (log) log << to_json(rec).dump() << '\n' << std::flush;
                if (options.on_step) options.on_step(rec);
                result.log.push_back(rec);
            }
            ++epoch_;
            if (!options.out_dir.empty() && (epoch_ % config_.lr_decay_every == 0 || epoch_ == config_.epochs)) {
                char name[64];
                std::snprintf(name, sizeof(name), "checkpoint_e%04d.pt", epoch_);
                const auto path = options.out_dir / name;
                save_checkpoint(path);
                result.checkpoints.push_back(path);
            }
        }
        return result;
    }

    void save_checkpoint(const std::filesystem::path& path) const {
        torch::serialize::OutputArchive archive;
        archive.write("format", c10::IValue(std::string("patchcon-checkpoint")));
        archive.write("version", c10::IValue(kCheckpointVersion));
        archive.write("config", c10::IValue(to_text(config_)));
        archive.write("epoch", c10::IValue(static_cast<std::int64_t>(epoch_)));
        archive.write("step", c10::IValue(step_));

        torch::serialize::OutputArchive model_archive;
        model_->save(model_archive);
        archive.write("model", model_archive);
        torch::serialize::OutputArchive optim_archive;
        optimizer_.save(optim_archive);
        archive.write("optimizer", optim_archive);

        const auto& entries = bank_.entries();
        std::vector<torch::Tensor> vecs;
        std::vector<std::int64_t> tags, regions;
        std::string ids;
        for (const auto& e : entries) {
            vecs.push_back(e.vector);
            tags.push_back(static_cast<std::int64_t>(e.tag));
            regions.push_back(e.source.region);
            ids += e.source.sample + '\n';
        }
        archive.write("bank_size", c10::IValue(static_cast<std::int64_t>(entries.size())));
        if (!entries.empty()) {
            archive.write("bank_vectors", torch::stack(vecs));
            archive.write("bank_tags", torch::tensor(tags, torch::kInt64));
            archive.write("bank_regions", torch::tensor(regions, torch::kInt64));
        }
        archive.write("bank_ids", c10::IValue(ids));

        auto gen = at::detail::getDefaultCPUGenerator();
        {
            std::lock_guard<std::mutex> lock(gen.mutex());
            archive.write("rng_state", gen.get_state());
        }
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        try {
            archive.save_to(path.string());
        } catch (const c10::Error& e) {
            throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
        }
    }

    /// Rebuilds a trainer (model, optimizer, bank, counters) from a checkpoint.
    static Trainer from_checkpoint(const std::filesystem::path& path) {
        if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
        torch::serialize::InputArchive archive;
        try {
            archive.load_from(path.string());
        } catch (const c10::Error& e) {
            throw CheckpointError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
        }
        c10::IValue v;
        if (!archive.try_read("format", v) || !v.isString() || v.toStringRef() != "patchcon-checkpoint")
            throw CheckpointError("not a patchcon checkpoint: " + path.string());
        archive.read("version", v);
        if (v.toInt() != kCheckpointVersion)
            throw CheckpointError("checkpoint version " + std::to_string(v.toInt()) + " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
        archive.read("config", v);
        Trainer t(parse_config(v.toStringRef(), false));
        archive.read("epoch", v);
        t.epoch_ = static_cast<int>(v.toInt());
        archive.read("step", v);
        t.step_ = v.toInt();

        torch::serialize::InputArchive model_archive;
        archive.read("model", model_archive);
        t.model_->load(model_archive);
        torch::serialize::InputArchive optim_archive;
        archive.read("optimizer", optim_archive);
        t.optimizer_.load(optim_archive);

        archive.read("bank_size", v);
        const auto bank_size = v.toInt();
        archive.read("bank_ids", v);
        std::istringstream ids(v.toStringRef());
        if (bank_size > 0) {
            torch::Tensor vecs, tags, regions;
            archive.read("bank_vectors", vecs);
            archive.read("bank_tags", tags);
            archive.read("bank_regions", regions);
            std::vector<PooledFeature> entries;
            for (std::int64_t i = 0; i < bank_size; ++i) {
                std::string id;
                std::getline(ids, id);
                entries.push_back({vecs[i].clone(), static_cast<FeatureTag>(tags[i].item<std::int64_t>()),
                                   {id, static_cast<int>(regions[i].item<std::int64_t>())}});
            }
            t.bank_.push(entries);
        }
        torch::Tensor rng_state;
        archive.read("rng_state", rng_state);
        auto gen = at::detail::getDefaultCPUGenerator();
        {
            std::lock_guard<std::mutex> lock(gen.mutex());
            gen.set_state(rng_state);
        }
        return t;
    }

private:
    TrainConfig config_;
    UNet model_;
    torch::optim::Adam optimizer_;
    MemoryBank bank_;
    int epoch_ = 0;
    std::int64_t step_ = 0;
};

/// Sigmoid probability map for one image, shape H x W.
inline Raster<float> predict(UNet& model, const Image& image) {
    torch::NoGradGuard no_grad;
    model->eval();
    auto out = model->forward(to_tensor(image).unsqueeze(0));
    auto prob = torch::sigmoid(out.logits)[0][0].contiguous();
    Raster<float> r(image.rows(), image.cols());
    std::copy_n(prob.data_ptr<float>(), r.size(), r.data().begin());
    return r;
}

/// Resize/crop each sample to `input_size`, predict, threshold and aggregate. Writes one overlay
/// PNG per image into `overlay_dir` when given.
inline MetricsReport evaluate(UNet& model, const std::vector<Sample>& samples, int input_size, double threshold,
                              Aggregation aggregation, const std::filesystem::path& overlay_dir = {}) {
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
    std::vector<ImageMetrics> per_image;
    for (const auto& raw : samples) {
        const Sample s = resize_and_crop(raw, input_size);
        const Mask pred = binarize(predict(model, s.image), threshold);
        per_image.push_back(compute_metrics(pred, s.mask, s.id));
        if (!overlay_dir.empty()) write_rgb8(overlay_dir / (s.id + "_overlay.png"), make_overlay(s.mask, pred));
    }
    return aggregate(std::move(per_image), threshold, aggregation);
}

}  // namespace patchcon

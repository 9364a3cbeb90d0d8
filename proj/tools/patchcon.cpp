// patchcon: synthesize data, train, evaluate and export contour masks.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "patchcon/config.hpp"
#include "patchcon/dataset.hpp"
#include "patchcon/evaluator.hpp"
#include "patchcon/image_io.hpp"
#include "patchcon/manifest.hpp"
#include "patchcon/morphology.hpp"
#include "patchcon/patching.hpp"
#include "patchcon/trainer.hpp"

namespace fs = std::filesystem;
using namespace patchcon;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

struct SynthArgs {
    fs::path out;
    int count = 40;
    int test_count = 10;
    int size = 128;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
    auto train = make_synthetic_dataset(a.count, a.size, a.seed);
    export_samples(a.out / "train", train);
    if (a.test_count > 0) {
        auto test = make_synthetic_dataset(a.test_count, a.size, a.seed + 0x7e57);
        for (auto& s : test) s.id = "test_" + s.id;
        export_samples(a.out / "test", test);
    }
    std::cout << "wrote " << a.count << " train / " << a.test_count << " test samples to " << a.out << "\n";
    return kOk;
}

struct TrainArgs {
    std::optional<fs::path> config;
    fs::path data;
    fs::path out;
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> resume;
    bool bce_only = false;
};

int cmd_train(const TrainArgs& a) {
    if (!fs::exists(a.data)) throw UsageError("data directory does not exist: " + a.data.string());
    if (a.config && !fs::exists(*a.config)) throw UsageError("config file does not exist: " + a.config->string());

    std::optional<Trainer> trainer;
    TrainConfig cfg;
    if (a.resume) {
        trainer.emplace(Trainer::from_checkpoint(*a.resume));
        cfg = trainer->config();
    } else {
        try {
            cfg = a.config ? load_config(*a.config) : parse_config("");
            if (a.seed) cfg.seed = *a.seed;
            if (a.bce_only) cfg.contrastive.alpha = cfg.contrastive.beta = 0.0;
            if (auto p = cfg.problems(); !p.empty()) throw ConfigError(std::move(p));
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        trainer.emplace(cfg);
    }

    const auto data = load_idrid_split(a.data, Split::train, cfg.augmentation.output_size);
    if (data.empty()) throw UsageError("no image/mask pairs found under " + a.data.string());
    std::cout << "training on " << data.size() << " samples, " << cfg.epochs << " epochs\n";

    FitOptions opts;
    opts.out_dir = a.out;
    int last_epoch = -1;
    opts.on_step = [&](const StepRecord& r) {
        if (r.epoch != last_epoch) {
            last_epoch = r.epoch;
            std::cout << "epoch " << r.epoch << " lr " << r.lr << " total " << r.losses.total << "\n";
        }
    };
    auto result = trainer->fit(data, opts);

    RunManifest manifest = make_manifest(cfg, data);
    manifest.artifacts.push_back((a.out / "train_log.jsonl").string());
    for (const auto& c : result.checkpoints) manifest.artifacts.push_back(c.string());
    write_text(a.out / "manifest.json", to_json(manifest, cfg).dump(2) + "\n");
    write_text(a.out / "config.txt", manifest.config_text);
    std::cout << "done: " << result.log.size() << " steps, manifest " << manifest.run_hash << "\n";
    return kOk;
}

struct EvalArgs {
    fs::path checkpoint;
    fs::path data;
    fs::path out;
    double threshold = 0.5;
    std::string aggregation = "per-image-mean";
    bool overlays = false;
};

int cmd_eval(const EvalArgs& a) {
    if (!fs::exists(a.checkpoint)) throw UsageError("checkpoint does not exist: " + a.checkpoint.string());
    if (!fs::exists(a.data)) throw UsageError("data directory does not exist: " + a.data.string());
    Aggregation agg;
    try {
        agg = parse_aggregation(a.aggregation);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    Trainer trainer = Trainer::from_checkpoint(a.checkpoint);
    const int size = trainer.config().augmentation.output_size;
    const auto data = load_idrid_split(a.data, Split::test, size);
    if (data.empty()) throw UsageError("no image/mask pairs found under " + a.data.string());
    auto report = evaluate(trainer.model(), data, size, a.threshold, agg,
                           a.overlays ? a.out / "overlays" : fs::path{});
    write_text(a.out / "metrics.json", to_json(report).dump(2) + "\n");
    const auto table = format_table(report);
    write_text(a.out / "metrics.txt", table);
    std::cout << table;
    return kOk;
}

struct ContourArgs {
    fs::path mask;
    fs::path out;
    int grid_n = 16;
};

int cmd_contours(const ContourArgs& a) {
    if (!fs::exists(a.mask)) throw UsageError("mask file does not exist: " + a.mask.string());
    auto read = read_mask(a.mask);
    if (!read.was_binary) std::cerr << "warning: " << a.mask << " is not binary; treating nonzero pixels as lesion\n";
    PatchGrid grid;
    try {
        grid = partition(read.mask, a.grid_n);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto contours = compose_contours(grid, read.mask);
    if (!is_subset(contours.inner, read.mask) || !is_disjoint(contours.outer, read.mask))
        throw std::logic_error("contour invariant violated");
    write_mask(a.out / "inner.png", contours.inner);
    write_mask(a.out / "outer.png", contours.outer);
    std::ofstream csv(a.out / "patches.csv");
    write_patch_csv(csv, grid);
    std::cout << "inner " << count_foreground(contours.inner) << " px, outer " << count_foreground(contours.outer)
              << " px\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    torch::set_num_threads(1);
    CLI::App app{"Patch-wise contrastive loss toolkit for binary lesion segmentation"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic fundus-like dataset");
    s->add_option("--out", synth.out, "Output root (train/ and test/ are created)")->required();
    s->add_option("--count", synth.count, "Training samples")->check(CLI::PositiveNumber);
    s->add_option("--test-count", synth.test_count, "Test samples")->check(CLI::NonNegativeNumber);
    s->add_option("--size", synth.size, "Image side in pixels")->check(CLI::Range(64, 4096));
    s->add_option("--seed", synth.seed, "Generator seed");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the U-Net with the composite loss");
    t->add_option("--config", train.config, "key = value config file (defaults apply when omitted)");
    t->add_option("--data", train.data, "Dataset root")->required();
    t->add_option("--out", train.out, "Output directory")->required();
    t->add_option("--seed", train.seed, "Override train.seed");
    t->add_option("--resume", train.resume, "Continue from a checkpoint");
    t->add_flag("--bce-only", train.bce_only, "Set alpha = beta = 0");

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
    e->add_option("--data", eval.data, "Dataset root")->required();
    e->add_option("--out", eval.out, "Output directory")->required();
    e->add_option("--threshold", eval.threshold, "Probability threshold (strict >)")->check(CLI::Range(0.0, 1.0));
    e->add_option("--aggregation", eval.aggregation, "per-image-mean | dataset-micro");
    e->add_flag("--overlays", eval.overlays, "Write GT/prediction overlay PNGs");

    ContourArgs contours;
    auto* c = app.add_subcommand("contours", "Export composed inner/outer contour masks");
    c->add_option("--mask", contours.mask, "Binary mask image")->required();
    c->add_option("--out", contours.out, "Output directory")->required();
    c->add_option("--grid-n", contours.grid_n, "Patch grid side")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kUsage;
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*t) return cmd_train(train);
        if (*e) return cmd_eval(eval);
        if (*c) return cmd_contours(contours);
    } catch (const UsageError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kUsage;
    } catch (const CheckpointError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kUsage;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

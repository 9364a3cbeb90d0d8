#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "patchcon/image_io.hpp"
#include "patchcon/raster.hpp"

namespace patchcon {

/// RGB image with its binary lesion mask.
struct Sample {
    Image image;
    Mask mask;
    std::string id;
};

inline void validate(const Sample& s) {
    if (s.image.channels() != 3 || !s.image.same_extent(s.mask) || s.mask.channels() != 1) {
        std::ostringstream msg;
        msg << "sample '" << s.id << "': image " << s.image.rows() << "x" << s.image.cols() << "x"
            << s.image.channels() << " does not match mask " << s.mask.rows() << "x" << s.mask.cols();
        throw std::invalid_argument(msg.str());
    }
    if (!is_binary(s.mask)) throw std::invalid_argument("sample '" + s.id + "': mask is not binary");
}

class PairingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool has_ext(const fs::path& p, std::initializer_list<const char*> exts) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const char* x : exts)
        if (e == x) return true;
    return false;
}

// IDRiD names hard-exudate masks `{id}_EX.tif`; plain `{id}.ext` is accepted too.
inline fs::path find_mask(const fs::path& mask_dir, const std::string& id) {
    for (const char* suffix : {"", "_EX"})
        for (const char* ext : {".tif", ".tiff", ".png", ".TIF", ".PNG"}) {
            fs::path p = mask_dir / (id + suffix + ext);
            if (fs::exists(p)) return p;
        }
    return {};
}

}  // namespace detail

/// Loads `<dir>/images/{id}.jpg|.png` paired with `<dir>/masks/{id}.tif|.png`.
///
/// Masks are binarized (nonzero -> 1). When `resize_short_side` > 0 each pair is scaled so its
/// short side equals that many pixels (bilinear image, nearest mask). Results are sorted by id.
inline std::vector<Sample> load_pairs(const fs::path& dir, int resize_short_side = 0) {
    const fs::path image_dir = dir / "images";
    const fs::path mask_dir = dir / "masks";
    std::vector<Sample> out;
    if (!fs::exists(image_dir)) return out;

    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(image_dir))
        if (e.is_regular_file() && detail::has_ext(e.path(), {".jpg", ".jpeg", ".png"})) images.push_back(e.path());
    std::sort(images.begin(), images.end(),
              [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });

    for (const auto& img_path : images) {
        const std::string id = img_path.stem().string();
        const fs::path mask_path = detail::find_mask(mask_dir, id);
        if (mask_path.empty()) throw PairingError("no mask found for image '" + id + "' in " + mask_dir.string());
        Sample s{read_image(img_path), read_mask(mask_path).mask, id};
        if (!s.image.same_extent(s.mask)) {
            std::ostringstream msg;
            msg << "image '" << id << "' is " << s.image.rows() << "x" << s.image.cols() << " but its mask is "
                << s.mask.rows() << "x" << s.mask.cols();
            throw PairingError(msg.str());
        }
        if (resize_short_side > 0) {
            const double scale = static_cast<double>(resize_short_side) / std::min(s.image.rows(), s.image.cols());
            const int rows = static_cast<int>(std::lround(s.image.rows() * scale));
            const int cols = static_cast<int>(std::lround(s.image.cols() * scale));
            s.image = resize_image(s.image, rows, cols);
            s.mask = resize_mask(s.mask, rows, cols);
        }
        validate(s);
        out.push_back(std::move(s));
    }
    return out;
}

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

/// Loads one split of an IDRiD-style tree: `<root>/<split>/{images,masks}`. A root that directly
/// contains `images/` is treated as the split itself.
inline std::vector<Sample> load_idrid_split(const fs::path& root, Split split, int resize_short_side = 0) {
    const fs::path nested = root / to_string(split);
    if (fs::exists(nested / "images")) return load_pairs(nested, resize_short_side);
    return load_pairs(root, resize_short_side);
}

/// Writes samples in the layout load_pairs reads back (lossless PNG for both files).
inline void export_samples(const fs::path& dir, const std::vector<Sample>& samples) {
    for (const auto& s : samples) {
        write_image(dir / "images" / (s.id + ".png"), s.image);
        write_mask(dir / "masks" / (s.id + ".png"), s.mask);
    }
}

// ---------------------------------------------------------------------------------------------
// Synthetic fundus-like data

struct SyntheticOptions {
    int min_blob_radius = 1;
    int max_blob_radius = 20;
    double min_proportion = 0.001;
    double max_proportion = 0.2;
};

namespace detail {

inline void render_sample(Sample& s, std::mt19937_64& rng, const SyntheticOptions& opt) {
    const int size = s.image.rows();
    const double cy = (size - 1) / 2.0;
    const double cx = (size - 1) / 2.0;
    const double field_r = 0.47 * size;
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    // Background: dark reddish disc with a smooth illumination gradient and bounded noise.
    const double gx = u01(rng) * 2 - 1, gy = u01(rng) * 2 - 1;
    const double base_r = 0.35 + 0.1 * u01(rng);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx > field_r * field_r) continue;
            const double shade = 1.0 + 0.15 * (gx * dx + gy * dy) / field_r;
            const double noise = (u01(rng) - 0.5) * 0.04;
            s.image.at(y, x, 0) = static_cast<float>(std::clamp(base_r * shade + noise, 0.0, 1.0));
            s.image.at(y, x, 1) = static_cast<float>(std::clamp(0.15 * shade + noise, 0.0, 0.3));
            s.image.at(y, x, 2) = static_cast<float>(std::clamp(0.08 * shade + noise, 0.0, 0.3));
        }

    const double area = static_cast<double>(size) * size;
    const double log_lo = std::log(std::max(opt.min_proportion * 3, 0.002));
    const double log_hi = std::log(opt.max_proportion * 0.5);
    const double target = std::exp(log_lo + (log_hi - log_lo) * u01(rng));
    const std::size_t max_pixels = static_cast<std::size_t>(opt.max_proportion * area);
    const std::size_t min_pixels = static_cast<std::size_t>(std::ceil(opt.min_proportion * area));

    std::size_t fg = 0;
    std::uniform_int_distribution<int> radius(opt.min_blob_radius, opt.max_blob_radius);
    for (int attempt = 0; attempt < 10000 && (fg < min_pixels || fg < target * area); ++attempt) {
        // Small radii dominate, mimicking scattered exudate dots.
        const double ry = std::max<double>(opt.min_blob_radius, radius(rng) * std::pow(u01(rng), 1.5));
        const double rx = std::clamp(ry * (0.6 + 0.8 * u01(rng)), double(opt.min_blob_radius), double(opt.max_blob_radius));
        const double angle = u01(rng) * std::numbers::pi;
        const double rad = std::sqrt(u01(rng)) * (field_r - std::max(rx, ry) - 1);
        const double theta = u01(rng) * 2 * std::numbers::pi;
        const double by = cy + rad * std::sin(theta);
        const double bx = cx + rad * std::cos(theta);
        const double brightness = 0.6 + 0.35 * u01(rng);
        const double ca = std::cos(angle), sa = std::sin(angle);

        const int reach = static_cast<int>(std::ceil(std::max(rx, ry))) + 1;
        std::vector<std::pair<int, int>> pixels;
        for (int y = static_cast<int>(by) - reach; y <= static_cast<int>(by) + reach; ++y)
            for (int x = static_cast<int>(bx) - reach; x <= static_cast<int>(bx) + reach; ++x) {
                if (y < 0 || x < 0 || y >= size || x >= size) continue;
                const double dy = y - by, dx = x - bx;
                const double u = (dx * ca + dy * sa) / rx;
                const double v = (-dx * sa + dy * ca) / ry;
                if (u * u + v * v <= 1.0) pixels.emplace_back(y, x);
            }
        std::size_t added = 0;
        for (auto [y, x] : pixels) added += s.mask.at(y, x) == 0;
        if (added == 0 || fg + added > max_pixels) continue;
        for (auto [y, x] : pixels) {
            if (s.mask.at(y, x)) continue;
            s.mask.at(y, x) = 1;
            const double jitter = (u01(rng) - 0.5) * 0.06;
            s.image.at(y, x, 0) = static_cast<float>(std::clamp(brightness + 0.05 + jitter, 0.0, 1.0));
            s.image.at(y, x, 1) = static_cast<float>(std::clamp(brightness - 0.05 + jitter, 0.45, 1.0));
            s.image.at(y, x, 2) = static_cast<float>(std::clamp(0.5 * brightness + jitter, 0.0, 1.0));
        }
        fg += added;
    }
}

}  // namespace detail

/// Dark circular fundus field with bright elliptical blobs; the mask is exactly the blob support.
/// Deterministic in `seed`. Foreground proportion per image stays in
/// [options.min_proportion, options.max_proportion].
inline std::vector<Sample> make_synthetic_dataset(int count, int image_size, std::uint64_t seed,
                                                  const SyntheticOptions& options = {}) {
    if (count < 1) throw std::invalid_argument("synthetic dataset: count must be >= 1");
    if (image_size < 64) throw std::invalid_argument("synthetic dataset: image_size must be >= 64");
    std::vector<Sample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(i), std::uint64_t{0x5eed}};
        std::mt19937_64 rng(seq);
        std::ostringstream id;
        id << "synth_" << std::setw(4) << std::setfill('0') << i;
        Sample s{Image(image_size, image_size, 3), Mask(image_size, image_size), id.str()};
        detail::render_sample(s, rng, options);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Augmentation

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct AugmentationConfig {
    double horizontal_flip_prob = 0.5;
    Range rotation_degrees{-180.0, 180.0};
    Range brightness_scale{0.5, 1.5};
    Range contrast_scale{0.5, 1.5};
    int output_size = 256;
    bool random_crop = true;

    /// Resize/crop only.
    static AugmentationConfig identity(int output_size) {
        return {0.0, {0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}, output_size, false};
    }

    void validate() const {
        auto bad = [](const std::string& m) { throw std::invalid_argument("augmentation config: " + m); };
        if (horizontal_flip_prob < 0.0 || horizontal_flip_prob > 1.0) bad("flip probability outside [0, 1]");
        if (rotation_degrees.lo > rotation_degrees.hi || rotation_degrees.lo < -180.0 || rotation_degrees.hi > 180.0)
            bad("rotation range must lie within [-180, 180]");
        if (brightness_scale.lo <= 0.0 || brightness_scale.lo > brightness_scale.hi) bad("invalid brightness range");
        if (contrast_scale.lo <= 0.0 || contrast_scale.lo > contrast_scale.hi) bad("invalid contrast range");
        if (output_size < 1) bad("output size must be positive");
    }
};

inline Sample flip_horizontal(const Sample& s) {
    Sample out{Image(s.image.rows(), s.image.cols(), 3), Mask(s.mask.rows(), s.mask.cols()), s.id};
    const int w = s.image.cols();
    for (int y = 0; y < s.image.rows(); ++y)
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = s.image.at(y, w - 1 - x, c);
            out.mask.at(y, x) = s.mask.at(y, w - 1 - x);
        }
    return out;
}

/// Counter-clockwise rotation about the pixel-grid center. Image bilinear, mask nearest; uncovered
/// pixels become 0.
inline Sample rotate(const Sample& s, double degrees) {
    const int h = s.image.rows(), w = s.image.cols();
    Sample out{Image(h, w, 3), Mask(h, w), s.id};
    const double rad = degrees * std::numbers::pi / 180.0;
    // Snap quarter turns so exact rotations stay exact.
    double ca = std::cos(rad), sa = std::sin(rad);
    if (std::abs(ca) < 1e-12) ca = 0.0;
    if (std::abs(sa) < 1e-12) sa = 0.0;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // Inverse map: output (x, y) samples input at R^-1 (p - c) + c.
            const double dx = x - cx, dy = y - cy;
            const double sx = ca * dx - sa * dy + cx;
            const double sy = sa * dx + ca * dy + cy;

            const long ny = std::lround(sy), nx = std::lround(sx);
            if (std::abs(sy - ny) < 1e-9 && std::abs(sx - nx) < 1e-9) {
                if (s.mask.contains(static_cast<int>(ny), static_cast<int>(nx))) {
                    out.mask.at(y, x) = s.mask.at(ny, nx);
                    for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = s.image.at(ny, nx, c);
                }
                continue;
            }
            if (s.mask.contains(static_cast<int>(ny), static_cast<int>(nx))) out.mask.at(y, x) = s.mask.at(ny, nx);

            const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
            const double fy = sy - y0, fx = sx - x0;
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    const int yy = y0 + (k >> 1), xx = x0 + (k & 1);
                    if (!s.image.contains(yy, xx)) continue;
                    const double wgt = ((k >> 1) ? fy : 1 - fy) * ((k & 1) ? fx : 1 - fx);
                    acc += wgt * s.image.at(yy, xx, c);
                }
                out.image.at(y, x, c) = static_cast<float>(acc);
            }
        }
    return out;
}

/// Scales the short side to `size`, then crops a size x size window (centered unless `crop_top`/
/// `crop_left` are given).
inline Sample resize_and_crop(const Sample& s, int size, int crop_top = -1, int crop_left = -1) {
    const double scale = static_cast<double>(size) / std::min(s.image.rows(), s.image.cols());
    const int rows = std::max(size, static_cast<int>(std::lround(s.image.rows() * scale)));
    const int cols = std::max(size, static_cast<int>(std::lround(s.image.cols() * scale)));
    Sample scaled{resize_image(s.image, rows, cols), resize_mask(s.mask, rows, cols), s.id};
    if (rows == size && cols == size) return scaled;
    const int top = crop_top >= 0 ? std::min(crop_top, rows - size) : (rows - size) / 2;
    const int left = crop_left >= 0 ? std::min(crop_left, cols - size) : (cols - size) / 2;
    Sample out{Image(size, size, 3), Mask(size, size), s.id};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = scaled.image.at(top + y, left + x, c);
            out.mask.at(y, x) = scaled.mask.at(top + y, left + x);
        }
    return out;
}

/// Random flip, rotation, brightness and contrast, then resize/crop to the output size.
/// Geometric transforms act on image and mask alike; photometric ones on the image only.
inline Sample augment(const Sample& sample, const AugmentationConfig& config, std::uint64_t seed) {
    validate(sample);
    config.validate();
    std::seed_seq seq{seed, std::uint64_t{0xa06}};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto draw = [&](const Range& r) { return r.lo + (r.hi - r.lo) * u01(rng); };

    const bool flip = u01(rng) < config.horizontal_flip_prob;
    const double angle = draw(config.rotation_degrees);
    const double brightness = draw(config.brightness_scale);
    const double contrast = draw(config.contrast_scale);
    const double crop_u = u01(rng), crop_v = u01(rng);

    Sample s = flip ? flip_horizontal(sample) : sample;
    if (angle != 0.0) s = rotate(s, angle);

    if (brightness != 1.0 || contrast != 1.0) {
        auto px = s.image.data();
        double mean = 0.0;
        for (float v : px) mean += v * brightness;
        mean /= static_cast<double>(px.size());
        for (auto& v : px) {
            double b = v * brightness;
            if (contrast != 1.0) b = (b - mean) * contrast + mean;
            v = static_cast<float>(std::clamp(b, 0.0, 1.0));
        }
    }

    if (config.random_crop) {
        const double scale = static_cast<double>(config.output_size) / std::min(s.image.rows(), s.image.cols());
        const int rows = std::max(config.output_size, static_cast<int>(std::lround(s.image.rows() * scale)));
        const int cols = std::max(config.output_size, static_cast<int>(std::lround(s.image.cols() * scale)));
        const int top = static_cast<int>(crop_u * (rows - config.output_size + 1));
        const int left = static_cast<int>(crop_v * (cols - config.output_size + 1));
        s = resize_and_crop(s, config.output_size, top, left);
    } else {
        s = resize_and_crop(s, config.output_size);
    }
    validate(s);
    return s;
}

}  // namespace patchcon

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "patchcon/dataset.hpp"
#include "patchcon/losses.hpp"
#include "patchcon/unet.hpp"

namespace patchcon {

struct TrainConfig {
    int batch_size = 8;
    double lr_initial = 1e-3;
    double lr_decay_factor = 0.1;
    int lr_decay_every = 80;
    int epochs = 240;
    int grid_n = 16;
    ContrastiveConfig contrastive;
    bool contrastive_enabled = true;  // false: pure BCE, no pooling at all
    std::uint64_t seed = 0;
    BackboneDescriptor backbone;
    std::size_t bank_capacity = 1024;
    std::size_t sample_cap = 64;  // per class, per step, for batch anchors and bank candidates
    bool augment = true;
    AugmentationConfig augmentation;

    /// Learning rate for a 0-indexed epoch: step decay every `lr_decay_every` epochs.
    double learning_rate(int epoch) const {
        double lr = lr_initial;
        for (int k = 0; k < epoch / lr_decay_every; ++k) lr *= lr_decay_factor;
        return lr;
    }

    /// All violated constraints, empty when valid.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (batch_size < 1) out.emplace_back("train.batch_size must be >= 1");
        if (epochs < 1) out.emplace_back("train.epochs must be >= 1");
        if (!(lr_initial > 0)) out.emplace_back("train.lr_initial must be > 0");
        if (!(lr_decay_factor > 0)) out.emplace_back("train.lr_decay_factor must be > 0");
        if (lr_decay_every < 1) out.emplace_back("train.lr_decay_every must be >= 1");
        if (grid_n < 1) out.emplace_back("patch.grid_n must be >= 1");
        if (!(contrastive.temperature > 0)) out.emplace_back("loss.temperature must be > 0");
        if (!(contrastive.alpha >= 0)) out.emplace_back("loss.alpha must be >= 0");
        if (!(contrastive.beta >= 0)) out.emplace_back("loss.beta must be >= 0");
        if (backbone.base_width < 1) out.emplace_back("model.base_width must be >= 1");
        if (backbone.depth < 1 || backbone.depth > 7) out.emplace_back("model.depth must be in [1, 7]");
        if (!(backbone.head_prior > 0 && backbone.head_prior < 1)) out.emplace_back("model.head_prior must be in (0, 1)");
        if (bank_capacity < 1) out.emplace_back("bank.capacity must be >= 1");
        const int size = augmentation.output_size;
        if (size < 1) out.emplace_back("data.image_size must be >= 1");
        if (size >= 1 && grid_n >= 1 && size % grid_n != 0)
            out.emplace_back("data.image_size " + std::to_string(size) + " is not divisible by patch.grid_n " +
                             std::to_string(grid_n));
        if (size >= 1 && backbone.depth >= 1 && backbone.depth <= 7 && size % backbone.stride() != 0)
            out.emplace_back("data.image_size must be a multiple of " + std::to_string(backbone.stride()));
        try {
            augmentation.validate();
        } catch (const std::invalid_argument& e) {
            out.emplace_back(e.what());
        }
        return out;
    }
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid configuration:";
        for (const auto& x : p) s += "\n  - " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes") return out = true, true;
    if (s == "false" || s == "0" || s == "no") return out = false, true;
    return false;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Field {
    std::string key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<bool(TrainConfig&, const std::string&)> set;
};

template <typename T>
Field number_field(std::string key, T TrainConfig::*ptr) {
    return {key, [ptr](const TrainConfig& c) {
                if constexpr (std::is_floating_point_v<T>)
                    return format_double(c.*ptr);
                else
                    return std::to_string(c.*ptr);
            },
            [ptr](TrainConfig& c, const std::string& v) { return parse_number(v, c.*ptr); }};
}

template <typename T, typename Get>
Field accessor_field(std::string key, Get get) {
    return {key, [get](const TrainConfig& c) {
                const T& v = get(const_cast<TrainConfig&>(c));
                if constexpr (std::is_same_v<T, bool>)
                    return std::string(v ? "true" : "false");
                else if constexpr (std::is_floating_point_v<T>)
                    return format_double(v);
                else
                    return std::to_string(v);
            },
            [get](TrainConfig& c, const std::string& s) {
                T& v = get(c);
                if constexpr (std::is_same_v<T, bool>)
                    return parse_bool(s, v);
                else
                    return parse_number(s, v);
            }};
}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        number_field("train.batch_size", &TrainConfig::batch_size),
        number_field("train.lr_initial", &TrainConfig::lr_initial),
        number_field("train.lr_decay_factor", &TrainConfig::lr_decay_factor),
        number_field("train.lr_decay_every", &TrainConfig::lr_decay_every),
        number_field("train.epochs", &TrainConfig::epochs),
        number_field("train.seed", &TrainConfig::seed),
        accessor_field<bool>("train.augment", [](TrainConfig& c) -> bool& { return c.augment; }),
        number_field("patch.grid_n", &TrainConfig::grid_n),
        accessor_field<double>("loss.temperature", [](TrainConfig& c) -> double& { return c.contrastive.temperature; }),
        accessor_field<double>("loss.alpha", [](TrainConfig& c) -> double& { return c.contrastive.alpha; }),
        accessor_field<double>("loss.beta", [](TrainConfig& c) -> double& { return c.contrastive.beta; }),
        accessor_field<bool>("loss.contrastive", [](TrainConfig& c) -> bool& { return c.contrastive_enabled; }),
        number_field("bank.capacity", &TrainConfig::bank_capacity),
        number_field("bank.sample_cap", &TrainConfig::sample_cap),
        accessor_field<int>("model.base_width", [](TrainConfig& c) -> int& { return c.backbone.base_width; }),
        accessor_field<int>("model.depth", [](TrainConfig& c) -> int& { return c.backbone.depth; }),
        accessor_field<double>("model.head_prior", [](TrainConfig& c) -> double& { return c.backbone.head_prior; }),
        accessor_field<int>("data.image_size", [](TrainConfig& c) -> int& { return c.augmentation.output_size; }),
        accessor_field<bool>("data.random_crop", [](TrainConfig& c) -> bool& { return c.augmentation.random_crop; }),
        accessor_field<double>("aug.flip_prob", [](TrainConfig& c) -> double& { return c.augmentation.horizontal_flip_prob; }),
        accessor_field<double>("aug.rotation_min", [](TrainConfig& c) -> double& { return c.augmentation.rotation_degrees.lo; }),
        accessor_field<double>("aug.rotation_max", [](TrainConfig& c) -> double& { return c.augmentation.rotation_degrees.hi; }),
        accessor_field<double>("aug.brightness_min", [](TrainConfig& c) -> double& { return c.augmentation.brightness_scale.lo; }),
        accessor_field<double>("aug.brightness_max", [](TrainConfig& c) -> double& { return c.augmentation.brightness_scale.hi; }),
        accessor_field<double>("aug.contrast_min", [](TrainConfig& c) -> double& { return c.augmentation.contrast_scale.lo; }),
        accessor_field<double>("aug.contrast_max", [](TrainConfig& c) -> double& { return c.augmentation.contrast_scale.hi; }),
    };
    return f;
}

inline std::string env_name(const std::string& key) {
    std::string s = "PATCHCON_";
    for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

}  // namespace detail

/// Canonical text form: every key, fixed order, round-trippable values.
inline std::string to_text(const TrainConfig& c) {
    std::string out;
    for (const auto& f : detail::fields()) out += f.key + " = " + f.get(c) + "\n";
    return out;
}

/// Parses `key = value` lines (`#` starts a comment) over the defaults. Then applies
/// PATCHCON_<KEY> environment overrides when `use_env`. Collects every problem before throwing.
inline TrainConfig parse_config(const std::string& text, bool use_env = true) {
    TrainConfig cfg;
    std::vector<std::string> problems;
    std::map<std::string, const detail::Field*> by_key;
    for (const auto& f : detail::fields()) by_key[f.key] = &f;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto it = by_key.find(key);
        if (it == by_key.end())
            problems.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        else if (!it->second->set(cfg, value))
            problems.push_back("line " + std::to_string(lineno) + ": bad value '" + value + "' for " + key);
    }
    if (use_env) {
        for (const auto& f : detail::fields()) {
            const std::string name = detail::env_name(f.key);
            if (const char* v = std::getenv(name.c_str()); v != nullptr)
                if (!f.set(cfg, detail::trim(v))) problems.push_back("bad value '" + std::string(v) + "' in " + name);
        }
    }
    for (auto& p : cfg.problems()) problems.push_back(std::move(p));
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

inline TrainConfig load_config(const std::filesystem::path& path, bool use_env = true) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), use_env);
}

}  // namespace patchcon

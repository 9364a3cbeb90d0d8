#pragma once

#include <cstdint>
#include <iomanip>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "patchcon/config.hpp"
#include "patchcon/dataset.hpp"

namespace patchcon {

inline constexpr const char* kToolVersion = "0.1.0";

/// Incremental SHA-256.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256: init failed");
    }

    Sha256& update(std::span<const std::uint8_t> bytes) {
        EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
        return *this;
    }
    Sha256& update(std::string_view s) {
        return update(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }
    template <typename T>
    Sha256& update_values(std::span<const T> values) {
        return update(std::span(reinterpret_cast<const std::uint8_t*>(values.data()), values.size_bytes()));
    }

    std::string hex() {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), digest, &len);
        std::ostringstream out;
        for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
        return out.str();
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

/// Content hash of the loaded samples: ids, shapes, pixel values and masks.
inline std::string dataset_fingerprint(const std::vector<Sample>& samples) {
    Sha256 h;
    for (const auto& s : samples) {
        std::ostringstream head;
        head << s.id << '\n' << s.image.rows() << 'x' << s.image.cols() << '\n';
        h.update(head.str());
        h.update_values(s.image.data());
        h.update_values(s.mask.data());
    }
    return h.hex();
}

struct RunManifest {
    std::string config_text;
    std::string config_hash;
    std::string dataset_fingerprint;
    std::string run_hash;  // over config and data together
    std::vector<std::string> artifacts;
    std::string tool_version = kToolVersion;
};

inline RunManifest make_manifest(const TrainConfig& config, const std::vector<Sample>& data) {
    RunManifest m;
    m.config_text = to_text(config);
    m.config_hash = Sha256().update(m.config_text).hex();
    m.dataset_fingerprint = dataset_fingerprint(data);
    m.run_hash = Sha256().update(m.config_hash).update(m.dataset_fingerprint).hex();
    return m;
}

inline nlohmann::ordered_json to_json(const RunManifest& m, const TrainConfig& config) {
    nlohmann::ordered_json j;
    j["tool_version"] = m.tool_version;
    j["run_hash"] = m.run_hash;
    j["config_hash"] = m.config_hash;
    j["dataset_fingerprint"] = m.dataset_fingerprint;
    auto& cfg = j["config"] = nlohmann::ordered_json::object();
    std::istringstream in(m.config_text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["alpha"] = config.contrastive.alpha;
    j["beta"] = config.contrastive.beta;
    j["artifacts"] = m.artifacts;
    return j;
}

}  // namespace patchcon

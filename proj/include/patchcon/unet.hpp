#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <torch/torch.h>

namespace patchcon {

/// Reduced U-Net shape: `depth` resolution levels with widths base_width * 2^level.
struct BackboneDescriptor {
    int in_channels = 3;
    int base_width = 16;
    int depth = 4;
    double head_prior = 0.01;  // initial foreground probability of the head bias

    void validate() const {
        if (in_channels < 1 || base_width < 1 || depth < 1 || depth > 7 || !(head_prior > 0 && head_prior < 1)) {
            std::ostringstream msg;
            msg << "invalid backbone descriptor (in_channels=" << in_channels << ", base_width=" << base_width
                << ", depth=" << depth << ", head_prior=" << head_prior << ")";
            throw std::invalid_argument(msg.str());
        }
    }
    /// Input sides must be multiples of this.
    int stride() const { return 1 << (depth - 1); }
    int feature_channels() const { return base_width; }
};

// conv3x3 -> GroupNorm -> ReLU, twice. GroupNorm keeps samples independent in train and eval.
struct DoubleConvImpl : torch::nn::Module {
    DoubleConvImpl(int in, int out) {
        auto groups = out >= 8 ? 4 : 1;
        body = register_module(
            "body", torch::nn::Sequential(
                        torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1).bias(false)),
                        torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups, out)), torch::nn::ReLU(),
                        torch::nn::Conv2d(torch::nn::Conv2dOptions(out, out, 3).padding(1).bias(false)),
                        torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups, out)), torch::nn::ReLU()));
    }
    torch::Tensor forward(const torch::Tensor& x) { return body->forward(x); }

    torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(DoubleConv);

struct UNetOutput {
    torch::Tensor features;  // [B, C, H, W], last decoder map before the head
    torch::Tensor logits;    // [B, 1, H, W]
};

struct UNetImpl : torch::nn::Module {
    explicit UNetImpl(const BackboneDescriptor& d) : descriptor(d) {
        d.validate();
        int in = d.in_channels;
        for (int level = 0; level < d.depth; ++level) {
            const int width = d.base_width << level;
            encoders.push_back(register_module("enc" + std::to_string(level), DoubleConv(in, width)));
            in = width;
        }
        for (int level = d.depth - 1; level > 0; --level) {
            const int width = d.base_width << level;
            const int skip = width / 2;
            ups.push_back(register_module(
                "up" + std::to_string(level),
                torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(width, skip, 2).stride(2))));
            decoders.push_back(register_module("dec" + std::to_string(level), DoubleConv(2 * skip, skip)));
        }
        head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(d.base_width, 1, 1)));
        torch::NoGradGuard no_grad;
        head->bias.fill_(std::log(d.head_prior / (1.0 - d.head_prior)));
    }

    UNetOutput forward(torch::Tensor x) {
        if (x.dim() != 4 || x.size(2) % descriptor.stride() != 0 || x.size(3) % descriptor.stride() != 0) {
            std::ostringstream msg;
            msg << "unet: input " << x.sizes() << " must be [B, C, H, W] with H, W multiples of "
                << descriptor.stride();
            throw std::invalid_argument(msg.str());
        }
        std::vector<torch::Tensor> skips;
        for (std::size_t i = 0; i < encoders.size(); ++i) {
            if (i > 0) x = torch::max_pool2d(x, 2);
            x = encoders[i]->forward(x);
            skips.push_back(x);
        }
        for (std::size_t i = 0; i < decoders.size(); ++i) {
            x = ups[i]->forward(x);
            x = decoders[i]->forward(torch::cat({x, skips[skips.size() - 2 - i]}, 1));
        }
        return {x, head->forward(x)};
    }

    BackboneDescriptor descriptor;
    std::vector<DoubleConv> encoders;
    std::vector<torch::nn::ConvTranspose2d> ups;
    std::vector<DoubleConv> decoders;
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(UNet);

/// Builds a U-Net with parameters initialized from `seed`.
inline UNet build_backbone(const BackboneDescriptor& descriptor, uint64_t seed) {
    descriptor.validate();
    torch::manual_seed(seed);
    return UNet(descriptor);
}

}  // namespace patchcon

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <torch/torch.h>

namespace retfuse {

// ImageNet channel statistics used for standardization.
inline constexpr std::array<float, 3> kImagenetMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImagenetStd{0.229f, 0.224f, 0.225f};

/// Decodes a PNG/JPEG file to a float CHW tensor in [0,1], RGB order.
torch::Tensor decode_image(const std::string& path);

/// Bilinear resize (half-pixel centers, edge clamped) of a CHW tensor.
torch::Tensor bilinear_resize(const torch::Tensor& chw, int64_t out_h, int64_t out_w);

/// Per-channel (x - mean) / std with the ImageNet constants.
torch::Tensor standardize_imagenet(const torch::Tensor& chw01);

/// decode -> bilinear resize to side x side -> [0,1]. Standardization is a
/// separate step so reconstruction targets can use the [0,1] image.
torch::Tensor preprocess_image01(const torch::Tensor& chw01, int64_t side);

struct AugmentDraws {
    bool flip_h = false;
    bool flip_v = false;
    double angle_deg = 0;      // in [-15, 15]
    double brightness = 1.0;   // in [0.9, 1.1]
    double contrast = 1.0;     // in [0.9, 1.1]
};

AugmentDraws sample_augment_draws(std::mt19937_64& rng);

/// Applies flips, rotation (bilinear, zero border fill), brightness then
/// contrast jitter; output clamped to [0,1].
torch::Tensor augment_with_draws(const torch::Tensor& chw01, const AugmentDraws& draws);

torch::Tensor augment_image(const torch::Tensor& chw01, std::mt19937_64& rng);

/// Child seed for worker `index` under `base` so prefetch order never
/// changes augmentation results.
uint64_t child_seed(uint64_t base, uint64_t index);

} // namespace retfuse

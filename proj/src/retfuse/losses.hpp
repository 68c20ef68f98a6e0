#pragma once

#include <array>

#include <torch/torch.h>

namespace retfuse {

// Component order used everywhere a six-vector of losses appears.
enum LossIndex : int {
    kImgTxt = 0,
    kImgStr = 1,
    kTxtStr = 2,
    kRecImg = 3,
    kRecTxt = 4,
    kCls = 5,
};

struct LossBreakdown {
    std::array<double, 6> components{}; // disabled terms are 0
    std::array<double, 6> alphas{};
    std::array<double, 6> weights{};    // softmax over enabled alphas; disabled are 0
    double total = 0;
    torch::Tensor total_tensor;         // differentiable total for backward
};

/// Symmetric InfoNCE with in-batch negatives. Rows of A and B must be
/// L2-normalized (deviation > 1e-4 raises NotNormalized). N = 1 gives 0.
torch::Tensor contrastive_loss(const torch::Tensor& a, const torch::Tensor& b, double tau);

/// Mean squared error over all elements.
torch::Tensor reconstruction_image_loss(const torch::Tensor& pred, const torch::Tensor& target);

/// Token-level cross-entropy averaged over non-pad positions.
/// logits: [B, L, V]; target_ids: [B, L]; pad_mask: [B, L], 1 = real token.
torch::Tensor reconstruction_text_loss(const torch::Tensor& logits, const torch::Tensor& target_ids,
                                       const torch::Tensor& pad_mask);

/// Mean of the SDRG and ICDR five-class cross-entropies, batch-averaged.
torch::Tensor classification_loss(const torch::Tensor& sdrg_logits, const torch::Tensor& icdr_logits,
                                  const torch::Tensor& sdrg_label, const torch::Tensor& icdr_label);

/// Weighted total: weights = softmax of alphas restricted to enabled terms,
/// total = sum w_i * l_i. Disabled components must be passed as undefined
/// tensors; their weight is 0 and their alpha is excluded from the softmax.
LossBreakdown total_loss(const torch::Tensor& alphas, const std::array<torch::Tensor, 6>& components,
                         const std::array<bool, 6>& enabled);

} // namespace retfuse

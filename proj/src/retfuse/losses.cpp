#include "retfuse/losses.hpp"

#include "retfuse/errors.hpp"

namespace retfuse {

torch::Tensor contrastive_loss(const torch::Tensor& a, const torch::Tensor& b, double tau) {
    TORCH_CHECK(a.dim() == 2 && b.dim() == 2 && a.sizes() == b.sizes(), "expected matching [N,d] inputs");
    TORCH_CHECK(tau > 0, "temperature must be positive");
    auto check_norms = [](const torch::Tensor& m, const char* name) {
        auto dev = (m.norm(2, 1) - 1).abs().max().item<double>();
        if (dev > 1e-4)
            throw NotNormalized(std::string(name) + " rows must be L2-normalized (max deviation " +
                                std::to_string(dev) + ")");
    };
    check_norms(a, "A");
    check_norms(b, "B");
    const int64_t n = a.size(0);
    auto sim = torch::matmul(a, b.t()) / tau;
    auto target = torch::arange(n, torch::kInt64);
    auto row = torch::nn::functional::cross_entropy(sim, target);
    auto col = torch::nn::functional::cross_entropy(sim.t(), target);
    return 0.5 * (row + col);
}

torch::Tensor reconstruction_image_loss(const torch::Tensor& pred, const torch::Tensor& target) {
    if (pred.sizes() != target.sizes())
        throw ShapeMismatch("reconstruction shapes differ: " + std::to_string(pred.numel()) + " vs " +
                            std::to_string(target.numel()) + " elements");
    return torch::mse_loss(pred, target);
}

torch::Tensor reconstruction_text_loss(const torch::Tensor& logits, const torch::Tensor& target_ids,
                                       const torch::Tensor& pad_mask) {
    TORCH_CHECK(logits.dim() == 3, "expected [B,L,V] logits");
    auto mask = pad_mask.to(torch::kBool);
    if (!mask.any().item<bool>()) throw EmptyMask("text reconstruction mask has no valid positions");
    auto flat_logits = logits.reshape({-1, logits.size(2)});
    auto flat_targets = target_ids.reshape({-1});
    auto flat_mask = mask.reshape({-1});
    auto per_pos = torch::nn::functional::cross_entropy(
        flat_logits, flat_targets, torch::nn::functional::CrossEntropyFuncOptions().reduction(torch::kNone));
    return (per_pos * flat_mask.to(per_pos.dtype())).sum() / flat_mask.sum().to(per_pos.dtype());
}

torch::Tensor classification_loss(const torch::Tensor& sdrg_logits, const torch::Tensor& icdr_logits,
                                  const torch::Tensor& sdrg_label, const torch::Tensor& icdr_label) {
    auto check_labels = [](const torch::Tensor& l, const char* name) {
        if ((l.lt(0) | l.gt(4)).any().item<bool>())
            throw LabelOutOfRange(std::string(name) + " labels must lie in [0,4]");
    };
    check_labels(sdrg_label, "SDRG");
    check_labels(icdr_label, "ICDR");
    auto a = torch::nn::functional::cross_entropy(sdrg_logits, sdrg_label);
    auto b = torch::nn::functional::cross_entropy(icdr_logits, icdr_label);
    return 0.5 * (a + b);
}

LossBreakdown total_loss(const torch::Tensor& alphas, const std::array<torch::Tensor, 6>& components,
                         const std::array<bool, 6>& enabled) {
    TORCH_CHECK(alphas.dim() == 1 && alphas.size(0) == 6, "expected 6 alphas");
    std::vector<int64_t> idx;
    for (int i = 0; i < 6; ++i) {
        if (!enabled[i]) continue;
        TORCH_CHECK(components[i].defined(), "enabled loss component ", i, " is undefined");
        if (!torch::isfinite(components[i]).all().item<bool>())
            throw NonFiniteComponent("loss component " + std::to_string(i) + " is non-finite");
        idx.push_back(i);
    }
    TORCH_CHECK(!idx.empty(), "at least one loss term must be enabled");

    auto index = torch::tensor(idx, torch::kInt64);
    auto active_alphas = alphas.index_select(0, index);
    auto weights = torch::softmax(active_alphas, 0);

    LossBreakdown out;
    torch::Tensor total;
    for (size_t k = 0; k < idx.size(); ++k) {
        auto term = weights[static_cast<int64_t>(k)] * components[idx[k]];
        total = total.defined() ? total + term : term;
        out.components[idx[k]] = components[idx[k]].item<double>();
        out.weights[idx[k]] = weights[static_cast<int64_t>(k)].item<double>();
    }
    for (int i = 0; i < 6; ++i) out.alphas[i] = alphas[i].item<double>();
    out.total_tensor = total;
    out.total = total.item<double>();
    return out;
}

} // namespace retfuse

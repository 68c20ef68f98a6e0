#pragma once

#include <optional>

#include <torch/torch.h>

#include "retfuse/config.hpp"

namespace retfuse {

// ---------------------------------------------------------------------------
// Transformer building blocks (shared by backbones, fusion, text decoder)
// ---------------------------------------------------------------------------

class SelfAttentionImpl : public torch::nn::Module {
public:
    SelfAttentionImpl(int64_t dim, int64_t heads, bool causal);

    /// x: [B, L, D]; key_pad: optional [B, L] bool, true where padded.
    /// Pad columns receive -inf attention logits, so their weight is 0.
    torch::Tensor forward(const torch::Tensor& x, const std::optional<torch::Tensor>& key_pad);

private:
    torch::nn::Linear qkv_{nullptr}, out_{nullptr};
    int64_t heads_;
    bool causal_;
};
TORCH_MODULE(SelfAttention);

class TransformerBlockImpl : public torch::nn::Module {
public:
    TransformerBlockImpl(int64_t dim, int64_t heads, int64_t ffn_dim, bool prenorm, bool causal);
    torch::Tensor forward(const torch::Tensor& x, const std::optional<torch::Tensor>& key_pad);

private:
    SelfAttention attn_{nullptr};
    torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
    torch::nn::LayerNorm ln1_{nullptr}, ln2_{nullptr};
    bool prenorm_;
};
TORCH_MODULE(TransformerBlock);

// ---------------------------------------------------------------------------
// Backbone seam: adapters return per-token hidden states of a declared width
// and expose a frozen/unfrozen parameter partition via freeze_depth.
// The toy backbones below are the verified path; an external pretrained
// adapter plugs in behind the same contract.
// ---------------------------------------------------------------------------

class ImageBackboneImpl : public torch::nn::Module {
public:
    virtual ~ImageBackboneImpl() = default;
    /// images: [B, 3, S, S] -> hidden states [B, P, hidden] (one per patch,
    /// no backbone class token in the output).
    virtual torch::Tensor forward(const torch::Tensor& images) = 0;
    virtual int64_t hidden_size() const = 0;
    virtual void apply_freeze(int64_t freeze_depth) = 0;
};

class TextBackboneImpl : public torch::nn::Module {
public:
    virtual ~TextBackboneImpl() = default;
    /// ids, mask: [B, L] -> hidden states [B, L, hidden].
    virtual torch::Tensor forward(const torch::Tensor& ids, const torch::Tensor& mask) = 0;
    virtual int64_t hidden_size() const = 0;
    virtual void apply_freeze(int64_t freeze_depth) = 0; // depth 0 freezes nothing
};

/// Small trainable ViT-style backbone: linear patch embedding + learned
/// positions + transformer blocks. freeze_depth > 0 also freezes the patch
/// embedding and positions.
class ToyImageBackboneImpl : public ImageBackboneImpl {
public:
    ToyImageBackboneImpl(const VisionConfig& cfg, bool prenorm);
    torch::Tensor forward(const torch::Tensor& images) override;
    int64_t hidden_size() const override { return cfg_.backbone_hidden; }
    void apply_freeze(int64_t freeze_depth) override;

    torch::Tensor patchify(const torch::Tensor& images) const; // [B, P, patch_dim]

private:
    VisionConfig cfg_;
    torch::nn::Linear patch_embed_{nullptr};
    torch::Tensor pos_;
    std::vector<TransformerBlock> blocks_;
};

/// Small trainable BERT-style backbone: token embedding + learned positions +
/// transformer blocks. freeze_depth > 0 also freezes the embedding layer.
class ToyTextBackboneImpl : public TextBackboneImpl {
public:
    ToyTextBackboneImpl(const TextConfig& cfg, int64_t vocab_size, bool prenorm);
    torch::Tensor forward(const torch::Tensor& ids, const torch::Tensor& mask) override;
    int64_t hidden_size() const override { return cfg_.backbone_hidden; }
    void apply_freeze(int64_t freeze_depth) override;

private:
    TextConfig cfg_;
    torch::nn::Embedding embed_{nullptr};
    torch::Tensor pos_;
    std::vector<TransformerBlock> blocks_;
};

// ---------------------------------------------------------------------------
// Modality encoders: each yields tokens [B, L, d] whose first row is the
// modality CLS, plus a pad mask [B, L] (true = pad).
// ---------------------------------------------------------------------------

struct TokenBatch {
    torch::Tensor tokens; // [B, L, d]
    torch::Tensor pad;    // [B, L] bool
};

class ImageEncoderImpl : public torch::nn::Module {
public:
    ImageEncoderImpl(const VisionConfig& cfg, int64_t model_dim, bool prenorm);
    TokenBatch forward(const torch::Tensor& images);
    int64_t sequence_length() const; // (S/p)^2 + 1

    std::shared_ptr<ImageBackboneImpl> backbone;

private:
    VisionConfig cfg_;
    torch::nn::Linear proj_{nullptr};
    torch::Tensor cls_;
};
TORCH_MODULE(ImageEncoder);

class TextEncoderImpl : public torch::nn::Module {
public:
    TextEncoderImpl(const TextConfig& cfg, int64_t vocab_size, int64_t model_dim, bool prenorm);
    TokenBatch forward(const torch::Tensor& ids, const torch::Tensor& mask);
    int64_t sequence_length() const { return cfg_.kept_tokens + 1; }

    std::shared_ptr<TextBackboneImpl> backbone;

private:
    TextConfig cfg_;
    torch::nn::Linear proj_{nullptr};
    torch::Tensor cls_;
};
TORCH_MODULE(TextEncoder);

class StructuredEncoderImpl : public torch::nn::Module {
public:
    StructuredEncoderImpl(const StructuredConfig& cfg, int64_t model_dim);
    TokenBatch forward(const torch::Tensor& features); // [B, 6]
    static constexpr int64_t kSequenceLength = 2;

private:
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, fc3_{nullptr};
    torch::nn::Dropout drop_{nullptr};
    torch::Tensor cls_;
};
TORCH_MODULE(StructuredEncoder);

// ---------------------------------------------------------------------------
// Fusion transformer + heads
// ---------------------------------------------------------------------------

struct Presence {
    bool image = true;
    bool text = true;
    bool structured = true;
    bool any() const { return image || text || structured; }
};

struct FusionOutput {
    torch::Tensor fused;       // [B, L_total, d]
    torch::Tensor pad;         // [B, L_total]
    torch::Tensor img_cls, txt_cls, str_cls; // [B, d]; undefined when absent
    torch::Tensor joint;       // [B, d]
    torch::Tensor sdrg_logits, icdr_logits;  // [B, 5]
    int64_t len_img = 0, len_txt = 0, len_str = 0;
};

class FusionTransformerImpl : public torch::nn::Module {
public:
    FusionTransformerImpl(const FusionConfig& cfg, int64_t model_dim, int64_t max_len);

    FusionOutput forward(const std::optional<TokenBatch>& img, const std::optional<TokenBatch>& txt,
                         const std::optional<TokenBatch>& str);

    std::pair<torch::Tensor, torch::Tensor> classify(const torch::Tensor& joint);

private:
    FusionConfig cfg_;
    int64_t dim_;
    torch::Tensor type_embed_; // [3, d]
    torch::Tensor null_cls_;   // [3, d] learned fill-ins for absent modalities
    torch::Tensor pos_;        // [max_len, d], used only when cfg.positional
    std::vector<TransformerBlock> blocks_;
    torch::nn::Linear joint_proj_{nullptr}; // 3d -> d
    torch::nn::Linear sdrg_head_{nullptr}, icdr_head_{nullptr};
};
TORCH_MODULE(FusionTransformer);

// ---------------------------------------------------------------------------
// Decoders
// ---------------------------------------------------------------------------

class ImageDecoderImpl : public torch::nn::Module {
public:
    ImageDecoderImpl(const DecoderConfig& cfg, int64_t model_dim);
    /// img_cls: [B, d] -> [B, 3, S, S] in [0,1] (sigmoid output).
    torch::Tensor forward(const torch::Tensor& img_cls);

private:
    DecoderConfig cfg_;
    int64_t seed_side_ = 1;
    torch::nn::Linear seed_{nullptr};
    std::vector<torch::nn::ConvTranspose2d> ups_;
    torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(ImageDecoder);

class TextDecoderImpl : public torch::nn::Module {
public:
    TextDecoderImpl(const DecoderConfig& cfg, int64_t model_dim, int64_t vocab_size, int64_t max_len);
    /// Teacher-forced reconstruction: conditions on txt_cls as a prefix token;
    /// logits[:, t] predicts target_ids[:, t]. Shape [B, L, vocab].
    torch::Tensor forward(const torch::Tensor& txt_cls, const torch::Tensor& target_ids);
    /// Greedy decoding for inspection only.
    std::vector<int64_t> greedy(const torch::Tensor& txt_cls, int64_t length, int64_t begin_id);

private:
    DecoderConfig cfg_;
    int64_t max_len_;
    torch::nn::Linear prefix_{nullptr};
    torch::nn::Embedding embed_{nullptr};
    torch::Tensor pos_;
    std::vector<TransformerBlock> blocks_;
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(TextDecoder);

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

struct BatchInput {
    torch::Tensor images;       // [B, 3, S, S] standardized
    torch::Tensor recon_target; // [B, 3, S, S] in [0,1] (pre-standardization)
    torch::Tensor text_ids;     // [B, Lmax]
    torch::Tensor text_mask;    // [B, Lmax]
    torch::Tensor structured;   // [B, 6]
    torch::Tensor sdrg;         // [B] int64
    torch::Tensor icdr;         // [B] int64
};

struct ModelForward {
    FusionOutput fusion;
    torch::Tensor image_recon;  // defined when image present and requested
    torch::Tensor text_logits;  // defined when text present and requested
};

enum class RetrievalMode { paired, isolated };

class MultimodalModelImpl : public torch::nn::Module {
public:
    MultimodalModelImpl(const RunConfig& cfg, int64_t vocab_size);

    ModelForward forward(const BatchInput& batch, const Presence& presence, bool run_decoders);

    /// L2-normalized post-fusion image/text CLS embeddings for retrieval.
    /// Paired mode runs one fuse pass with `presence`; isolated mode runs
    /// image-only and text-only passes. Both require image and text present.
    std::pair<torch::Tensor, torch::Tensor> embed_for_retrieval(const BatchInput& batch, RetrievalMode mode,
                                                                const Presence& presence = Presence{});

    const RunConfig& config() const { return cfg_; }
    int64_t vocab_size() const { return vocab_size_; }

    ImageEncoder image_encoder{nullptr};
    TextEncoder text_encoder{nullptr};
    StructuredEncoder structured_encoder{nullptr};
    FusionTransformer fusion{nullptr};
    ImageDecoder image_decoder{nullptr};
    TextDecoder text_decoder{nullptr};
    torch::Tensor alphas; // [6] learnable loss-weight logits

private:
    RunConfig cfg_;
    int64_t vocab_size_;
};
TORCH_MODULE(MultimodalModel);

} // namespace retfuse

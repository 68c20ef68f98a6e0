#include "retfuse/model.hpp"

#include <cmath>

#include "retfuse/errors.hpp"

namespace retfuse {

namespace {

torch::Tensor small_init(torch::IntArrayRef shape) {
    return torch::randn(shape) * 0.02;
}

} // namespace

// --------------------------- SelfAttention ---------------------------------

SelfAttentionImpl::SelfAttentionImpl(int64_t dim, int64_t heads, bool causal)
    : heads_(heads), causal_(causal) {
    TORCH_CHECK(dim % heads == 0, "attention dim must be divisible by heads");
    qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
    out_ = register_module("out", torch::nn::Linear(dim, dim));
}

torch::Tensor SelfAttentionImpl::forward(const torch::Tensor& x,
                                         const std::optional<torch::Tensor>& key_pad) {
    const int64_t b = x.size(0), l = x.size(1), d = x.size(2);
    const int64_t hd = d / heads_;
    auto qkv = qkv_(x).view({b, l, 3, heads_, hd}).permute({2, 0, 3, 1, 4}); // [3,B,H,L,hd]
    auto q = qkv[0], k = qkv[1], v = qkv[2];
    auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd)); // [B,H,L,L]
    if (causal_) {
        auto mask = torch::triu(torch::ones({l, l}, torch::kBool), /*diagonal=*/1);
        scores = scores.masked_fill(mask, -std::numeric_limits<float>::infinity());
    }
    if (key_pad && key_pad->defined()) {
        auto pad = key_pad->view({b, 1, 1, l});
        scores = scores.masked_fill(pad, -std::numeric_limits<float>::infinity());
    }
    auto attn = torch::softmax(scores, -1);
    auto ctx = torch::matmul(attn, v); // [B,H,L,hd]
    ctx = ctx.permute({0, 2, 1, 3}).reshape({b, l, d});
    return out_(ctx);
}

// --------------------------- TransformerBlock ------------------------------

TransformerBlockImpl::TransformerBlockImpl(int64_t dim, int64_t heads, int64_t ffn_dim, bool prenorm,
                                           bool causal)
    : prenorm_(prenorm) {
    attn_ = register_module("attn", SelfAttention(dim, heads, causal));
    ff1_ = register_module("ff1", torch::nn::Linear(dim, ffn_dim));
    ff2_ = register_module("ff2", torch::nn::Linear(ffn_dim, dim));
    ln1_ = register_module("ln1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    ln2_ = register_module("ln2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
}

torch::Tensor TransformerBlockImpl::forward(const torch::Tensor& x,
                                            const std::optional<torch::Tensor>& key_pad) {
    if (prenorm_) {
        auto h = x + attn_->forward(ln1_(x), key_pad);
        return h + ff2_(torch::relu(ff1_(ln2_(h))));
    }
    auto h = ln1_(x + attn_->forward(x, key_pad));
    return ln2_(h + ff2_(torch::relu(ff1_(h))));
}

// --------------------------- Toy backbones ---------------------------------

ToyImageBackboneImpl::ToyImageBackboneImpl(const VisionConfig& cfg, bool prenorm) : cfg_(cfg) {
    const int64_t patch_dim = 3 * cfg.patch_size * cfg.patch_size;
    const int64_t patches = (cfg.image_side / cfg.patch_size) * (cfg.image_side / cfg.patch_size);
    patch_embed_ = register_module("patch_embed", torch::nn::Linear(patch_dim, cfg.backbone_hidden));
    pos_ = register_parameter("pos", small_init({patches, cfg.backbone_hidden}));
    for (int64_t i = 0; i < cfg.backbone_depth; ++i) {
        blocks_.push_back(TransformerBlock(cfg.backbone_hidden, cfg.backbone_heads,
                                           4 * cfg.backbone_hidden, prenorm, /*causal=*/false));
        register_module("block" + std::to_string(i), blocks_.back());
    }
}

torch::Tensor ToyImageBackboneImpl::patchify(const torch::Tensor& images) const {
    const int64_t p = cfg_.patch_size;
    TORCH_CHECK(images.dim() == 4 && images.size(1) == 3, "expected [B,3,S,S] images");
    if (images.size(2) != cfg_.image_side || images.size(3) != cfg_.image_side)
        throw ShapeError("image side " + std::to_string(images.size(2)) + " does not match configured " +
                         std::to_string(cfg_.image_side));
    auto x = images.unfold(2, p, p).unfold(3, p, p);          // [B,3,S/p,S/p,p,p]
    x = x.permute({0, 2, 3, 1, 4, 5}).contiguous();           // [B,S/p,S/p,3,p,p]
    return x.view({images.size(0), -1, 3 * p * p});           // [B,P,patch_dim]
}

torch::Tensor ToyImageBackboneImpl::forward(const torch::Tensor& images) {
    auto x = patch_embed_(patchify(images)) + pos_;
    for (auto& b : blocks_) x = b->forward(x, std::nullopt);
    return x;
}

void ToyImageBackboneImpl::apply_freeze(int64_t freeze_depth) {
    if (freeze_depth > 0) {
        for (auto& p : patch_embed_->parameters()) p.set_requires_grad(false);
        pos_.set_requires_grad(false);
    }
    for (int64_t i = 0; i < freeze_depth && i < static_cast<int64_t>(blocks_.size()); ++i)
        for (auto& p : blocks_[i]->parameters()) p.set_requires_grad(false);
}

ToyTextBackboneImpl::ToyTextBackboneImpl(const TextConfig& cfg, int64_t vocab_size, bool prenorm)
    : cfg_(cfg) {
    embed_ = register_module("embed", torch::nn::Embedding(vocab_size, cfg.backbone_hidden));
    pos_ = register_parameter("pos", small_init({cfg.max_tokens, cfg.backbone_hidden}));
    for (int64_t i = 0; i < cfg.backbone_depth; ++i) {
        blocks_.push_back(TransformerBlock(cfg.backbone_hidden, cfg.backbone_heads,
                                           4 * cfg.backbone_hidden, prenorm, /*causal=*/false));
        register_module("block" + std::to_string(i), blocks_.back());
    }
}

torch::Tensor ToyTextBackboneImpl::forward(const torch::Tensor& ids, const torch::Tensor& mask) {
    TORCH_CHECK(ids.dim() == 2, "expected [B,L] token ids");
    auto x = embed_(ids) + pos_.index({torch::indexing::Slice(0, ids.size(1))});
    auto pad = mask.to(torch::kBool).logical_not();
    for (auto& b : blocks_) x = b->forward(x, pad);
    return x;
}

void ToyTextBackboneImpl::apply_freeze(int64_t freeze_depth) {
    if (freeze_depth > 0) {
        for (auto& p : embed_->parameters()) p.set_requires_grad(false);
        pos_.set_requires_grad(false);
    }
    for (int64_t i = 0; i < freeze_depth && i < static_cast<int64_t>(blocks_.size()); ++i)
        for (auto& p : blocks_[i]->parameters()) p.set_requires_grad(false);
}

// --------------------------- Encoders --------------------------------------

ImageEncoderImpl::ImageEncoderImpl(const VisionConfig& cfg, int64_t model_dim, bool prenorm) : cfg_(cfg) {
    auto toy = std::make_shared<ToyImageBackboneImpl>(cfg, prenorm);
    backbone = toy;
    register_module("backbone", toy);
    backbone->apply_freeze(cfg.freeze_depth);
    proj_ = register_module("proj", torch::nn::Linear(backbone->hidden_size(), model_dim));
    cls_ = register_parameter("cls", small_init({1, 1, model_dim}));
}

int64_t ImageEncoderImpl::sequence_length() const {
    int64_t n = cfg_.image_side / cfg_.patch_size;
    return n * n + 1;
}

TokenBatch ImageEncoderImpl::forward(const torch::Tensor& images) {
    auto hidden = backbone->forward(images);
    auto tokens = proj_(hidden); // [B,P,d]
    auto cls = cls_.expand({tokens.size(0), 1, tokens.size(2)});
    tokens = torch::cat({cls, tokens}, 1);
    auto pad = torch::zeros({tokens.size(0), tokens.size(1)}, torch::kBool);
    return {tokens, pad};
}

TextEncoderImpl::TextEncoderImpl(const TextConfig& cfg, int64_t vocab_size, int64_t model_dim, bool prenorm)
    : cfg_(cfg) {
    auto toy = std::make_shared<ToyTextBackboneImpl>(cfg, vocab_size, prenorm);
    backbone = toy;
    register_module("backbone", toy);
    backbone->apply_freeze(cfg.freeze_depth);
    proj_ = register_module("proj", torch::nn::Linear(backbone->hidden_size(), model_dim));
    cls_ = register_parameter("cls", small_init({1, 1, model_dim}));
}

TokenBatch TextEncoderImpl::forward(const torch::Tensor& ids, const torch::Tensor& mask) {
    if (ids.size(1) != cfg_.max_tokens)
        throw ShapeError("text ids length " + std::to_string(ids.size(1)) + " != configured max_tokens " +
                         std::to_string(cfg_.max_tokens));
    auto hidden = backbone->forward(ids, mask);
    auto kept = hidden.index({torch::indexing::Slice(), torch::indexing::Slice(0, cfg_.kept_tokens)});
    auto tokens = proj_(kept); // [B,kept,d]
    auto cls = cls_.expand({tokens.size(0), 1, tokens.size(2)});
    tokens = torch::cat({cls, tokens}, 1);
    auto kept_pad = mask.index({torch::indexing::Slice(), torch::indexing::Slice(0, cfg_.kept_tokens)})
                        .to(torch::kBool)
                        .logical_not();
    auto cls_pad = torch::zeros({tokens.size(0), 1}, torch::kBool);
    return {tokens, torch::cat({cls_pad, kept_pad}, 1)};
}

StructuredEncoderImpl::StructuredEncoderImpl(const StructuredConfig& cfg, int64_t model_dim) {
    fc1_ = register_module("fc1", torch::nn::Linear(cfg.input_dim, cfg.hidden1));
    fc2_ = register_module("fc2", torch::nn::Linear(cfg.hidden1, cfg.hidden2));
    fc3_ = register_module("fc3", torch::nn::Linear(cfg.hidden2, model_dim));
    drop_ = register_module("drop", torch::nn::Dropout(cfg.dropout));
    cls_ = register_parameter("cls", small_init({1, 1, model_dim}));
}

TokenBatch StructuredEncoderImpl::forward(const torch::Tensor& features) {
    if (!torch::isfinite(features).all().item<bool>())
        throw NonFiniteInput("structured features contain non-finite values");
    auto h = drop_(torch::relu(fc1_(features)));
    h = drop_(torch::relu(fc2_(h)));
    auto latent = fc3_(h).unsqueeze(1); // [B,1,d]
    auto cls = cls_.expand({latent.size(0), 1, latent.size(2)});
    auto tokens = torch::cat({cls, latent}, 1);
    auto pad = torch::zeros({tokens.size(0), 2}, torch::kBool);
    return {tokens, pad};
}

// --------------------------- Fusion ----------------------------------------

FusionTransformerImpl::FusionTransformerImpl(const FusionConfig& cfg, int64_t model_dim, int64_t max_len)
    : cfg_(cfg), dim_(model_dim) {
    type_embed_ = register_parameter("type_embed", small_init({3, model_dim}));
    null_cls_ = register_parameter("null_cls", small_init({3, model_dim}));
    if (cfg.positional) pos_ = register_parameter("pos", small_init({max_len, model_dim}));
    for (int64_t i = 0; i < cfg.layers; ++i) {
        blocks_.push_back(TransformerBlock(model_dim, cfg.heads, cfg.ffn_mult * model_dim, cfg.prenorm,
                                           /*causal=*/false));
        register_module("block" + std::to_string(i), blocks_.back());
    }
    joint_proj_ = register_module("joint_proj", torch::nn::Linear(3 * model_dim, model_dim));
    sdrg_head_ = register_module("sdrg_head", torch::nn::Linear(model_dim, 5));
    icdr_head_ = register_module("icdr_head", torch::nn::Linear(model_dim, 5));
}

FusionOutput FusionTransformerImpl::forward(const std::optional<TokenBatch>& img,
                                            const std::optional<TokenBatch>& txt,
                                            const std::optional<TokenBatch>& str) {
    if (!img && !txt && !str) throw AllModalitiesAbsent("fusion requires at least one modality");
    std::vector<torch::Tensor> segs, pads;
    FusionOutput out;
    auto add = [&](const std::optional<TokenBatch>& tb, int type_idx, int64_t& len) {
        if (!tb) return;
        if (tb->tokens.size(2) != dim_)
            throw DimensionMismatch("modality dim " + std::to_string(tb->tokens.size(2)) +
                                    " != model dim " + std::to_string(dim_));
        segs.push_back(tb->tokens + type_embed_[type_idx]);
        pads.push_back(tb->pad);
        len = tb->tokens.size(1);
    };
    add(img, 0, out.len_img);
    add(txt, 1, out.len_txt);
    add(str, 2, out.len_str);

    auto x = torch::cat(segs, 1);
    auto pad = torch::cat(pads, 1);
    if (cfg_.positional) x = x + pos_.index({torch::indexing::Slice(0, x.size(1))});
    for (auto& b : blocks_) x = b->forward(x, pad);
    out.fused = x;
    out.pad = pad;

    const int64_t batch = x.size(0);
    auto null_row = [&](int idx) { return null_cls_[idx].unsqueeze(0).expand({batch, dim_}); };
    int64_t off = 0;
    if (img) {
        out.img_cls = x.index({torch::indexing::Slice(), off});
        off += out.len_img;
    }
    if (txt) {
        out.txt_cls = x.index({torch::indexing::Slice(), off});
        off += out.len_txt;
    }
    if (str) out.str_cls = x.index({torch::indexing::Slice(), off});

    auto joint_in = torch::cat({img ? out.img_cls : null_row(0),
                                txt ? out.txt_cls : null_row(1),
                                str ? out.str_cls : null_row(2)}, 1);
    out.joint = joint_proj_(joint_in);
    std::tie(out.sdrg_logits, out.icdr_logits) = classify(out.joint);
    return out;
}

std::pair<torch::Tensor, torch::Tensor> FusionTransformerImpl::classify(const torch::Tensor& joint) {
    return {sdrg_head_(joint), icdr_head_(joint)};
}

// --------------------------- Decoders --------------------------------------

ImageDecoderImpl::ImageDecoderImpl(const DecoderConfig& cfg, int64_t model_dim) : cfg_(cfg) {
    int64_t side = cfg.image_side;
    int64_t stages = 0;
    while (side > 8 && side % 2 == 0) {
        side /= 2;
        ++stages;
    }
    seed_side_ = side;
    int64_t ch = cfg.image_base_channels << stages;
    seed_ = register_module("seed", torch::nn::Linear(model_dim, ch * seed_side_ * seed_side_));
    for (int64_t i = 0; i < stages; ++i) {
        int64_t next = std::max<int64_t>(8, ch / 2);
        ups_.push_back(torch::nn::ConvTranspose2d(
            torch::nn::ConvTranspose2dOptions(ch, next, 4).stride(2).padding(1)));
        register_module("up" + std::to_string(i), ups_.back());
        ch = next;
    }
    out_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, 3, 3).padding(1)));
}

torch::Tensor ImageDecoderImpl::forward(const torch::Tensor& img_cls) {
    auto x = seed_(img_cls).view({img_cls.size(0), -1, seed_side_, seed_side_});
    for (auto& up : ups_) x = torch::relu(up(x));
    return torch::sigmoid(out_(x));
}

TextDecoderImpl::TextDecoderImpl(const DecoderConfig& cfg, int64_t model_dim, int64_t vocab_size,
                                 int64_t max_len)
    : cfg_(cfg), max_len_(max_len) {
    prefix_ = register_module("prefix", torch::nn::Linear(model_dim, model_dim));
    embed_ = register_module("embed", torch::nn::Embedding(vocab_size, model_dim));
    pos_ = register_parameter("pos", small_init({max_len, model_dim}));
    for (int64_t i = 0; i < cfg.text_layers; ++i) {
        blocks_.push_back(TransformerBlock(model_dim, cfg.text_heads, 4 * model_dim, /*prenorm=*/true,
                                           /*causal=*/true));
        register_module("block" + std::to_string(i), blocks_.back());
    }
    head_ = register_module("head", torch::nn::Linear(model_dim, vocab_size));
}

torch::Tensor TextDecoderImpl::forward(const torch::Tensor& txt_cls, const torch::Tensor& target_ids) {
    const int64_t l = target_ids.size(1);
    if (l > max_len_) throw LengthOverflow("target length " + std::to_string(l) + " exceeds decoder max " +
                                           std::to_string(max_len_));
    auto pre = prefix_(txt_cls).unsqueeze(1); // [B,1,d]
    torch::Tensor x;
    if (l > 1) {
        auto shifted = embed_(target_ids.index(
            {torch::indexing::Slice(), torch::indexing::Slice(0, l - 1)}));
        x = torch::cat({pre, shifted}, 1);
    } else {
        x = pre;
    }
    x = x + pos_.index({torch::indexing::Slice(0, l)});
    for (auto& b : blocks_) x = b->forward(x, std::nullopt);
    return head_(x); // [B,L,V]
}

std::vector<int64_t> TextDecoderImpl::greedy(const torch::Tensor& txt_cls, int64_t length,
                                             int64_t begin_id) {
    torch::NoGradGuard ng;
    std::vector<int64_t> out;
    auto ids = torch::full({1, length}, begin_id, torch::kInt64);
    for (int64_t t = 0; t < length; ++t) {
        auto logits = forward(txt_cls.view({1, -1}),
                              ids.index({torch::indexing::Slice(), torch::indexing::Slice(0, t + 1)}));
        int64_t next = logits.index({0, t}).argmax().item<int64_t>();
        out.push_back(next);
        if (t + 1 < length) ids.index_put_({0, t + 1}, next);
    }
    return out;
}

// --------------------------- Full model ------------------------------------

MultimodalModelImpl::MultimodalModelImpl(const RunConfig& cfg, int64_t vocab_size)
    : cfg_(cfg), vocab_size_(vocab_size) {
    cfg.validate();
    image_encoder = register_module("image_encoder", ImageEncoder(cfg.vision, cfg.model_dim, cfg.fusion.prenorm));
    text_encoder =
        register_module("text_encoder", TextEncoder(cfg.text, vocab_size, cfg.model_dim, cfg.fusion.prenorm));
    structured_encoder = register_module("structured_encoder", StructuredEncoder(cfg.structured, cfg.model_dim));
    const int64_t max_len = image_encoder->sequence_length() + text_encoder->sequence_length() +
                            StructuredEncoderImpl::kSequenceLength;
    fusion = register_module("fusion", FusionTransformer(cfg.fusion, cfg.model_dim, max_len));
    image_decoder = register_module("image_decoder", ImageDecoder(cfg.decoder, cfg.model_dim));
    text_decoder =
        register_module("text_decoder", TextDecoder(cfg.decoder, cfg.model_dim, vocab_size, cfg.text.max_tokens));
    alphas = register_parameter("alphas", torch::zeros({6}));
}

ModelForward MultimodalModelImpl::forward(const BatchInput& batch, const Presence& presence,
                                          bool run_decoders) {
    if (!presence.any()) throw AllModalitiesAbsent("forward requires at least one modality");
    std::optional<TokenBatch> img, txt, str;
    if (presence.image) img = image_encoder->forward(batch.images);
    if (presence.text) txt = text_encoder->forward(batch.text_ids, batch.text_mask);
    if (presence.structured) str = structured_encoder->forward(batch.structured);

    ModelForward out;
    out.fusion = fusion->forward(img, txt, str);
    if (run_decoders && presence.image) out.image_recon = image_decoder->forward(out.fusion.img_cls);
    if (run_decoders && presence.text) out.text_logits = text_decoder->forward(out.fusion.txt_cls, batch.text_ids);
    return out;
}

std::pair<torch::Tensor, torch::Tensor> MultimodalModelImpl::embed_for_retrieval(const BatchInput& batch,
                                                                                RetrievalMode mode,
                                                                                const Presence& presence) {
    if (!presence.image || !presence.text)
        throw MissingModality("retrieval requires both the image and text modalities");
    auto norm = [](const torch::Tensor& t) {
        return torch::nn::functional::normalize(t, torch::nn::functional::NormalizeFuncOptions().dim(-1));
    };
    if (mode == RetrievalMode::paired) {
        auto fwd = forward(batch, presence, /*run_decoders=*/false);
        return {norm(fwd.fusion.img_cls), norm(fwd.fusion.txt_cls)};
    }
    auto img_only = forward(batch, Presence{true, false, false}, false);
    auto txt_only = forward(batch, Presence{false, true, false}, false);
    return {norm(img_only.fusion.img_cls), norm(txt_only.fusion.txt_cls)};
}

} // namespace retfuse

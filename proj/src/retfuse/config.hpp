#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace retfuse {

struct VisionConfig {
    int64_t image_side = 224;
    int64_t patch_size = 16;
    int64_t backbone_depth = 12;
    int64_t backbone_hidden = 768;
    int64_t backbone_heads = 8;
    int64_t freeze_depth = 10;
};

struct TextConfig {
    int64_t max_tokens = 128;
    int64_t kept_tokens = 50;
    int64_t backbone_hidden = 768;
    int64_t backbone_depth = 12;
    int64_t backbone_heads = 8;
    int64_t freeze_depth = 10;
};

struct StructuredConfig {
    int64_t input_dim = 6;
    int64_t hidden1 = 128;
    int64_t hidden2 = 128;
    double dropout = 0.1;
};

struct FusionConfig {
    int64_t layers = 6;
    int64_t heads = 8;
    int64_t ffn_mult = 4;
    bool prenorm = true;
    bool positional = false;
};

struct DecoderConfig {
    int64_t image_side = 224;       // matches vision.image_side by default
    int64_t image_base_channels = 16;
    int64_t text_layers = 2;
    int64_t text_heads = 4;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    int64_t batch_size = 8;
    int64_t max_epochs = 50;
    int64_t max_steps = 0; // 0 = no step cap
    int64_t early_stop_patience = 10;
    int64_t scheduler_patience = 5;
    double scheduler_factor = 0.5;
    double improve_threshold = 1e-4; // relative
    uint64_t seed = 42;
    bool use_image = true;
    bool use_text = true;
    bool use_structured = true;
    bool loss_img_txt = true;
    bool loss_img_str = true;
    bool loss_txt_str = true;
    bool loss_rec_img = true;
    bool loss_rec_txt = true;
    bool loss_cls = true;
};

struct RunConfig {
    int64_t model_dim = 256;
    double temperature = 0.07;
    VisionConfig vision;
    TextConfig text;
    StructuredConfig structured;
    FusionConfig fusion;
    DecoderConfig decoder;
    TrainConfig train;
    std::string manifest_path;
    std::string templates_path;
    std::string vocab_path;
    std::string out_dir;

    /// Canonical key=value form (sorted keys, full precision).
    std::map<std::string, std::string> to_kv() const;
    std::string to_text() const;

    /// Unknown keys are rejected; missing keys keep defaults.
    static RunConfig from_kv(const std::map<std::string, std::string>& kv);
    static RunConfig from_text(const std::string& text);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;

    void validate() const; // structural invariants (divisibility etc.)

    /// Keys that must match for a checkpoint to be loadable into a model
    /// built from this config.
    static const std::vector<std::string>& shape_keys();
};

} // namespace retfuse

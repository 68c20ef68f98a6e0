#pragma once

#include <string>
#include <vector>

#include "retfuse/config.hpp"
#include "retfuse/manifest.hpp"
#include "retfuse/model.hpp"
#include "retfuse/notes.hpp"
#include "retfuse/split.hpp"
#include "retfuse/structured.hpp"
#include "retfuse/tokenizer.hpp"

namespace retfuse {

struct PreparedSample {
    SampleRecord record;
    std::string note;
    torch::Tensor image01;      // [3,S,S] resized, [0,1], pre-standardization
    Tokenizer::Encoded text;
    std::array<float, 6> structured{};
};

struct PreparedDataset {
    std::vector<PreparedSample> samples;
    StructuredStats stats;
    std::vector<std::string> label_vocabulary;
};

/// Decodes and resizes images, generates notes, tokenizes, and preprocesses
/// structured fields with the supplied stats (fit them on the training split;
/// zero-shot evaluation reuses the training stats unchanged).
PreparedDataset prepare_dataset(const Manifest& manifest, const TemplateTable& templates,
                                const Tokenizer& tokenizer, const StructuredStats& stats,
                                const RunConfig& cfg, const std::string& image_root);

/// Assembles a batch. When `augment` is true each image is augmented with a
/// child seed derived from (base_seed, sample index), so prefetch order
/// cannot change results. Evaluation paths must pass augment = false.
BatchInput make_batch(const PreparedDataset& dataset, const std::vector<size_t>& indices,
                      bool augment, uint64_t base_seed);

/// Directory of a manifest path, used to resolve relative image paths.
std::string manifest_dir(const std::string& manifest_path);

} // namespace retfuse

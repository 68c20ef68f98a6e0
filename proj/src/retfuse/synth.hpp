#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "retfuse/manifest.hpp"
#include "retfuse/notes.hpp"

namespace retfuse {

/// Desk-scale synthetic dataset: images visually encode their labels (one
/// brightness quadrant per label) and grade (top bar brightness), structured
/// fields correlate with the grade, and notes come from the label templates.
/// Fully seeded; same seed gives byte-identical manifests.
struct SynthOptions {
    int64_t n_patients = 32;
    int64_t exams_per_patient = 1;
    int64_t image_side = 32;
    uint64_t seed = 0;
};

struct SynthResult {
    std::string manifest_path;
    std::string templates_path;
    std::string vocab_path;
};

SynthResult generate_synthetic_dataset(const std::string& out_dir, const SynthOptions& opts);

const std::vector<std::string>& synth_label_vocabulary();
TemplateTable synth_templates();
std::vector<std::string> synth_vocab_tokens();

/// Inverse-generator checks: recover grade and labels from a generated image.
int decode_grade(const torch::Tensor& img01);
std::vector<bool> decode_labels(const torch::Tensor& img01);

/// Deterministic in-memory record+image generation (shared by the file
/// writer and by tests that skip the filesystem).
struct SynthSample {
    SampleRecord record;
    torch::Tensor image01; // [3,S,S]
};
std::vector<SynthSample> generate_synth_samples(const SynthOptions& opts);

} // namespace retfuse

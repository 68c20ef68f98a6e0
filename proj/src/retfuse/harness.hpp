#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retfuse/checkpoint.hpp"
#include "retfuse/dataset.hpp"
#include "retfuse/metrics.hpp"
#include "retfuse/model.hpp"
#include "retfuse/trainer.hpp"

namespace retfuse {

/// Text-to-image retrieval over a whole split: text embeddings query the
/// image-embedding gallery with identity matching. Reports R@K for
/// K in {1,5,10} restricted to K <= gallery size.
RetrievalReport evaluate_retrieval(MultimodalModel& model, const PreparedDataset& split,
                                   RetrievalMode mode, const Presence& presence = Presence{},
                                   bool zero_shot = false);

ClassificationReport evaluate_classification(MultimodalModel& model, const PreparedDataset& split,
                                             const Presence& presence = Presence{});

struct AblationCell {
    std::string name;
    std::optional<RetrievalReport> retrieval; // absent when image or text is off
    std::optional<ClassificationReport> classification;
    bool failed = false;
    std::string error;
};

/// axis "modality": image+text, image+structured, text+structured, all.
/// axis "loss": classification_only, classification_contrastive,
/// classification_reconstruction, full. Every cell is a complete fit +
/// evaluation sharing the base config seed; failures are recorded and the
/// remaining cells continue.
std::vector<AblationCell> run_ablation(const RunConfig& base, const std::string& axis,
                                       const PreparedDataset& train_ds, const PreparedDataset& val_ds,
                                       const PreparedDataset& eval_ds,
                                       const std::vector<std::string>& vocab_tokens);

void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells);
void write_ablation_json(const std::string& path, const std::vector<AblationCell>& cells);

/// Identical pipeline to evaluate_retrieval on an external manifest, reusing
/// the checkpoint's training-split stats and templates (no refitting).
RetrievalReport zero_shot_transfer(const CheckpointData& checkpoint, const std::string& external_manifest,
                                   const TemplateTable& templates, RetrievalMode mode);

/// Everything a training or ablation run needs, derived from the config
/// paths: loaded templates, tokenizer vocabulary (built from the templates
/// when no vocab file is given), and the three prepared splits with
/// training-split statistics.
struct RunInputs {
    PreparedDataset train, val, test;
    std::vector<std::string> vocab;
    TemplateTable templates;
};
RunInputs prepare_run(const RunConfig& cfg);

/// Utility shared by eval paths: batched embedding extraction.
std::pair<torch::Tensor, torch::Tensor> embed_split(MultimodalModel& model, const PreparedDataset& split,
                                                    RetrievalMode mode, const Presence& presence);

} // namespace retfuse

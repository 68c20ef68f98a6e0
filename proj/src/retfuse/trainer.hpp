#pragma once

#include <vector>

#include "retfuse/checkpoint.hpp"
#include "retfuse/config.hpp"
#include "retfuse/dataset.hpp"
#include "retfuse/losses.hpp"
#include "retfuse/model.hpp"

namespace retfuse {

/// Modalities enabled by the config toggles (Presence for forward passes).
Presence enabled_modalities(const TrainConfig& cfg);

/// Loss-term mask implied by the toggles; terms touching a disabled modality
/// are dropped so their alphas leave the softmax entirely.
std::array<bool, 6> enabled_losses(const TrainConfig& cfg);

/// Forward pass plus all enabled loss components and the Eq-style weighted
/// total. Decoders run only when their reconstruction terms are enabled.
LossBreakdown compute_losses(MultimodalModel& model, const BatchInput& batch, const RunConfig& cfg);

/// One optimization step: forward, backward, global-norm clip, AdamW update.
LossBreakdown train_step(MultimodalModel& model, torch::optim::AdamW& optimizer, const BatchInput& batch,
                         const RunConfig& cfg);

struct EpochRecord {
    int64_t epoch = 0;
    double lr = 0;
    std::array<double, 6> components{};
    std::array<double, 6> weights{};
    double train_total = 0;
    double val_total = 0;
};

struct FitResult {
    CheckpointData best;
    std::vector<EpochRecord> history;
    int64_t stopped_epoch = 0;
};

/// Full training loop: seeded shuffling and augmentation, ReduceLROnPlateau
/// (factor/patience from config, relative improvement threshold), early
/// stopping on validation total loss, best-checkpoint retention.
FitResult fit(const RunConfig& cfg, const PreparedDataset& train_ds, const PreparedDataset& val_ds,
              const std::vector<std::string>& vocab_tokens);

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

/// Trainable-parameter list (frozen parameters are never handed to the optimizer).
std::vector<torch::Tensor> trainable_parameters(const MultimodalModel& model);

int64_t parameter_count(const MultimodalModel& model, bool trainable_only);

} // namespace retfuse

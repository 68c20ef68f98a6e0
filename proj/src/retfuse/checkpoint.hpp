#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "retfuse/config.hpp"
#include "retfuse/model.hpp"
#include "retfuse/structured.hpp"

namespace retfuse {

/// Single-file binary container: versioned header, canonical config text,
/// training-split structured stats, tokenizer vocabulary, named parameter
/// blocks (shape + raw little-endian float32), AdamW state blocks, and RNG
/// state blocks. Parameters round-trip bitwise.
struct CheckpointData {
    RunConfig config;
    StructuredStats stats;
    std::vector<std::string> vocab_tokens;
    int64_t epoch = 0;
    double best_val = 0;
    std::map<std::string, torch::Tensor> params;
    struct OptEntry {
        int64_t step = 0;
        torch::Tensor exp_avg;
        torch::Tensor exp_avg_sq;
    };
    std::map<std::string, OptEntry> opt_state;
    std::map<std::string, std::vector<uint8_t>> rng_state;
};

/// Atomic write: temp file in the target directory, then rename.
void save_checkpoint(const std::string& path, const CheckpointData& data);

CheckpointData load_checkpoint(const std::string& path);

/// Collects model parameters plus optimizer and torch RNG state.
CheckpointData snapshot(const MultimodalModel& model, const torch::optim::AdamW* optimizer,
                        int64_t epoch, double best_val, const StructuredStats& stats,
                        const std::vector<std::string>& vocab_tokens);

/// Copies checkpoint parameters into a model built from the same config.
/// Missing names or shape mismatches raise IncompatibleConfig.
void restore_parameters(MultimodalModel& model, const CheckpointData& data);

/// Rebuilds AdamW state for the model's trainable parameters.
void restore_optimizer(torch::optim::AdamW& optimizer, const MultimodalModel& model,
                       const CheckpointData& data);

void restore_rng(const CheckpointData& data);

/// Constructs the model a checkpoint describes and loads its parameters.
MultimodalModel model_from_checkpoint(const CheckpointData& data);

/// Raises IncompatibleConfig if shape-relevant keys differ.
void check_shape_compatible(const RunConfig& a, const RunConfig& b);

} // namespace retfuse

#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace retfuse {

struct RetrievalReport {
    std::string protocol;           // "paired" or "isolated"
    std::string direction = "text_to_image";
    std::map<int, double> recall_at; // K in {1,5,10} -> percentage
    int64_t gallery_size = 0;
    bool zero_shot = false;

    std::string to_json() const;
    static RetrievalReport from_json(const std::string& text);
};

struct ClassificationReport {
    double sdrg_accuracy = 0;
    double icdr_accuracy = 0;
    std::array<std::array<int64_t, 5>, 5> confusion_sdrg{}; // [true][pred]
    std::array<std::array<int64_t, 5>, 5> confusion_icdr{};

    std::string to_json() const;
    static ClassificationReport from_json(const std::string& text);
};

/// Percentage of queries whose matched gallery index ranks in the top k by
/// descending cosine similarity; ties break toward the lower gallery index.
/// Embeddings must be L2-normalized; k > gallery size raises KOutOfRange.
double recall_at_k(const torch::Tensor& query_embs, const torch::Tensor& gallery_embs,
                   const std::vector<int64_t>& matches, int64_t k);

/// Deterministic argmax over the 5 logits, lowest class index on ties.
int64_t argmax5(const torch::Tensor& logits_row);

} // namespace retfuse

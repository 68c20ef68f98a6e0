#pragma once

#include <string>
#include <vector>

#include "retfuse/metrics.hpp"
#include "retfuse/trainer.hpp"

namespace retfuse {

/// Loss-component and weight trajectories over epochs. Verifies that the
/// weight rows sum to 1 (within 1e-6) before drawing.
void plot_history(const std::vector<EpochRecord>& history, const std::string& out_path_losses,
                  const std::string& out_path_weights);

void plot_recall_bars(const RetrievalReport& report, const std::string& out_path);

void plot_confusion(const ClassificationReport& report, const std::string& out_path);

std::vector<EpochRecord> read_history_csv(const std::string& path);

} // namespace retfuse

#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "retfuse/manifest.hpp"

namespace retfuse {

/// Per-field preprocessing statistics, fitted on the TRAINING split only.
/// Continuous fields: age, diabetes_duration. Standard deviation uses the
/// population convention (divide by N); a constant field gets std 1 and a
/// recorded warning.
struct StructuredStats {
    struct Continuous {
        double mean = 0;
        double std = 1;
        double median = 0;
        bool degenerate = false;
    };
    Continuous age;
    Continuous diabetes_duration;
    // Modes for imputation; categorical encoding is fixed by declared order
    // (male=0/female=1, left=0/right=1, false=0/true=1).
    Sex sex_mode = Sex::male;
    Eye exam_eye_mode = Eye::left;
    bool insulin_use_mode = false;
    bool diabetes_diagnosis_mode = false;
    std::vector<std::string> warnings;

    std::map<std::string, std::string> to_kv() const;
    static StructuredStats from_kv(const std::map<std::string, std::string>& kv);
};

StructuredStats fit_structured_stats(const std::vector<SampleRecord>& train_records);

/// Fixed field order: age, sex, exam_eye, diabetes_duration, insulin_use,
/// diabetes_diagnosis. Nulls are imputed (median/mode) before standardization.
std::array<float, 6> preprocess_structured(const SampleRecord& record, const StructuredStats& stats);

} // namespace retfuse

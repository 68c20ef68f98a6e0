#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "retfuse/manifest.hpp"

namespace retfuse {

enum class Split { train, val, test };

struct SplitAssignment {
    std::map<std::string, Split> by_patient;
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    uint64_t seed = 0;

    Split of(const std::string& patient_id) const { return by_patient.at(patient_id); }
};

/// Deterministic patient-level split. Unique patient ids are shuffled by a
/// seeded RNG and partitioned with largest-remainder rounding of the ratios.
SplitAssignment patient_split(const std::vector<SampleRecord>& records,
                              std::array<double, 3> ratios, uint64_t seed);

std::vector<SampleRecord> records_in_split(const std::vector<SampleRecord>& records,
                                           const SplitAssignment& assignment, Split which);

} // namespace retfuse

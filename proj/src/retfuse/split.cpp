#include "retfuse/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "retfuse/errors.hpp"

namespace retfuse {

SplitAssignment patient_split(const std::vector<SampleRecord>& records,
                              std::array<double, 3> ratios, uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::abs(sum - 1.0) > 1e-9)
        throw InvalidRatios("split ratios must be positive and sum to 1");

    // unique patient ids in first-appearance order, then seeded shuffle
    std::vector<std::string> patients;
    for (const auto& r : records)
        if (std::find(patients.begin(), patients.end(), r.patient_id) == patients.end())
            patients.push_back(r.patient_id);

    std::mt19937_64 rng(seed);
    std::shuffle(patients.begin(), patients.end(), rng);

    const size_t n = patients.size();
    std::array<size_t, 3> counts{};
    std::array<double, 3> frac{};
    size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double target = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<size_t>(std::floor(target));
        frac[i] = target - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    // largest-remainder rounding; ties favor the earlier split
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (size_t k = 0; assigned < n; ++k, ++assigned) counts[order[k % 3]]++;

    SplitAssignment a;
    a.ratios = ratios;
    a.seed = seed;
    size_t idx = 0;
    for (int s = 0; s < 3; ++s)
        for (size_t k = 0; k < counts[s]; ++k) a.by_patient[patients[idx++]] = static_cast<Split>(s);
    return a;
}

std::vector<SampleRecord> records_in_split(const std::vector<SampleRecord>& records,
                                           const SplitAssignment& assignment, Split which) {
    std::vector<SampleRecord> out;
    for (const auto& r : records)
        if (assignment.of(r.patient_id) == which) out.push_back(r);
    return out;
}

} // namespace retfuse

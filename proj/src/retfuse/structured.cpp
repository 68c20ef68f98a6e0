#include "retfuse/structured.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "retfuse/errors.hpp"

namespace retfuse {

namespace {

StructuredStats::Continuous fit_continuous(const std::vector<SampleRecord>& records,
                                           const std::function<std::optional<double>(const SampleRecord&)>& get,
                                           const std::string& name,
                                           std::vector<std::string>& warnings) {
    std::vector<double> vals;
    for (const auto& r : records)
        if (auto v = get(r)) vals.push_back(*v);
    StructuredStats::Continuous c;
    if (vals.empty()) {
        c.degenerate = true;
        warnings.push_back("field '" + name + "' has no observed values; using mean 0, std 1");
        return c;
    }
    double sum = 0;
    for (double v : vals) sum += v;
    c.mean = sum / vals.size();
    double ss = 0;
    for (double v : vals) ss += (v - c.mean) * (v - c.mean);
    double var = ss / vals.size(); // population convention
    if (var <= 0) {
        c.std = 1;
        c.degenerate = true;
        warnings.push_back("field '" + name + "' is constant; substituting std 1");
    } else {
        c.std = std::sqrt(var);
    }
    std::sort(vals.begin(), vals.end());
    size_t n = vals.size();
    c.median = n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    return c;
}

template <typename T>
T mode_of(const std::vector<SampleRecord>& records,
          const std::function<std::optional<T>(const SampleRecord&)>& get, T fallback) {
    std::map<T, int> counts;
    for (const auto& r : records)
        if (auto v = get(r)) counts[*v]++;
    T best = fallback;
    int best_n = -1;
    for (const auto& [v, n] : counts)
        if (n > best_n) { best = v; best_n = n; } // ties: lowest enum value (map order)
    return best;
}

} // namespace

StructuredStats fit_structured_stats(const std::vector<SampleRecord>& train_records) {
    if (train_records.empty()) throw EmptySplit("cannot fit structured stats on an empty training split");
    StructuredStats s;
    s.age = fit_continuous(train_records, [](const SampleRecord& r) { return r.age; }, "age", s.warnings);
    s.diabetes_duration = fit_continuous(
        train_records, [](const SampleRecord& r) { return r.diabetes_duration; }, "diabetes_duration", s.warnings);
    s.sex_mode = mode_of<Sex>(train_records, [](const SampleRecord& r) { return r.sex; }, Sex::male);
    s.exam_eye_mode = mode_of<Eye>(train_records, [](const SampleRecord& r) { return r.exam_eye; }, Eye::left);
    s.insulin_use_mode = mode_of<bool>(train_records, [](const SampleRecord& r) { return r.insulin_use; }, false);
    s.diabetes_diagnosis_mode =
        mode_of<bool>(train_records, [](const SampleRecord& r) { return r.diabetes_diagnosis; }, false);
    return s;
}

std::array<float, 6> preprocess_structured(const SampleRecord& record, const StructuredStats& stats) {
    auto standardize = [](std::optional<double> v, const StructuredStats::Continuous& c) {
        double raw = v ? *v : c.median; // impute on the raw scale first
        return static_cast<float>((raw - c.mean) / c.std);
    };
    float age = standardize(record.age, stats.age);
    float sex = (record.sex ? *record.sex : stats.sex_mode) == Sex::female ? 1.f : 0.f;
    float eye = (record.exam_eye ? *record.exam_eye : stats.exam_eye_mode) == Eye::right ? 1.f : 0.f;
    float duration = standardize(record.diabetes_duration, stats.diabetes_duration);
    float insulin = (record.insulin_use ? *record.insulin_use : stats.insulin_use_mode) ? 1.f : 0.f;
    float diagnosis = (record.diabetes_diagnosis ? *record.diabetes_diagnosis : stats.diabetes_diagnosis_mode) ? 1.f : 0.f;
    return {age, sex, eye, duration, insulin, diagnosis};
}

namespace {

std::string dbl(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void put_cont(std::map<std::string, std::string>& kv, const std::string& prefix,
              const StructuredStats::Continuous& c) {
    kv[prefix + ".mean"] = dbl(c.mean);
    kv[prefix + ".std"] = dbl(c.std);
    kv[prefix + ".median"] = dbl(c.median);
    kv[prefix + ".degenerate"] = c.degenerate ? "1" : "0";
}

StructuredStats::Continuous get_cont(const std::map<std::string, std::string>& kv, const std::string& prefix) {
    StructuredStats::Continuous c;
    c.mean = std::stod(kv.at(prefix + ".mean"));
    c.std = std::stod(kv.at(prefix + ".std"));
    c.median = std::stod(kv.at(prefix + ".median"));
    c.degenerate = kv.at(prefix + ".degenerate") == "1";
    return c;
}

} // namespace

std::map<std::string, std::string> StructuredStats::to_kv() const {
    std::map<std::string, std::string> kv;
    put_cont(kv, "stats.age", age);
    put_cont(kv, "stats.diabetes_duration", diabetes_duration);
    kv["stats.sex_mode"] = sex_mode == Sex::female ? "female" : "male";
    kv["stats.exam_eye_mode"] = exam_eye_mode == Eye::right ? "right" : "left";
    kv["stats.insulin_use_mode"] = insulin_use_mode ? "1" : "0";
    kv["stats.diabetes_diagnosis_mode"] = diabetes_diagnosis_mode ? "1" : "0";
    return kv;
}

StructuredStats StructuredStats::from_kv(const std::map<std::string, std::string>& kv) {
    StructuredStats s;
    s.age = get_cont(kv, "stats.age");
    s.diabetes_duration = get_cont(kv, "stats.diabetes_duration");
    s.sex_mode = kv.at("stats.sex_mode") == "female" ? Sex::female : Sex::male;
    s.exam_eye_mode = kv.at("stats.exam_eye_mode") == "right" ? Eye::right : Eye::left;
    s.insulin_use_mode = kv.at("stats.insulin_use_mode") == "1";
    s.diabetes_diagnosis_mode = kv.at("stats.diabetes_diagnosis_mode") == "1";
    return s;
}

} // namespace retfuse

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace retfuse {

enum class Sex { male, female };
enum class Eye { left, right };

/// One patient exam as declared by a manifest row.
struct SampleRecord {
    std::string patient_id;
    std::string image_path;
    std::optional<double> age;
    std::optional<Sex> sex;
    std::optional<Eye> exam_eye;
    std::optional<double> diabetes_duration;
    std::optional<bool> insulin_use;
    std::optional<bool> diabetes_diagnosis;
    std::map<std::string, bool> disease_labels;
    int sdrg_grade = 0;
    int icdr_grade = 0;
};

/// Parsed manifest: records plus the label vocabulary in declared column order.
struct Manifest {
    std::vector<SampleRecord> records;
    std::vector<std::string> label_vocabulary;
};

// Header columns preceding the label:<name> columns, in fixed order.
extern const std::vector<std::string> kManifestFixedColumns;

/// Loads a manifest CSV. Unparseable nullable cells become null; rows
/// missing patient_id, image_path, or either grade (or with grades outside
/// [0,4]) raise SchemaError naming the row and column.
Manifest load_manifest(const std::string& path);

/// Writes a manifest CSV in the canonical column order.
void write_manifest(const std::string& path, const Manifest& manifest);

std::string manifest_cell(const SampleRecord& rec, const std::string& column);

} // namespace retfuse

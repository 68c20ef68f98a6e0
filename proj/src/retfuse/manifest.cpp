#include "retfuse/manifest.hpp"

#include <charconv>
#include <fstream>

#include "retfuse/csv.hpp"
#include "retfuse/errors.hpp"

namespace retfuse {

const std::vector<std::string> kManifestFixedColumns = {
    "patient_id",     "image_path",  "age",
    "sex",            "exam_eye",    "diabetes_duration",
    "insulin_use",    "diabetes_diagnosis",
    "sdrg_grade",     "icdr_grade"};

namespace {

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
    return std::nullopt;
}

std::optional<Sex> parse_sex(const std::string& s) {
    if (s == "male") return Sex::male;
    if (s == "female") return Sex::female;
    return std::nullopt;
}

std::optional<Eye> parse_eye(const std::string& s) {
    if (s == "left") return Eye::left;
    if (s == "right") return Eye::right;
    return std::nullopt;
}

[[noreturn]] void schema_fail(size_t row, const std::string& column, const std::string& why) {
    throw SchemaError("manifest row " + std::to_string(row) + ", column '" + column + "': " + why);
}

int parse_grade(const std::string& s, size_t row, const std::string& column) {
    auto v = parse_double(s);
    if (!v) schema_fail(row, column, "required grade missing or unparseable ('" + s + "')");
    int g = static_cast<int>(*v);
    if (*v != g || g < 0 || g > 4) schema_fail(row, column, "grade must be an integer in [0,4], got '" + s + "'");
    return g;
}

} // namespace

Manifest load_manifest(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw SchemaError("manifest is empty: " + path);

    const auto& header = rows[0];
    if (header.size() < kManifestFixedColumns.size())
        throw SchemaError("manifest header has " + std::to_string(header.size()) + " columns, expected at least " +
                          std::to_string(kManifestFixedColumns.size()));
    for (size_t i = 0; i < kManifestFixedColumns.size(); ++i) {
        if (header[i] != kManifestFixedColumns[i])
            schema_fail(0, header[i], "expected header column '" + kManifestFixedColumns[i] + "'");
    }

    Manifest m;
    for (size_t i = kManifestFixedColumns.size(); i < header.size(); ++i) {
        const std::string& col = header[i];
        if (col.rfind("label:", 0) != 0) schema_fail(0, col, "expected a label:<name> column");
        m.label_vocabulary.push_back(col.substr(6));
    }

    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            schema_fail(r, "*", "row has " + std::to_string(row.size()) + " cells, header has " +
                                    std::to_string(header.size()));
        SampleRecord rec;
        rec.patient_id = row[0];
        if (rec.patient_id.empty()) schema_fail(r, "patient_id", "must be nonempty");
        rec.image_path = row[1];
        if (rec.image_path.empty()) schema_fail(r, "image_path", "must be nonempty");
        rec.age = parse_double(row[2]);
        rec.sex = parse_sex(row[3]);
        rec.exam_eye = parse_eye(row[4]);
        rec.diabetes_duration = parse_double(row[5]);
        rec.insulin_use = parse_bool(row[6]);
        rec.diabetes_diagnosis = parse_bool(row[7]);
        rec.sdrg_grade = parse_grade(row[8], r, "sdrg_grade");
        rec.icdr_grade = parse_grade(row[9], r, "icdr_grade");
        for (size_t i = 0; i < m.label_vocabulary.size(); ++i) {
            const std::string& cell = row[kManifestFixedColumns.size() + i];
            auto b = parse_bool(cell);
            if (!b) schema_fail(r, "label:" + m.label_vocabulary[i], "label cell must be 0 or 1, got '" + cell + "'");
            rec.disease_labels[m.label_vocabulary[i]] = *b;
        }
        m.records.push_back(std::move(rec));
    }
    return m;
}

std::string manifest_cell(const SampleRecord& rec, const std::string& column) {
    auto fmt = [](double v) {
        std::string s = std::to_string(v);
        // trim trailing zeros but keep one decimal digit
        while (s.size() > 1 && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    };
    if (column == "patient_id") return rec.patient_id;
    if (column == "image_path") return rec.image_path;
    if (column == "age") return rec.age ? fmt(*rec.age) : "";
    if (column == "sex") return rec.sex ? (*rec.sex == Sex::male ? "male" : "female") : "";
    if (column == "exam_eye") return rec.exam_eye ? (*rec.exam_eye == Eye::left ? "left" : "right") : "";
    if (column == "diabetes_duration") return rec.diabetes_duration ? fmt(*rec.diabetes_duration) : "";
    if (column == "insulin_use") return rec.insulin_use ? (*rec.insulin_use ? "1" : "0") : "";
    if (column == "diabetes_diagnosis") return rec.diabetes_diagnosis ? (*rec.diabetes_diagnosis ? "1" : "0") : "";
    if (column == "sdrg_grade") return std::to_string(rec.sdrg_grade);
    if (column == "icdr_grade") return std::to_string(rec.icdr_grade);
    throw Error("unknown manifest column: " + column);
}

void write_manifest(const std::string& path, const Manifest& manifest) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    std::vector<std::string> header = kManifestFixedColumns;
    for (const auto& l : manifest.label_vocabulary) header.push_back("label:" + l);
    out << csv::join_row(header) << "\n";
    for (const auto& rec : manifest.records) {
        std::vector<std::string> row;
        for (const auto& c : kManifestFixedColumns) row.push_back(manifest_cell(rec, c));
        for (const auto& l : manifest.label_vocabulary) {
            auto it = rec.disease_labels.find(l);
            row.push_back(it != rec.disease_labels.end() && it->second ? "1" : "0");
        }
        out << csv::join_row(row) << "\n";
    }
    if (!out) throw IoError("failed writing manifest: " + path);
}

} // namespace retfuse

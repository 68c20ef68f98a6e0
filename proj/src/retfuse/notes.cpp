#include "retfuse/notes.hpp"

#include "retfuse/csv.hpp"
#include "retfuse/errors.hpp"

namespace retfuse {

TemplateTable load_templates(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "label" || rows[0][1] != "sentence")
        throw SchemaError("template table must have header 'label,sentence': " + path);
    TemplateTable t;
    for (size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 2)
            throw SchemaError("template table row " + std::to_string(r) + " must have 2 cells");
        t[rows[r][0]] = rows[r][1];
    }
    return t;
}

std::string generate_clinical_note(const std::map<std::string, bool>& disease_labels,
                                   const TemplateTable& templates,
                                   const std::vector<std::string>& label_order) {
    std::string note;
    for (const auto& label : label_order) {
        auto it = disease_labels.find(label);
        if (it == disease_labels.end() || !it->second) continue;
        auto t = templates.find(label);
        if (t == templates.end()) throw UnknownLabel("no template sentence for positive label '" + label + "'");
        if (!note.empty()) note += ' ';
        note += t->second;
    }
    if (note.empty()) note = kNoFindingsSentence;
    return note;
}

} // namespace retfuse

#pragma once

#include <map>
#include <string>
#include <vector>

namespace retfuse {

using TemplateTable = std::map<std::string, std::string>;

// Emitted when no label is marked present; keeps the text encoder input nonempty.
inline constexpr const char* kNoFindingsSentence = "No abnormal findings are present.";

/// Loads a two-column label,sentence CSV (with header).
TemplateTable load_templates(const std::string& path);

/// Concatenates, in label_order, the template sentence for every label marked
/// present, separated by single spaces. All-negative yields the fixed
/// no-findings sentence. Positive labels without a template raise UnknownLabel.
std::string generate_clinical_note(const std::map<std::string, bool>& disease_labels,
                                   const TemplateTable& templates,
                                   const std::vector<std::string>& label_order);

} // namespace retfuse

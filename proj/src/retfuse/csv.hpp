#pragma once

#include <string>
#include <vector>

namespace retfuse::csv {

// Minimal RFC-4180-ish CSV: quoted fields with embedded commas/quotes,
// no embedded newlines (manifests are one record per line).
std::vector<std::string> split_row(const std::string& line);
std::string join_row(const std::vector<std::string>& fields);

// Reads all rows of a file, skipping fully empty lines.
std::vector<std::vector<std::string>> read_file(const std::string& path);

} // namespace retfuse::csv

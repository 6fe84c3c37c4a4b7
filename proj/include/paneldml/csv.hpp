#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace paneldml {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 when absent
    int require_column(const std::string& name, const std::string& file) const;
};

/// Reads a comma-separated file with a header row. Throws SchemaError on
/// ragged rows. Empty cells stay empty strings (missing values).
CsvTable read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Lossless round-trip rendering for doubles ("%.17g").
std::string format_double(double v);

/// Fixed 4-decimal rendering used by the report tables.
std::string format_fixed4(double v);

double parse_double(const std::string& cell, const std::string& context);
long parse_long(const std::string& cell, const std::string& context);

} // namespace paneldml

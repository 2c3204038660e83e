#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetsis/warnsign.hpp"

namespace hetsis {

struct CsvColumn {
  std::string name;
  std::vector<double> values;
};

struct CsvTable {
  std::vector<CsvColumn> columns;

  const CsvColumn& column(const std::string& name) const;
  std::size_t rows() const { return columns.empty() ? 0 : columns.front().values.size(); }
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Writes a header row and one line per row, LF endings, shortest
/// round-trip decimals. All columns must have equal length.
void emit_csv(const std::filesystem::path& path, const std::vector<CsvColumn>& columns);

CsvTable read_csv(const std::filesystem::path& path);

nlohmann::ordered_json fit_to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& value);

std::uint32_t crc32_of(const std::string& bytes);
std::uint32_t crc32_of_file(const std::filesystem::path& path);

}  // namespace hetsis

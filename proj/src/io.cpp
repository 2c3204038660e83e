#include "hetsis/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/crc.hpp>

#include "hetsis/config.hpp"
#include "hetsis/errors.hpp"

namespace hetsis {

const CsvColumn& CsvTable::column(const std::string& name) const {
  for (const auto& c : columns)
    if (c.name == name) return c;
  throw InvalidArgument("csv: no column named '" + name + "'");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw NumericalFailure("format_double: conversion failed");
  return {buf.data(), ptr};
}

void emit_csv(const std::filesystem::path& path, const std::vector<CsvColumn>& columns) {
  for (const auto& c : columns)
    if (c.values.size() != columns.front().values.size())
      throw InvalidArgument("emit_csv: columns differ in length");
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ',';
    out += columns[c].name;
  }
  out += '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().values.size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += format_double(columns[c].values[r]);
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << out;
  if (!file) throw IoError("write failed for " + path.string());
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_number(cell);
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(file, line)) throw InvalidArgument("csv: missing header in " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  CsvTable table;
  for (auto& name : split_commas(line)) table.columns.push_back({name, {}});
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != table.columns.size())
      throw InvalidArgument("csv: row width differs from header in " + path.string());
    for (std::size_t c = 0; c < cells.size(); ++c)
      table.columns[c].values.push_back(parse_cell(cells[c]));
  }
  return table;
}

nlohmann::ordered_json fit_to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["A"] = fit.A;
  // nlohmann writes NaN as null, which is what a degenerate fit should show.
  j["alpha"] = fit.alpha;
  j["t_crit"] = fit.t_crit;
  j["fit_fraction"] = fit.fit_fraction;
  j["rss"] = fit.rss;
  j["n_points"] = fit.n_points;
  return j;
}

FitResult fit_from_json(const nlohmann::json& j) {
  FitResult fit;
  fit.A = j.at("A").get<double>();
  fit.alpha = j.at("alpha").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                      : j.at("alpha").get<double>();
  fit.degenerate = j.at("alpha").is_null();
  fit.t_crit = j.at("t_crit").get<double>();
  fit.fit_fraction = j.at("fit_fraction").get<double>();
  fit.rss = j.at("rss").get<double>();
  fit.n_points = j.at("n_points").get<std::size_t>();
  return fit;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& value) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << value.dump(2) << '\n';
  if (!file) throw IoError("write failed for " + path.string());
}

std::uint32_t crc32_of(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::uint32_t crc32_of_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << file.rdbuf();
  return crc32_of(buffer.str());
}

}  // namespace hetsis

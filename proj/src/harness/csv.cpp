#include "engsf/harness/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "engsf/core/error.hpp"

namespace engsf {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw Error("cannot open '" + path.string() + "' for writing");
  if (header.empty()) throw Error("csv needs at least one column");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::row(std::span<const double> values) {
  if (values.size() != columns_) {
    throw LengthMismatch("csv row has " + std::to_string(values.size()) +
                         " values for " + std::to_string(columns_) + " columns");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ',';
    out_ << format_g17(values[i]);
  }
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<double> values) {
  row(std::span<const double>(values.begin(), values.size()));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error("csv has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error("'" + path.string() + "' is empty");
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream rs(line);
    std::string cell;
    Vec row;
    while (std::getline(rs, cell, ',')) {
      // strtod instead of std::stod: stod throws out_of_range on gradual
      // underflow, but g17 output legitimately contains subnormals.
      const char* begin = cell.c_str();
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin || *end != '\0') {
        throw Error("'" + path.string() + "': non-numeric cell '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) {
      throw LengthMismatch("'" + path.string() + "': ragged row");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace engsf

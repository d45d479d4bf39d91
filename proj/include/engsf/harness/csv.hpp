#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "engsf/core/vec.hpp"

namespace engsf {

// Shortest round-trip-exact decimal form (17 significant digits).
std::string format_g17(double v);

// Comma-separated numeric table with one header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::string>& header);
  void row(std::span<const double> values);
  void row(std::initializer_list<double> values);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<Vec> rows;

  // Column index by header name; throws Error when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace engsf

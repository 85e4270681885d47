#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace flucast {

// Minimal strict CSV: comma-separated, no quoting, one header row.
// Row/line numbers are kept for error messages.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row
  std::string path;

  int column(const std::string& name) const;           // -1 when absent
  int require_column(const std::string& name) const;   // SchemaError when absent
};

CsvTable read_csv(const std::filesystem::path& path);

// Field parsers carrying file/line context into SchemaError messages.
long long parse_int_field(const CsvTable& t, std::size_t row, int col);
double parse_double_field(const CsvTable& t, std::size_t row, int col);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  ~CsvWriter();

  void write_row(const std::vector<std::string>& fields);

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace flucast

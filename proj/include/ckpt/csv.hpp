#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ckpt {

using CsvRow = std::vector<std::string>;

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;

  // Column index by name; throws CsvError when absent.
  std::size_t column(std::string_view name) const;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quotes a field only when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);
std::string csv_line(const CsvRow& row);

// LF line endings; a trailing CR is tolerated on read.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::string_view text);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const CsvRow& header, bool append = false);
  void write(const CsvRow& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace ckpt

#include "ckpt/csv.hpp"

#include <filesystem>
#include <sstream>

namespace ckpt {

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw CsvError("missing column: " + std::string(name));
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_line(const CsvRow& row) {
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line.push_back(',');
    line += csv_escape(row[i]);
  }
  line.push_back('\n');
  return line;
}

CsvTable parse_csv(std::string_view text) {
  std::vector<CsvRow> records;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"': quoted = true; any = true; break;
      case ',': row.push_back(std::move(field)); field.clear(); any = true; break;
      case '\r': break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          records.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default: field.push_back(c); any = true;
    }
  }
  if (quoted) throw CsvError("unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }
  CsvTable table;
  if (records.empty()) return table;
  table.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size()) {
      throw CsvError("row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                     " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[i]));
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

CsvWriter::CsvWriter(const std::string& path, const CsvRow& header, bool append) : path_(path) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out_) throw CsvError("cannot write " + path);
  if (fresh) {
    out_ << csv_line(header);
    out_.flush();
  }
}

void CsvWriter::write(const CsvRow& row) {
  out_ << csv_line(row);
  out_.flush();
  if (!out_) throw CsvError("write failed: " + path_);
}

}  // namespace ckpt

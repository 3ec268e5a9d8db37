#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mvfilter {

/// 17 significant digits so every double round-trips exactly.
std::string format_number(double value);

/// Minimal CSV writer: a header row, then numeric or text rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(std::span<const double> values);
  void row(std::initializer_list<double> values) {
    row(std::span<const double>(values.begin(), values.size()));
  }
  void text_row(const std::vector<std::string>& cells);
  /// A '#'-prefixed trailing metadata line: "# key=value".
  void comment(const std::string& key, double value);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;
};

/// Reads a comma-separated file; lines starting with '#' go to `comments`.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace mvfilter

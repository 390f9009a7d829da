#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace nlpn {

/// Provenance stamped on every output file.
struct Provenance {
  std::string version;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> extra;

  std::vector<std::string> lines() const;
};

/// Comma-separated table writer: '#' header lines, a column row, then rows.
/// Doubles are written with 10 significant digits so output is
/// byte-reproducible.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& comments,
            const std::vector<std::string>& columns);

  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  void end_row();

 private:
  std::ofstream os_;
  std::size_t n_cols_ = 0;
  std::size_t col_ = 0;
};

std::string format_double(double v);

/// Minimal reader for the files written above: comments skipped, first
/// non-comment line is the header.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  static CsvTable read(const std::filesystem::path& path);
  int column(const std::string& name) const;
};

}  // namespace nlpn

#pragma once

#include <string>
#include <vector>

namespace cjm {

/// A fully parsed delimited file: one header row plus data rows of equal width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a named column, or throws DataError naming the column and file.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  std::string source;  // path, kept for error messages
};

CsvTable read_csv(const std::string& path);

/// Parse a decimal field; throws DataError citing file/row/column on junk.
double parse_double(const CsvTable& table, std::size_t row, std::size_t col);

/// Round-trip-safe float formatting ("%.17g"); used by every writer so that
/// reruns with identical seeds produce byte-identical files.
std::string format_double(double value);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace cjm

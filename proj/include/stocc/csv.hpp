#pragma once

// Minimal CSV support for the artifact's own file formats: comma separated,
// header row, optional double-quoted fields without embedded newlines.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stocc::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Column position; throws DataError if absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

std::vector<std::string> split_line(std::string_view line);

/// Throws DataError when the file cannot be opened or a row is ragged.
Table read(const std::filesystem::path& path);
Table parse(std::istream& in);

/// Shortest round-trip representation of a double ("%.17g" trimmed).
std::string format(double v);

double parse_double(std::string_view field, std::string_view what);
long long parse_int(std::string_view field, std::string_view what);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void row(const std::vector<std::string>& fields);
  std::ostream& stream();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stocc::csv

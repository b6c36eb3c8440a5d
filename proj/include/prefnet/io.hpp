#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace prefnet::io {

inline constexpr int kSchemaVersion = 1;

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv(std::string_view line);
std::string csv_escape(std::string_view field);

/// Shortest round-trip decimal representation; identical bytes on every run.
std::string format_double(double value);
/// Empty string for an absent value.
std::string format_optional(const std::optional<double>& value);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Accumulates a CSV document. The first line is a comment carrying the schema
/// version, followed by the header row.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  CsvWriter& row(const std::vector<std::string>& fields);
  const std::string& str() const { return buffer_; }
  void save(const std::filesystem::path& path) const { write_file(path, buffer_); }

 private:
  std::string buffer_;
  std::size_t width_;
};

}  // namespace prefnet::io

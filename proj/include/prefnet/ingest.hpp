#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "prefnet/model.hpp"

namespace prefnet {

enum class InputFormat { json_lines, csv };
InputFormat parse_input_format(std::string_view text);

struct LoadOptions {
  int reference_year = 2016;
  TagSchema schema = TagSchema::standard();
};

struct LoadReport {
  std::size_t records = 0;
  /// Tracks seen with differing release years; the first value wins.
  std::size_t release_year_conflicts = 0;
  /// Owners seen with differing demographics; the first record wins.
  std::size_t owner_conflicts = 0;
  std::vector<std::string> conflict_log;  // capped at 100 entries
};

/// Parses a playlist export. JSON-lines records are parsed in parallel and
/// merged in line order. Errors name the 1-based line number, or the user_id
/// for a duplicate favorite playlist.
Dataset load_playlists(const std::filesystem::path& path, InputFormat format,
                       const LoadOptions& options = {}, LoadReport* report = nullptr);
Dataset parse_playlists_jsonl(const std::vector<std::string>& lines, const LoadOptions& options = {},
                              LoadReport* report = nullptr);
Dataset parse_playlists_csv(const std::vector<std::string>& lines, const LoadOptions& options = {},
                            LoadReport* report = nullptr);

/// Canonical writers: one record per playlist (JSON-lines) or per
/// playlist-track incidence (CSV), in dataset order.
std::string write_playlists_jsonl(const Dataset& dataset);
std::string write_playlists_csv(const Dataset& dataset);

enum class RegionLevel { province, city };
std::string_view to_string(RegionLevel level);

struct EconomicRow {
  std::string region_code;
  RegionLevel level = RegionLevel::province;
  std::string indicator;
  double value = 0.0;
  std::string unit;
};

class EconomicTable {
 public:
  EconomicTable() = default;
  /// Throws ValidationError on a duplicate (level, region, indicator) key or a
  /// negative income/GDP value.
  explicit EconomicTable(std::vector<EconomicRow> rows);

  const std::vector<EconomicRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  std::optional<double> value(RegionLevel level, std::string_view region,
                              std::string_view indicator) const;
  /// region -> value for one indicator at one level.
  std::map<std::string, double> indicator(RegionLevel level, std::string_view name) const;

 private:
  std::vector<EconomicRow> rows_;
};

/// CSV with header exactly `region_code,level,indicator,value`.
EconomicTable load_economics(const std::filesystem::path& path);
EconomicTable parse_economics(const std::vector<std::string>& lines);
std::string write_economics(const EconomicTable& table);

/// Drops users whose province or city is listed, together with their playlists.
Dataset region_filter(const Dataset& dataset, const std::set<std::string>& excluded_regions);

}  // namespace prefnet

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefnet/analysis.hpp"
#include "prefnet/fit.hpp"
#include "prefnet/ingest.hpp"
#include "prefnet/model.hpp"
#include "prefnet/temporal.hpp"

namespace prefnet {

/// Stage names, in execution order.
inline const std::vector<std::string> kStages = {"ingest",     "graph",    "tagmap", "communities",
                                                 "diversity",  "divergence", "temporal", "fit",
                                                 "agemode",    "regional"};

enum class TagLevel { track, user, group };
TagLevel parse_tag_level(std::string_view text);

struct PipelineConfig {
  std::filesystem::path input;
  InputFormat format = InputFormat::json_lines;
  std::optional<std::filesystem::path> economics;
  std::set<std::string> exclude_regions;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  int reference_year = 2016;
  bool age_filter = true;
  DemographicFilter demographics;

  double min_gain = 1e-7;
  std::size_t top_k = 8;
  int bins_per_decade = 10;
  TagLevel tag_level = TagLevel::group;
  GenderFilter gender = GenderFilter::all;
  PopularityBand band = PopularityBand::all;
  AgeModeOptions age_mode;
  RegionalOptions regional;

  /// Stages whose outputs are written; their dependencies run silently.
  /// Empty means every stage (regional only when economics is given).
  std::set<std::string> targets;
  /// Write report.json.
  bool report = true;
};

/// Carries the failing stage; `validation` is set when the cause was bad input.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause, bool validation)
      : std::runtime_error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)),
        validation_(validation) {}
  const std::string& stage() const { return stage_; }
  bool validation() const { return validation_; }

 private:
  std::string stage_;
  bool validation_;
};

struct StageStatus {
  std::string name;
  std::string status;  // complete, failed, not_run
  std::string error;
};

struct PipelineResult {
  std::vector<StageStatus> stages;
  std::vector<std::string> files;  // relative to out, sorted
};

/// Runs the requested stages in dependency order and writes their outputs,
/// report.json and manifest.json under config.out. The manifest is written
/// even when a stage fails; the StageError is then rethrown.
PipelineResult run_pipeline(const PipelineConfig& config);

struct FitFromPointsOptions {
  std::filesystem::path points;  // CSV with x,y columns
  std::filesystem::path out;
};

/// `fit decay|bigaussian` on a CSV of points instead of pipeline output.
void fit_points_file(const std::string& model, const FitFromPointsOptions& options);

std::vector<CurvePoint> read_points_csv(const std::filesystem::path& path);

/// FNV-1a 64-bit hash, used for the manifest file digests.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace prefnet

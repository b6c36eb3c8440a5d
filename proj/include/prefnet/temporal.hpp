#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "prefnet/graph.hpp"
#include "prefnet/model.hpp"

namespace prefnet {

enum class GenderFilter { all, male, female };
enum class PopularityBand { all, hot, middle, unpopular };

GenderFilter parse_gender_filter(std::string_view text);
PopularityBand parse_popularity_band(std::string_view text);
bool gender_matches(GenderFilter filter, Gender g);

/// Release-year x birth-year attention map. Rows are release years, columns
/// are birth cohorts; both axes are dense integer ranges. Each user spreads one
/// unit of attention evenly over the dated tracks of its FP, so every
/// populated column is a distribution over release years.
struct AttentionMatrix {
  std::vector<int> release_years;
  std::vector<int> birth_years;
  /// Row-major: values[i * birth_years.size() + j].
  std::vector<double> values;
  /// n_j; a zero-sized cohort is an absent column.
  std::vector<std::size_t> cohort_sizes;
  std::size_t users_without_birth_year = 0;
  std::size_t users_without_dated_tracks = 0;

  double at(std::size_t i, std::size_t j) const { return values[i * birth_years.size() + j]; }
  std::vector<double> column(std::size_t j) const;
};

AttentionMatrix attention_matrix(const Dataset& dataset, const BipartiteGraph& graph,
                                 GenderFilter gender = GenderFilter::all);

/// A^G per release year: the mean over users of their release-year
/// distributions, aligned with the dataset's dense release-year axis.
struct GlobalAttention {
  std::vector<int> release_years;
  std::vector<double> share;
  std::size_t users = 0;
};

/// `known_birth_only` restricts the average to users with a birth year (the
/// population of the attention matrix).
GlobalAttention global_attention(const Dataset& dataset, const BipartiteGraph& graph,
                                 GenderFilter gender = GenderFilter::all, bool known_birth_only = false);

/// Dense release-year axis over every dated track of the dataset.
std::vector<int> release_year_axis(const Dataset& dataset);

struct DecayPoint {
  int release_year = 0;
  int years_since_release = 0;  // x
  double preference = 0.0;      // I^G
  double attention_share = 0.0; // A^G_i
  double track_share = 0.0;     // rho_i
  std::size_t tracks = 0;       // m_i
};

struct DecayCurve {
  std::vector<DecayPoint> points;
  std::size_t dated_tracks = 0;  // M
  double undated_fraction = 0.0;
};

struct DecayOptions {
  GenderFilter gender = GenderFilter::all;
  PopularityBand band = PopularityBand::all;
};

/// I^G_i = A^G_i / rho_i with rho_i = m_i / M. Years with rho_i = 0 are
/// omitted. With a popularity band, only tracks in that band (top 5%, 5-25%,
/// rest by attention rank within their release year) count in both A^G and rho.
DecayCurve mean_global_preference(const Dataset& dataset, const BipartiteGraph& graph,
                                  const DecayOptions& options = {});

/// Popularity band of every dataset track (index-aligned with dataset.tracks()).
std::vector<PopularityBand> popularity_bands(const Dataset& dataset, const BipartiteGraph& graph);

/// R_ij = A^Y_ij / A^G_i; absent where A^G_i = 0 or the cohort is empty.
struct RelativeAttention {
  std::vector<int> release_years;
  std::vector<int> birth_years;
  std::vector<std::optional<double>> values;

  const std::optional<double>& at(std::size_t i, std::size_t j) const {
    return values[i * birth_years.size() + j];
  }
};

RelativeAttention relative_attention(const AttentionMatrix& cohort, const GlobalAttention& global);

struct SensitivityPoint {
  int age_at_release = 0;  // release year - birth year; negative before birth
  double sensitivity = 0.0;
};

/// S_j(i - j) = R_ij / mean_k R_kj over release years with defined R. Absent
/// for an empty column.
std::optional<std::vector<SensitivityPoint>> sensitivity(const RelativeAttention& relative, int birth_year);

struct AgeSensitivity {
  int age_at_release = 0;
  double mean = 0.0;
  std::size_t cohorts = 0;
};

/// Mean sensitivity over cohorts for each age at release.
std::vector<AgeSensitivity> mean_sensitivity_by_age(const RelativeAttention& relative);

struct CohortQuantiles {
  int birth_year = 0;
  int q25 = 0;
  int median = 0;
  int q75 = 0;
};

/// Quartiles of each populated column's release-year distribution.
std::vector<CohortQuantiles> release_year_quantiles(const AttentionMatrix& matrix);

}  // namespace prefnet

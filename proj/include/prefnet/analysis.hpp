#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefnet/community.hpp"
#include "prefnet/fit.hpp"
#include "prefnet/graph.hpp"
#include "prefnet/ingest.hpp"
#include "prefnet/metrics.hpp"
#include "prefnet/model.hpp"

namespace prefnet {

/// Dataset users that are graph nodes (non-empty FP), in dataset order.
std::vector<UserIndex> graph_members(const Dataset& dataset, const BipartiteGraph& graph);

/// Members grouped by age (reference year minus birth year) within [min_age, max_age].
std::map<int, std::vector<UserIndex>> members_by_age(const Dataset& dataset, std::span<const UserIndex> members,
                                                     int min_age, int max_age);

std::vector<UserIndex> filter_gender(const Dataset& dataset, std::span<const UserIndex> members, Gender g);

struct AgeDivergence {
  int age = 0;
  std::size_t males = 0;
  std::size_t females = 0;
  /// Per tag class.
  std::vector<Divergence> tag_kld;
  std::vector<std::optional<double>> tag_jsd;
  Divergence community_kld;
  std::optional<double> community_jsd;
};

/// Male/female divergences within each age group.
std::vector<AgeDivergence> gender_divergence_by_age(const Dataset& dataset, std::span<const UserIndex> members,
                                                    std::span<const TagVectorSet> user_tags,
                                                    std::span<const CommunityCounts> counts,
                                                    std::size_t community_count, int min_age = 12,
                                                    int max_age = 40);

struct AgeModeRow {
  std::size_t tag_class = 0;
  std::size_t tag = 0;
  std::vector<std::optional<double>> stage_means;
  std::optional<std::string> mode;
};

/// Age mode of every tag: the group vector of each age is computed, then the
/// per-age strengths are averaged within each stage.
std::vector<AgeModeRow> age_mode_table(const Dataset& dataset, std::span<const UserIndex> members,
                                       std::span<const TagVectorSet> user_tags, const AgeModeOptions& options = {});

struct RegionalOptions {
  RegionLevel level = RegionLevel::province;
  std::string indicator = "income";
  std::size_t min_users = 10;
};

struct RegionRow {
  std::string region;
  std::size_t users = 0;
  double indicator = 0.0;
  TagVectorSet tags;
  std::vector<GroupDiversity> tag_diversity;  // per class
  GroupDiversity community_diversity;
  std::vector<Divergence> gender_kld;  // per class
};

struct TagCorrelation {
  std::size_t tag_class = 0;
  std::size_t tag = 0;
  Correlation correlation;
};

struct MetricCorrelation {
  /// e.g. "tag_diversity_individual", "community_diversity_within", "gender_kld"
  std::string metric;
  std::optional<std::size_t> tag_class;
  Correlation correlation;
};

struct GenderCorrelationSummary {
  Gender gender = Gender::unknown;
  std::size_t tag_class = 0;
  std::optional<double> mean_positive;
  std::optional<double> mean_negative;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

struct RegionalAnalysis {
  RegionLevel level = RegionLevel::province;
  std::string indicator;
  std::vector<RegionRow> regions;
  /// Per class, tags ranked by descending r (absent r last, then by tag index).
  std::vector<std::vector<TagCorrelation>> ranked_tags;
  std::vector<MetricCorrelation> metrics;
  std::vector<GenderCorrelationSummary> gender_summary;
  std::size_t users_without_region = 0;
  std::size_t regions_too_small = 0;
  std::size_t regions_without_indicator = 0;
};

/// Groups members by region, computes per-region tag strengths, diversities
/// and gender KLD, and correlates each against one economic indicator.
RegionalAnalysis regional_analysis(const Dataset& dataset, std::span<const UserIndex> members,
                                   const EconomicTable& economics, std::span<const TagVectorSet> user_tags,
                                   std::span<const CommunityCounts> counts, std::size_t community_count,
                                   const RegionalOptions& options = {});

}  // namespace prefnet

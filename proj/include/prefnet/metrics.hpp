#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prefnet/community.hpp"
#include "prefnet/graph.hpp"
#include "prefnet/model.hpp"

namespace prefnet {

/// -sum p log p / log(categories) over strictly positive entries (natural log;
/// the ratio does not depend on the base). Absent for an all-zero vector.
/// Throws ValidationError when categories < 2.
std::optional<double> normalized_entropy(std::span<const double> distribution, std::size_t categories);

/// Individual tag diversity of one user's class vector.
inline std::optional<double> individual_tag_diversity(std::span<const double> v, std::size_t m) {
  return normalized_entropy(v, m);
}
/// Aggregated tag diversity of a group's class vector.
inline std::optional<double> aggregated_tag_diversity(std::span<const double> g, std::size_t m) {
  return normalized_entropy(g, m);
}

/// Mean individual, aggregated and within-group (aggregated minus mean
/// individual) diversity of a group. Members whose individual value is absent
/// are left out of the mean and counted in `excluded`.
struct GroupDiversity {
  std::optional<double> mean_individual;
  std::optional<double> aggregated;
  std::optional<double> within;
  std::size_t members = 0;
  std::size_t excluded = 0;
};

GroupDiversity tag_diversity(std::span<const TagVectorSet> user_tags, std::span<const UserIndex> members,
                             std::size_t tag_class);

std::optional<double> within_group_tag_diversity(std::span<const TagVectorSet> user_tags,
                                                 std::span<const UserIndex> members, std::size_t tag_class);

/// Sparse per-user community histogram of FP tracks: (label, track count),
/// sorted by label.
using CommunityCounts = std::vector<std::pair<CommunityLabel, std::uint32_t>>;

/// Indexed by dataset user index; users that are not graph nodes get an
/// empty histogram.
std::vector<CommunityCounts> user_community_counts(const Dataset& dataset, const BipartiteGraph& graph,
                                                   const CommunityAssignment& assignment);

/// Entropy of the user's FP community proportions normalized by log M_c.
/// Absent for an empty FP; throws ValidationError when M_c < 2.
std::optional<double> individual_community_diversity(const CommunityCounts& counts,
                                                     std::size_t community_count);

/// q_j = sum_k l_kj / sum_k L_k over the members, as a dense vector of length M_c.
std::vector<double> group_community_distribution(std::span<const CommunityCounts> counts,
                                                 std::span<const UserIndex> members,
                                                 std::size_t community_count);

std::optional<double> aggregated_community_diversity(std::span<const CommunityCounts> counts,
                                                     std::span<const UserIndex> members,
                                                     std::size_t community_count);

GroupDiversity community_diversity(std::span<const CommunityCounts> counts,
                                   std::span<const UserIndex> members, std::size_t community_count);

std::optional<double> within_group_community_diversity(std::span<const CommunityCounts> counts,
                                                       std::span<const UserIndex> members,
                                                       std::size_t community_count);

struct Divergence {
  /// Absent when P and Q share no support (or a subgroup is empty).
  std::optional<double> value;
  /// Probability mass of P (resp. Q) outside the common support.
  double dropped_p = 0.0;
  double dropped_q = 0.0;
};

/// 0.5 * [KL(P||Q) + KL(Q||P)], natural log, summed only where P(i) > 0 and
/// Q(i) > 0.
Divergence symmetrized_kld(std::span<const double> p, std::span<const double> q);

/// 0.5 KL(P||M) + 0.5 KL(Q||M) with M = (P + Q) / 2; lies in [0, ln 2].
double jensen_shannon(std::span<const double> p, std::span<const double> q);

/// Symmetrized KLD between the two subgroups' class vectors.
Divergence tag_kld(std::span<const TagVectorSet> user_tags, std::span<const UserIndex> group_a,
                   std::span<const UserIndex> group_b, std::size_t tag_class);

/// Symmetrized KLD between the two subgroups' community distributions q_j.
Divergence community_kld(std::span<const CommunityCounts> counts, std::span<const UserIndex> group_a,
                         std::span<const UserIndex> group_b, std::size_t community_count);

std::optional<double> tag_jsd(std::span<const TagVectorSet> user_tags, std::span<const UserIndex> group_a,
                              std::span<const UserIndex> group_b, std::size_t tag_class);
std::optional<double> community_jsd(std::span<const CommunityCounts> counts,
                                    std::span<const UserIndex> group_a,
                                    std::span<const UserIndex> group_b, std::size_t community_count);

}  // namespace prefnet

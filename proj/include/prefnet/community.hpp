#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "prefnet/graph.hpp"
#include "prefnet/model.hpp"

namespace prefnet {

using CommunityLabel = std::uint32_t;

struct WeightedEdge {
  NodeIndex a = 0;
  NodeIndex b = 0;
  double weight = 0.0;
};

/// Undirected weighted graph in CSR form, viewed as a symmetric adjacency
/// matrix A. A self loop stores A_vv once; degree(v) = sum_j A_vj.
class WeightedGraph {
 public:
  WeightedGraph() = default;
  /// Parallel edges are merged by summing weights. Self loops and
  /// non-positive weights are rejected.
  WeightedGraph(std::size_t node_count, std::span<const WeightedEdge> edges);

  std::size_t node_count() const { return offsets_.size() - 1; }
  std::span<const NodeIndex> neighbors(NodeIndex v) const {
    return {targets_.data() + offsets_[v], targets_.data() + offsets_[v + 1]};
  }
  std::span<const double> weights(NodeIndex v) const {
    return {weights_.data() + offsets_[v], weights_.data() + offsets_[v + 1]};
  }
  double degree(NodeIndex v) const { return degree_[v]; }
  /// Sum of all degrees (2m).
  double total_weight() const { return total_weight_; }

  /// Users become nodes [0, U), tracks become nodes [U, U + T).
  static WeightedGraph from_bipartite(const BipartiteGraph& graph);
  /// Collapses each community into one node; A'_CD = sum of A_ij over i in C,
  /// j in D. Labels must be dense in [0, communities).
  static WeightedGraph aggregate(const WeightedGraph& graph, std::span<const CommunityLabel> labels,
                                 std::size_t communities);

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeIndex> targets_;
  std::vector<double> weights_;
  std::vector<double> degree_;
  double total_weight_ = 0.0;
};

/// Newman-Girvan modularity Q = sum_c [in_c / 2m - (tot_c / 2m)^2]; 0 when the
/// graph has no edges.
double modularity(const WeightedGraph& graph, std::span<const CommunityLabel> labels);

struct LouvainOptions {
  std::uint64_t seed = 0;
  double min_modularity_gain = 1e-7;
};

struct LouvainResult {
  std::vector<CommunityLabel> labels;  // dense, first-appearance order
  std::size_t community_count = 0;
  /// Modularity tracked by the optimizer on its final level.
  double modularity = 0.0;
  /// Modularity after each aggregation level (non-decreasing).
  std::vector<double> level_modularity;
};

/// Fast-unfolding modularity maximization: local moves in a seeded shuffled
/// order (gain ties go to the lowest community label) followed by aggregation,
/// repeated until a level gains no more than min_modularity_gain.
LouvainResult louvain(const WeightedGraph& graph, const LouvainOptions& options = {});

struct CommunityAssignment {
  /// Labels are renumbered by descending user count (ties: descending track
  /// count, then lowest member node).
  std::vector<CommunityLabel> user_community;
  std::vector<CommunityLabel> track_community;
  std::size_t community_count = 0;
  double modularity = 0.0;
  std::vector<std::size_t> user_counts;
  std::vector<std::size_t> track_counts;
  /// Communities lacking a user or a track.
  std::vector<std::string> warnings;
};

CommunityAssignment detect_communities(const BipartiteGraph& graph, const LouvainOptions& options = {});

/// Modularity of a bipartite assignment, treating both sides as ordinary nodes.
double modularity(const BipartiteGraph& graph, const CommunityAssignment& assignment);

struct CommunityRanking {
  /// (label, count), descending count, ties by ascending label.
  std::vector<std::pair<CommunityLabel, std::size_t>> by_tracks;
  std::vector<std::pair<CommunityLabel, std::size_t>> by_users;
};

CommunityRanking rank_communities(const CommunityAssignment& assignment);

struct Coverage {
  double users = 0.0;
  double tracks = 0.0;
};

/// Fraction of users and tracks inside the k largest communities (by label order).
Coverage top_k_coverage(const CommunityAssignment& assignment, std::size_t k);

struct CommunityProfile {
  CommunityLabel label = 0;
  TagVectorSet tags;
  /// Per class: indices of the strongest and second strongest tags (ties by
  /// schema order); absent when the strength is zero.
  std::vector<std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> primary_tags;
  std::optional<double> mean_age;
  std::optional<double> female_proportion;
  double track_share = 0.0;  // rho^T
  double user_share = 0.0;   // rho^U
  std::size_t users = 0;
  std::size_t tracks = 0;
};

/// Top two tag indices of a vector (ties by index order, zeros skipped).
std::pair<std::optional<std::size_t>, std::optional<std::size_t>> primary_tags(
    std::span<const double> strengths);

std::vector<CommunityProfile> profile_communities(const CommunityAssignment& assignment,
                                                  const Dataset& dataset, const BipartiteGraph& graph,
                                                  std::span<const TagVectorSet> user_tags);

/// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

}  // namespace prefnet

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefnet/model.hpp"

namespace prefnet {

using NodeIndex = std::uint32_t;

/// Weighted user-track network built from favorite playlists. Each user links
/// to every distinct track of its FP with weight 1/L (L = distinct FP length).
///
/// Nodes are stored in canonical order (users by user_id, tracks by track_id)
/// so the graph does not depend on the order playlists were read in. Both
/// sides are kept in CSR form; adjacency lists are sorted.
class BipartiteGraph {
 public:
  std::size_t user_count() const { return user_ids_.size(); }
  std::size_t track_count() const { return track_ids_.size(); }
  std::size_t edge_count() const { return user_adj_.size(); }
  /// Users owning a favorite playlist with no tracks; they are not nodes.
  std::size_t skipped_users() const { return skipped_users_; }

  UserIndex dataset_user(NodeIndex u) const { return user_ids_[u]; }
  TrackIndex dataset_track(NodeIndex t) const { return track_ids_[t]; }
  std::optional<NodeIndex> user_node(UserIndex user) const;
  std::optional<NodeIndex> track_node(TrackIndex track) const;

  std::span<const NodeIndex> user_tracks(NodeIndex u) const {
    return {user_adj_.data() + user_offsets_[u], user_adj_.data() + user_offsets_[u + 1]};
  }
  std::span<const NodeIndex> track_users(NodeIndex t) const {
    return {track_adj_.data() + track_offsets_[t], track_adj_.data() + track_offsets_[t + 1]};
  }
  std::size_t fp_length(NodeIndex u) const { return user_offsets_[u + 1] - user_offsets_[u]; }
  std::size_t followers(NodeIndex t) const { return track_offsets_[t + 1] - track_offsets_[t]; }
  /// Weight of every edge incident to user u, 1/L_u.
  double edge_weight(NodeIndex u) const { return 1.0 / static_cast<double>(fp_length(u)); }

  friend BipartiteGraph build_graph(const Dataset& dataset);

 private:
  std::vector<UserIndex> user_ids_;
  std::vector<TrackIndex> track_ids_;
  std::vector<std::int64_t> user_node_of_;   // dataset user -> node or -1
  std::vector<std::int64_t> track_node_of_;  // dataset track -> node or -1
  std::vector<std::size_t> user_offsets_{0};
  std::vector<NodeIndex> user_adj_;
  std::vector<std::size_t> track_offsets_{0};
  std::vector<NodeIndex> track_adj_;
  std::size_t skipped_users_ = 0;
};

/// Throws ValidationError when the dataset has no favorite playlist at all.
BipartiteGraph build_graph(const Dataset& dataset);

/// Total attention per track node: the sum of 1/L over its followers.
struct AttentionTable {
  std::vector<std::string> track_ids;  // sorted, aligned with track nodes
  std::vector<double> attention;

  /// Attention of a track by id; 0 for tracks nobody follows.
  double of(std::string_view track_id) const;
  double total() const;
};

AttentionTable total_attention(const Dataset& dataset, const BipartiteGraph& graph);
/// Per-node attention vector (parallel gather over the track-side CSR).
std::vector<double> attention_by_node(const BipartiteGraph& graph);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  /// count / (total count * bin width)
  double density = 0.0;
};

using Histogram = std::vector<HistogramBin>;

/// One bin [k, k+1) per observed integer value.
Histogram integer_histogram(std::span<const std::size_t> values);
/// Logarithmic bins with edges 10^(k / bins_per_decade); non-positive values
/// are skipped. Empty interior bins are kept.
Histogram log_histogram(std::span<const double> values, int bins_per_decade = 10);
/// Least-squares slope of log10(density) against log10(bin geometric centre)
/// over non-empty bins.
std::optional<double> log_log_slope(const Histogram& histogram);

struct DegreeDistributions {
  Histogram fp_length;
  Histogram followers;
  Histogram attention;
};

DegreeDistributions degree_distributions(const BipartiteGraph& graph, int bins_per_decade = 10);

}  // namespace prefnet

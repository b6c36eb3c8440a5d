#pragma once

#include <span>
#include <vector>

#include "prefnet/community.hpp"
#include "prefnet/graph.hpp"
#include "prefnet/metrics.hpp"
#include "prefnet/model.hpp"
#include "prefnet/tagmap.hpp"
#include "prefnet/temporal.hpp"

/// Single-threaded reference versions of the parallel kernels. They walk the
/// data in the most direct way (scatter loops, dataset order) and exist to
/// cross-check the parallel code and as a benchmark baseline.
namespace prefnet::serial {

/// Scatter of 1/L from every user onto its tracks, per track node.
std::vector<double> attention_by_node(const BipartiteGraph& graph);

double modularity(const WeightedGraph& graph, std::span<const CommunityLabel> labels);

/// Reads favorite playlists straight from the dataset.
std::vector<TagVectorSet> map_tags_to_users(const Dataset& dataset, const TrackTags& track_tags);

/// Built from the dataset without the graph.
AttentionMatrix attention_matrix(const Dataset& dataset, GenderFilter gender = GenderFilter::all);

std::vector<CommunityCounts> user_community_counts(const Dataset& dataset, const BipartiteGraph& graph,
                                                   const CommunityAssignment& assignment);

}  // namespace prefnet::serial

#pragma once

#include <span>
#include <vector>

#include "prefnet/model.hpp"

namespace prefnet {

struct TrackTags {
  /// Indexed by dataset track index.
  std::vector<TagVectorSet> by_track;
  std::size_t tagged_tracks = 0;
  /// Fraction of dataset tracks with at least one non-zero class vector.
  double coverage = 0.0;
};

/// Each tagged general playlist adds one unit to every (track, tag) it
/// touches; non-zero class vectors are then normalized. Throws
/// ValidationError naming a tag that is not in the dataset's schema.
TrackTags map_tags_to_tracks(const Dataset& dataset);

/// Sums the track vector-sets over each user's distinct FP tracks and
/// normalizes. Indexed by dataset user index; users without an FP get zeros.
std::vector<TagVectorSet> map_tags_to_users(const Dataset& dataset, const TrackTags& track_tags);

/// Unweighted sum of the members' vector-sets, normalized. Throws
/// ValidationError for an empty member list.
TagVectorSet map_tags_to_group(std::span<const TagVectorSet> user_tags,
                               std::span<const UserIndex> members);

}  // namespace prefnet

#include "prefnet/tagmap.hpp"

#include <algorithm>

namespace prefnet {

TrackTags map_tags_to_tracks(const Dataset& dataset) {
  const auto& schema = dataset.schema();
  TrackTags out;
  out.by_track.assign(dataset.tracks().size(), TagVectorSet::zeros(schema));

  for (const auto& pl : dataset.playlists()) {
    if (pl.kind != PlaylistKind::general || pl.tags.empty()) continue;
    std::vector<std::pair<std::size_t, std::size_t>> refs;
    for (const auto& tag : pl.tags) refs.push_back(schema.resolve(tag));
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());

    std::vector<TrackIndex> members = pl.tracks;
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    // Unit increments: the sums are exact, so visiting order cannot matter.
    for (auto t : members)
      for (const auto& [c, k] : refs) out.by_track[t].classes[c][k] += 1.0;
  }

  const auto n = static_cast<std::int64_t>(out.by_track.size());
  std::size_t tagged = 0;
#pragma omp parallel for schedule(static) reduction(+ : tagged)
  for (std::int64_t t = 0; t < n; ++t) {
    auto& set = out.by_track[static_cast<std::size_t>(t)];
    set.normalize();
    if (!set.all_zero()) ++tagged;
  }
  out.tagged_tracks = tagged;
  out.coverage = out.by_track.empty()
                     ? 0.0
                     : static_cast<double>(tagged) / static_cast<double>(out.by_track.size());
  return out;
}

std::vector<TagVectorSet> map_tags_to_users(const Dataset& dataset, const TrackTags& track_tags) {
  const auto& schema = dataset.schema();
  const auto n = static_cast<std::int64_t>(dataset.users().size());
  std::vector<TagVectorSet> out(dataset.users().size());

#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t u = 0; u < n; ++u) {
    auto set = TagVectorSet::zeros(schema);
    if (auto fp = dataset.favorite_of(static_cast<UserIndex>(u))) {
      std::vector<TrackIndex> tracks = dataset.playlists()[*fp].tracks;
      std::sort(tracks.begin(), tracks.end());
      tracks.erase(std::unique(tracks.begin(), tracks.end()), tracks.end());
      for (auto t : tracks) set += track_tags.by_track[t];
      set.normalize();
    }
    out[static_cast<std::size_t>(u)] = std::move(set);
  }
  return out;
}

TagVectorSet map_tags_to_group(std::span<const TagVectorSet> user_tags,
                               std::span<const UserIndex> members) {
  if (members.empty()) throw ValidationError("group has no members");
  TagVectorSet set;
  for (auto m : members) set += user_tags[m];
  set.normalize();
  return set;
}

}  // namespace prefnet

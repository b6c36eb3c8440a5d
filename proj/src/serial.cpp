#include "prefnet/serial.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <omp.h>

#include "prefnet/parallel.hpp"

namespace prefnet {

void set_thread_count(int threads) {
  if (threads >= 1) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

namespace serial {

std::vector<double> attention_by_node(const BipartiteGraph& graph) {
  std::vector<double> a(graph.track_count(), 0.0);
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    const double w = graph.edge_weight(static_cast<NodeIndex>(u));
    for (auto t : graph.user_tracks(static_cast<NodeIndex>(u))) a[t] += w;
  }
  return a;
}

double modularity(const WeightedGraph& graph, std::span<const CommunityLabel> labels) {
  const double two_m = graph.total_weight();
  if (two_m <= 0.0) return 0.0;
  std::map<CommunityLabel, double> tot;
  double inside = 0.0;
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    const auto node = static_cast<NodeIndex>(v);
    tot[labels[v]] += graph.degree(node);
    const auto nb = graph.neighbors(node);
    const auto w = graph.weights(node);
    for (std::size_t k = 0; k < nb.size(); ++k)
      if (labels[nb[k]] == labels[v]) inside += w[k];
  }
  double q = inside / two_m;
  for (const auto& [c, t] : tot) q -= (t / two_m) * (t / two_m);
  return q;
}

std::vector<TagVectorSet> map_tags_to_users(const Dataset& dataset, const TrackTags& track_tags) {
  std::vector<TagVectorSet> out(dataset.users().size(), TagVectorSet::zeros(dataset.schema()));
  for (const auto& pl : dataset.playlists()) {
    if (pl.kind != PlaylistKind::favorite) continue;
    const std::set<TrackIndex> distinct(pl.tracks.begin(), pl.tracks.end());
    for (auto t : distinct) out[pl.owner] += track_tags.by_track[t];
    out[pl.owner].normalize();
  }
  return out;
}

AttentionMatrix attention_matrix(const Dataset& dataset, GenderFilter gender) {
  AttentionMatrix m;
  m.release_years = release_year_axis(dataset);
  if (m.release_years.empty()) return m;
  const int first = m.release_years.front();
  std::map<int, std::vector<double>> columns;
  std::map<int, std::size_t> sizes;
  for (const auto& pl : dataset.playlists()) {
    if (pl.kind != PlaylistKind::favorite || pl.tracks.empty()) continue;
    const auto& user = dataset.users()[pl.owner];
    if (!gender_matches(gender, user.gender)) continue;
    std::vector<int> years;
    for (auto t : std::set<TrackIndex>(pl.tracks.begin(), pl.tracks.end()))
      if (const auto& ry = dataset.tracks()[t].release_year) years.push_back(*ry);
    if (years.empty()) {
      ++m.users_without_dated_tracks;
      continue;
    }
    if (!user.birth_year) {
      ++m.users_without_birth_year;
      continue;
    }
    auto& col = columns[*user.birth_year];
    col.resize(m.release_years.size(), 0.0);
    for (int y : years) col[static_cast<std::size_t>(y - first)] += 1.0 / static_cast<double>(years.size());
    ++sizes[*user.birth_year];
  }
  if (columns.empty()) return m;
  for (int y = columns.begin()->first; y <= columns.rbegin()->first; ++y) m.birth_years.push_back(y);
  const std::size_t cols = m.birth_years.size();
  m.values.assign(m.release_years.size() * cols, 0.0);
  m.cohort_sizes.assign(cols, 0);
  for (const auto& [by, col] : columns) {
    const auto j = static_cast<std::size_t>(by - m.birth_years.front());
    m.cohort_sizes[j] = sizes[by];
    for (std::size_t i = 0; i < col.size(); ++i) m.values[i * cols + j] = col[i] / static_cast<double>(sizes[by]);
  }
  return m;
}

std::vector<CommunityCounts> user_community_counts(const Dataset& dataset, const BipartiteGraph& graph,
                                                   const CommunityAssignment& assignment) {
  std::vector<CommunityCounts> out(dataset.users().size());
  for (const auto& pl : dataset.playlists()) {
    if (pl.kind != PlaylistKind::favorite) continue;
    std::map<CommunityLabel, std::uint32_t> hist;
    for (auto t : std::set<TrackIndex>(pl.tracks.begin(), pl.tracks.end()))
      if (auto node = graph.track_node(t)) ++hist[assignment.track_community[*node]];
    out[pl.owner].assign(hist.begin(), hist.end());
  }
  return out;
}

}  // namespace serial
}  // namespace prefnet

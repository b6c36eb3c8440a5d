#include "prefnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace prefnet {

std::optional<NodeIndex> BipartiteGraph::user_node(UserIndex user) const {
  if (user >= user_node_of_.size() || user_node_of_[user] < 0) return std::nullopt;
  return static_cast<NodeIndex>(user_node_of_[user]);
}

std::optional<NodeIndex> BipartiteGraph::track_node(TrackIndex track) const {
  if (track >= track_node_of_.size() || track_node_of_[track] < 0) return std::nullopt;
  return static_cast<NodeIndex>(track_node_of_[track]);
}

BipartiteGraph build_graph(const Dataset& dataset) {
  const auto& users = dataset.users();
  const auto& tracks = dataset.tracks();
  const auto& playlists = dataset.playlists();

  BipartiteGraph g;
  std::vector<std::size_t> fp_of;  // playlist index per kept user
  std::size_t favorites = 0;
  for (std::size_t u = 0; u < users.size(); ++u) {
    auto fp = dataset.favorite_of(static_cast<UserIndex>(u));
    if (!fp) continue;
    ++favorites;
    if (playlists[*fp].tracks.empty()) {
      ++g.skipped_users_;
      continue;
    }
    g.user_ids_.push_back(static_cast<UserIndex>(u));
  }
  if (favorites == 0) throw ValidationError("dataset has no favorite playlists");

  std::sort(g.user_ids_.begin(), g.user_ids_.end(),
            [&](UserIndex a, UserIndex b) { return users[a].user_id < users[b].user_id; });
  fp_of.resize(g.user_ids_.size());
  for (std::size_t i = 0; i < g.user_ids_.size(); ++i) fp_of[i] = *dataset.favorite_of(g.user_ids_[i]);

  // Track nodes: every track present in some non-empty FP, ordered by id.
  std::vector<char> used(tracks.size(), 0);
  for (auto p : fp_of)
    for (auto t : playlists[p].tracks) used[t] = 1;
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (used[t]) g.track_ids_.push_back(static_cast<TrackIndex>(t));
  std::sort(g.track_ids_.begin(), g.track_ids_.end(),
            [&](TrackIndex a, TrackIndex b) { return tracks[a].track_id < tracks[b].track_id; });

  g.user_node_of_.assign(users.size(), -1);
  g.track_node_of_.assign(tracks.size(), -1);
  for (std::size_t i = 0; i < g.user_ids_.size(); ++i) g.user_node_of_[g.user_ids_[i]] = static_cast<std::int64_t>(i);
  for (std::size_t i = 0; i < g.track_ids_.size(); ++i) g.track_node_of_[g.track_ids_[i]] = static_cast<std::int64_t>(i);

  // User-side CSR: per-user dedup is independent, so it runs in parallel.
  const auto n_users = static_cast<std::int64_t>(g.user_ids_.size());
  std::vector<std::vector<NodeIndex>> lists(g.user_ids_.size());
#pragma omp parallel for schedule(dynamic, 512)
  for (std::int64_t i = 0; i < n_users; ++i) {
    const auto& pl = playlists[fp_of[static_cast<std::size_t>(i)]];
    auto& list = lists[static_cast<std::size_t>(i)];
    list.reserve(pl.tracks.size());
    for (auto t : pl.tracks) list.push_back(static_cast<NodeIndex>(g.track_node_of_[t]));
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  g.user_offsets_.resize(lists.size() + 1);
  for (std::size_t i = 0; i < lists.size(); ++i) g.user_offsets_[i + 1] = g.user_offsets_[i] + lists[i].size();
  g.user_adj_.resize(g.user_offsets_.back());
#pragma omp parallel for schedule(dynamic, 512)
  for (std::int64_t i = 0; i < n_users; ++i) {
    const auto& list = lists[static_cast<std::size_t>(i)];
    std::copy(list.begin(), list.end(), g.user_adj_.begin() + static_cast<std::ptrdiff_t>(g.user_offsets_[static_cast<std::size_t>(i)]));
  }
  lists.clear();
  lists.shrink_to_fit();

  // Track-side CSR by counting sort; users come out in ascending order.
  g.track_offsets_.assign(g.track_ids_.size() + 1, 0);
  for (auto t : g.user_adj_) ++g.track_offsets_[t + 1];
  for (std::size_t t = 0; t < g.track_ids_.size(); ++t) g.track_offsets_[t + 1] += g.track_offsets_[t];
  g.track_adj_.resize(g.user_adj_.size());
  std::vector<std::size_t> cursor(g.track_offsets_.begin(), g.track_offsets_.end() - 1);
  for (std::size_t u = 0; u < g.user_ids_.size(); ++u)
    for (auto t : g.user_tracks(static_cast<NodeIndex>(u))) g.track_adj_[cursor[t]++] = static_cast<NodeIndex>(u);
  return g;
}

std::vector<double> attention_by_node(const BipartiteGraph& graph) {
  const auto n = static_cast<std::int64_t>(graph.track_count());
  std::vector<double> attention(graph.track_count(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n; ++t) {
    // Extended precision, rounded once: 1/3 + 1/2 lands on the double nearest 5/6.
    long double sum = 0.0L;
    for (auto u : graph.track_users(static_cast<NodeIndex>(t)))
      sum += 1.0L / static_cast<long double>(graph.fp_length(u));
    attention[static_cast<std::size_t>(t)] = static_cast<double>(sum);
  }
  return attention;
}

AttentionTable total_attention(const Dataset& dataset, const BipartiteGraph& graph) {
  AttentionTable table;
  table.attention = attention_by_node(graph);
  table.track_ids.reserve(graph.track_count());
  for (std::size_t t = 0; t < graph.track_count(); ++t)
    table.track_ids.push_back(dataset.tracks()[graph.dataset_track(static_cast<NodeIndex>(t))].track_id);
  return table;
}

double AttentionTable::of(std::string_view track_id) const {
  auto it = std::lower_bound(track_ids.begin(), track_ids.end(), track_id,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == track_ids.end() || *it != track_id) return 0.0;
  return attention[static_cast<std::size_t>(it - track_ids.begin())];
}

double AttentionTable::total() const {
  return std::accumulate(attention.begin(), attention.end(), 0.0);
}

Histogram integer_histogram(std::span<const std::size_t> values) {
  std::map<std::size_t, std::size_t> counts;
  for (auto v : values) ++counts[v];
  const double total = static_cast<double>(values.size());
  Histogram h;
  for (const auto& [value, count] : counts) {
    HistogramBin bin;
    bin.lo = static_cast<double>(value);
    bin.hi = bin.lo + 1.0;
    bin.count = count;
    bin.density = static_cast<double>(count) / total;
    h.push_back(bin);
  }
  return h;
}

Histogram log_histogram(std::span<const double> values, int bins_per_decade) {
  if (bins_per_decade < 1) throw ValidationError("bins_per_decade must be >= 1");
  const double per = static_cast<double>(bins_per_decade);
  std::vector<long> bins;
  bins.reserve(values.size());
  for (double v : values) {
    if (!(v > 0.0)) continue;
    // Nudge so exact decade edges land in the bin they open.
    bins.push_back(static_cast<long>(std::floor(std::log10(v) * per + 1e-9)));
  }
  Histogram h;
  if (bins.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(bins.begin(), bins.end());
  const long first = *lo_it;
  std::vector<std::size_t> counts(static_cast<std::size_t>(*hi_it - first + 1), 0);
  for (long b : bins) ++counts[static_cast<std::size_t>(b - first)];
  const double total = static_cast<double>(bins.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    HistogramBin bin;
    const double k = static_cast<double>(first + static_cast<long>(i));
    bin.lo = std::pow(10.0, k / per);
    bin.hi = std::pow(10.0, (k + 1.0) / per);
    bin.count = counts[i];
    bin.density = static_cast<double>(counts[i]) / (total * (bin.hi - bin.lo));
    h.push_back(bin);
  }
  return h;
}

std::optional<double> log_log_slope(const Histogram& histogram) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& bin : histogram) {
    if (bin.count == 0 || bin.lo <= 0.0) continue;
    const double x = 0.5 * (std::log10(bin.lo) + std::log10(bin.hi));
    const double y = std::log10(bin.density);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nullopt;
  const double nn = static_cast<double>(n);
  const double denom = nn * sxx - sx * sx;
  if (denom == 0.0) return std::nullopt;
  return (nn * sxy - sx * sy) / denom;
}

DegreeDistributions degree_distributions(const BipartiteGraph& graph, int bins_per_decade) {
  std::vector<std::size_t> lengths(graph.user_count());
  for (std::size_t u = 0; u < lengths.size(); ++u) lengths[u] = graph.fp_length(static_cast<NodeIndex>(u));
  std::vector<std::size_t> followers(graph.track_count());
  for (std::size_t t = 0; t < followers.size(); ++t) followers[t] = graph.followers(static_cast<NodeIndex>(t));
  const auto attention = attention_by_node(graph);
  return {integer_histogram(lengths), integer_histogram(followers),
          log_histogram(attention, bins_per_decade)};
}

}  // namespace prefnet

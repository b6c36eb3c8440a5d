#include "prefnet/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace prefnet {

GenderFilter parse_gender_filter(std::string_view text) {
  if (text == "all") return GenderFilter::all;
  if (text == "male") return GenderFilter::male;
  if (text == "female") return GenderFilter::female;
  throw ValidationError("unknown gender filter '" + std::string(text) + "'");
}

PopularityBand parse_popularity_band(std::string_view text) {
  if (text == "all") return PopularityBand::all;
  if (text == "hot") return PopularityBand::hot;
  if (text == "middle") return PopularityBand::middle;
  if (text == "unpopular") return PopularityBand::unpopular;
  throw ValidationError("unknown popularity band '" + std::string(text) + "'");
}

bool gender_matches(GenderFilter filter, Gender g) {
  switch (filter) {
    case GenderFilter::all: return true;
    case GenderFilter::male: return g == Gender::male;
    case GenderFilter::female: return g == Gender::female;
  }
  return true;
}

std::vector<double> AttentionMatrix::column(std::size_t j) const {
  std::vector<double> col(release_years.size());
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = at(i, j);
  return col;
}

std::vector<int> release_year_axis(const Dataset& dataset) {
  std::optional<int> lo, hi;
  for (const auto& t : dataset.tracks()) {
    if (!t.release_year) continue;
    lo = lo ? std::min(*lo, *t.release_year) : *t.release_year;
    hi = hi ? std::max(*hi, *t.release_year) : *t.release_year;
  }
  std::vector<int> axis;
  if (!lo) return axis;
  for (int y = *lo; y <= *hi; ++y) axis.push_back(y);
  return axis;
}

namespace {

/// Release-year offsets of the dated FP tracks of one user node.
std::vector<std::size_t> dated_offsets(const Dataset& dataset, const BipartiteGraph& graph, NodeIndex u,
                                       int first_year) {
  std::vector<std::size_t> out;
  for (auto t : graph.user_tracks(u)) {
    const auto& ry = dataset.tracks()[graph.dataset_track(t)].release_year;
    if (ry) out.push_back(static_cast<std::size_t>(*ry - first_year));
  }
  return out;
}

/// Mean over `users` of their release-year distributions, restricted to
/// tracks accepted by `keep_track`. Blocked reduction: identical bytes for any
/// thread count.
std::vector<double> average_distribution(const Dataset& dataset, const BipartiteGraph& graph,
                                         const std::vector<NodeIndex>& users, int first_year,
                                         std::size_t years, const std::vector<char>* keep_track) {
  constexpr std::size_t kBlock = 2048;
  const std::size_t blocks = (users.size() + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(years, 0.0));
  const auto nb = static_cast<std::int64_t>(blocks);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t b = 0; b < nb; ++b) {
    auto& acc = partial[static_cast<std::size_t>(b)];
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(users.size(), lo + kBlock);
    for (std::size_t k = lo; k < hi; ++k) {
      const NodeIndex u = users[k];
      std::size_t dated = 0;
      for (auto t : graph.user_tracks(u))
        if (dataset.tracks()[graph.dataset_track(t)].release_year) ++dated;
      if (dated == 0) continue;
      const double w = 1.0 / static_cast<double>(dated);
      for (auto t : graph.user_tracks(u)) {
        const auto dt = graph.dataset_track(t);
        const auto& ry = dataset.tracks()[dt].release_year;
        if (!ry) continue;
        if (keep_track && !(*keep_track)[dt]) continue;
        acc[static_cast<std::size_t>(*ry - first_year)] += w;
      }
    }
  }
  std::vector<double> total(years, 0.0);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < years; ++i) total[i] += p[i];
  if (!users.empty())
    for (auto& x : total) x /= static_cast<double>(users.size());
  return total;
}

bool has_dated_track(const Dataset& dataset, const BipartiteGraph& graph, NodeIndex u) {
  for (auto t : graph.user_tracks(u))
    if (dataset.tracks()[graph.dataset_track(t)].release_year) return true;
  return false;
}

}  // namespace

AttentionMatrix attention_matrix(const Dataset& dataset, const BipartiteGraph& graph, GenderFilter gender) {
  AttentionMatrix m;
  m.release_years = release_year_axis(dataset);
  if (m.release_years.empty()) return m;
  const int first_year = m.release_years.front();
  const std::size_t rows = m.release_years.size();

  std::vector<std::pair<int, NodeIndex>> members;
  for (std::size_t ui = 0; ui < graph.user_count(); ++ui) {
    const auto u = static_cast<NodeIndex>(ui);
    const auto& user = dataset.users()[graph.dataset_user(u)];
    if (!gender_matches(gender, user.gender)) continue;
    if (!has_dated_track(dataset, graph, u)) {
      ++m.users_without_dated_tracks;
      continue;
    }
    if (!user.birth_year) {
      ++m.users_without_birth_year;
      continue;
    }
    members.emplace_back(*user.birth_year, u);
  }
  if (members.empty()) return m;

  const auto [lo, hi] = std::minmax_element(members.begin(), members.end());
  for (int y = lo->first; y <= hi->first; ++y) m.birth_years.push_back(y);
  const std::size_t cols = m.birth_years.size();
  std::vector<std::vector<NodeIndex>> cohorts(cols);
  for (const auto& [by, u] : members) cohorts[static_cast<std::size_t>(by - m.birth_years.front())].push_back(u);

  m.values.assign(rows * cols, 0.0);
  m.cohort_sizes.assign(cols, 0);
  const auto nc = static_cast<std::int64_t>(cols);
  // One column per task: each entry is summed by a single thread in user order.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t ji = 0; ji < nc; ++ji) {
    const auto j = static_cast<std::size_t>(ji);
    std::vector<double> col(rows, 0.0);
    for (auto u : cohorts[j]) {
      const auto offsets = dated_offsets(dataset, graph, u, first_year);
      const double w = 1.0 / static_cast<double>(offsets.size());
      for (auto i : offsets) col[i] += w;
    }
    const double n = static_cast<double>(cohorts[j].size());
    m.cohort_sizes[j] = cohorts[j].size();
    if (n > 0)
      for (std::size_t i = 0; i < rows; ++i) m.values[i * cols + j] = col[i] / n;
  }
  return m;
}

GlobalAttention global_attention(const Dataset& dataset, const BipartiteGraph& graph, GenderFilter gender,
                                 bool known_birth_only) {
  GlobalAttention g;
  g.release_years = release_year_axis(dataset);
  if (g.release_years.empty()) return g;
  std::vector<NodeIndex> users;
  for (std::size_t ui = 0; ui < graph.user_count(); ++ui) {
    const auto u = static_cast<NodeIndex>(ui);
    const auto& user = dataset.users()[graph.dataset_user(u)];
    if (!gender_matches(gender, user.gender)) continue;
    if (known_birth_only && !user.birth_year) continue;
    if (!has_dated_track(dataset, graph, u)) continue;
    users.push_back(u);
  }
  g.users = users.size();
  g.share = average_distribution(dataset, graph, users, g.release_years.front(), g.release_years.size(), nullptr);
  return g;
}

std::vector<PopularityBand> popularity_bands(const Dataset& dataset, const BipartiteGraph& graph) {
  const auto& tracks = dataset.tracks();
  std::vector<double> attention(tracks.size(), 0.0);
  const auto by_node = attention_by_node(graph);
  for (std::size_t t = 0; t < graph.track_count(); ++t)
    attention[graph.dataset_track(static_cast<NodeIndex>(t))] = by_node[t];

  std::map<int, std::vector<TrackIndex>> by_year;
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (tracks[t].release_year) by_year[*tracks[t].release_year].push_back(static_cast<TrackIndex>(t));

  std::vector<PopularityBand> bands(tracks.size(), PopularityBand::unpopular);
  for (auto& [year, ids] : by_year) {
    std::sort(ids.begin(), ids.end(), [&](TrackIndex a, TrackIndex b) {
      if (attention[a] != attention[b]) return attention[a] > attention[b];
      return tracks[a].track_id < tracks[b].track_id;
    });
    const double m = static_cast<double>(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const double frac = static_cast<double>(r + 1) / m;
      bands[ids[r]] = frac <= 0.05 ? PopularityBand::hot
                      : frac <= 0.25 ? PopularityBand::middle
                                     : PopularityBand::unpopular;
    }
  }
  return bands;
}

DecayCurve mean_global_preference(const Dataset& dataset, const BipartiteGraph& graph,
                                  const DecayOptions& options) {
  DecayCurve curve;
  const auto axis = release_year_axis(dataset);
  if (axis.empty()) return curve;
  const int first_year = axis.front();

  std::vector<char> keep(dataset.tracks().size(), 1);
  if (options.band != PopularityBand::all) {
    const auto bands = popularity_bands(dataset, graph);
    for (std::size_t t = 0; t < keep.size(); ++t) keep[t] = bands[t] == options.band;
  }

  std::vector<std::size_t> m(axis.size(), 0);
  std::size_t undated = 0;
  for (std::size_t t = 0; t < dataset.tracks().size(); ++t) {
    const auto& ry = dataset.tracks()[t].release_year;
    if (!ry) {
      ++undated;
      continue;
    }
    if (keep[t]) ++m[static_cast<std::size_t>(*ry - first_year)];
  }
  curve.dated_tracks = std::accumulate(m.begin(), m.end(), std::size_t{0});
  curve.undated_fraction = dataset.tracks().empty()
                               ? 0.0
                               : static_cast<double>(undated) / static_cast<double>(dataset.tracks().size());

  std::vector<NodeIndex> users;
  for (std::size_t ui = 0; ui < graph.user_count(); ++ui) {
    const auto u = static_cast<NodeIndex>(ui);
    if (!gender_matches(options.gender, dataset.users()[graph.dataset_user(u)].gender)) continue;
    if (has_dated_track(dataset, graph, u)) users.push_back(u);
  }
  const auto share = average_distribution(dataset, graph, users, first_year, axis.size(),
                                          options.band == PopularityBand::all ? nullptr : &keep);
  if (curve.dated_tracks == 0) return curve;
  const double total = static_cast<double>(curve.dated_tracks);
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (m[i] == 0) continue;
    DecayPoint p;
    p.release_year = axis[i];
    p.years_since_release = dataset.reference_year() - axis[i];
    p.tracks = m[i];
    p.track_share = static_cast<double>(m[i]) / total;
    p.attention_share = share[i];
    p.preference = share[i] / p.track_share;
    curve.points.push_back(p);
  }
  return curve;
}

RelativeAttention relative_attention(const AttentionMatrix& cohort, const GlobalAttention& global) {
  if (cohort.release_years != global.release_years && !cohort.birth_years.empty())
    throw ValidationError("attention matrix and global attention use different release-year axes");
  RelativeAttention r;
  r.release_years = cohort.release_years;
  r.birth_years = cohort.birth_years;
  const std::size_t rows = r.release_years.size(), cols = r.birth_years.size();
  r.values.assign(rows * cols, std::nullopt);
  for (std::size_t i = 0; i < rows; ++i) {
    const double g = global.share[i];
    if (!(g > 0.0)) continue;
    for (std::size_t j = 0; j < cols; ++j)
      if (cohort.cohort_sizes[j] > 0) r.values[i * cols + j] = cohort.at(i, j) / g;
  }
  return r;
}

std::optional<std::vector<SensitivityPoint>> sensitivity(const RelativeAttention& relative, int birth_year) {
  const auto it = std::find(relative.birth_years.begin(), relative.birth_years.end(), birth_year);
  if (it == relative.birth_years.end()) return std::nullopt;
  const auto j = static_cast<std::size_t>(it - relative.birth_years.begin());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < relative.release_years.size(); ++i) {
    if (const auto& v = relative.at(i, j)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0 || !(sum > 0.0)) return std::nullopt;
  const double mean = sum / static_cast<double>(count);
  std::vector<SensitivityPoint> points;
  points.reserve(count);
  for (std::size_t i = 0; i < relative.release_years.size(); ++i)
    if (const auto& v = relative.at(i, j))
      points.push_back({relative.release_years[i] - birth_year, *v / mean});
  return points;
}

std::vector<AgeSensitivity> mean_sensitivity_by_age(const RelativeAttention& relative) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (int by : relative.birth_years) {
    const auto s = sensitivity(relative, by);
    if (!s) continue;
    for (const auto& p : *s) {
      auto& slot = acc[p.age_at_release];
      slot.first += p.sensitivity;
      ++slot.second;
    }
  }
  std::vector<AgeSensitivity> out;
  out.reserve(acc.size());
  for (const auto& [age, slot] : acc)
    out.push_back({age, slot.first / static_cast<double>(slot.second), slot.second});
  return out;
}

std::vector<CohortQuantiles> release_year_quantiles(const AttentionMatrix& matrix) {
  std::vector<CohortQuantiles> out;
  for (std::size_t j = 0; j < matrix.birth_years.size(); ++j) {
    if (matrix.cohort_sizes[j] == 0) continue;
    const auto col = matrix.column(j);
    const double total = std::accumulate(col.begin(), col.end(), 0.0);
    auto quantile = [&](double q) {
      double cdf = 0.0;
      for (std::size_t i = 0; i < col.size(); ++i) {
        cdf += col[i] / total;
        if (cdf >= q - 1e-12) return matrix.release_years[i];
      }
      return matrix.release_years.back();
    };
    out.push_back({matrix.birth_years[j], quantile(0.25), quantile(0.5), quantile(0.75)});
  }
  return out;
}

}  // namespace prefnet

#include "prefnet/community.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "prefnet/parallel.hpp"
#include "prefnet/rng.hpp"
#include "prefnet/tagmap.hpp"

namespace prefnet {

// ---------------------------------------------------------------------------
// WeightedGraph

WeightedGraph::WeightedGraph(std::size_t node_count, std::span<const WeightedEdge> edges) {
  std::vector<std::map<NodeIndex, double>> adj(node_count);
  for (const auto& e : edges) {
    if (e.a >= node_count || e.b >= node_count) throw ValidationError("edge endpoint out of range");
    if (e.a == e.b) throw ValidationError("self loops are not accepted");
    if (!(e.weight > 0.0)) throw ValidationError("edge weights must be positive");
    adj[e.a][e.b] += e.weight;
    adj[e.b][e.a] += e.weight;
  }
  offsets_.assign(node_count + 1, 0);
  degree_.assign(node_count, 0.0);
  for (std::size_t v = 0; v < node_count; ++v) {
    offsets_[v + 1] = offsets_[v] + adj[v].size();
    for (const auto& [j, w] : adj[v]) {
      targets_.push_back(j);
      weights_.push_back(w);
      degree_[v] += w;
    }
    total_weight_ += degree_[v];
  }
}

WeightedGraph WeightedGraph::from_bipartite(const BipartiteGraph& graph) {
  const std::size_t users = graph.user_count();
  const std::size_t n = users + graph.track_count();
  WeightedGraph g;
  g.offsets_.assign(n + 1, 0);
  for (std::size_t u = 0; u < users; ++u) g.offsets_[u + 1] = graph.fp_length(static_cast<NodeIndex>(u));
  for (std::size_t t = 0; t < graph.track_count(); ++t)
    g.offsets_[users + t + 1] = graph.followers(static_cast<NodeIndex>(t));
  for (std::size_t v = 0; v < n; ++v) g.offsets_[v + 1] += g.offsets_[v];
  g.targets_.resize(g.offsets_.back());
  g.weights_.resize(g.offsets_.back());
  g.degree_.assign(n, 0.0);

  const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1024)
  for (std::int64_t vi = 0; vi < nn; ++vi) {
    const auto v = static_cast<std::size_t>(vi);
    std::size_t pos = g.offsets_[v];
    double deg = 0.0;
    if (v < users) {
      const double w = graph.edge_weight(static_cast<NodeIndex>(v));
      for (auto t : graph.user_tracks(static_cast<NodeIndex>(v))) {
        g.targets_[pos] = static_cast<NodeIndex>(users + t);
        g.weights_[pos++] = w;
        deg += w;
      }
    } else {
      for (auto u : graph.track_users(static_cast<NodeIndex>(v - users))) {
        const double w = graph.edge_weight(u);
        g.targets_[pos] = u;
        g.weights_[pos++] = w;
        deg += w;
      }
    }
    g.degree_[v] = deg;
  }
  g.total_weight_ = 0.0;
  for (double d : g.degree_) g.total_weight_ += d;
  return g;
}

WeightedGraph WeightedGraph::aggregate(const WeightedGraph& graph, std::span<const CommunityLabel> labels,
                                       std::size_t communities) {
  const std::size_t n = graph.node_count();
  // Group members by community (counting sort keeps node order within each).
  std::vector<std::size_t> start(communities + 1, 0);
  for (std::size_t v = 0; v < n; ++v) ++start[labels[v] + 1];
  for (std::size_t c = 0; c < communities; ++c) start[c + 1] += start[c];
  std::vector<NodeIndex> members(n);
  {
    std::vector<std::size_t> cursor(start.begin(), start.end() - 1);
    for (std::size_t v = 0; v < n; ++v) members[cursor[labels[v]]++] = static_cast<NodeIndex>(v);
  }

  WeightedGraph g;
  g.offsets_.assign(communities + 1, 0);
  g.degree_.assign(communities, 0.0);
  std::vector<double> acc(communities, 0.0);
  std::vector<char> seen(communities, 0);
  std::vector<CommunityLabel> touched;
  for (std::size_t c = 0; c < communities; ++c) {
    touched.clear();
    for (std::size_t m = start[c]; m < start[c + 1]; ++m) {
      const NodeIndex v = members[m];
      const auto nbrs = graph.neighbors(v);
      const auto ws = graph.weights(v);
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        const CommunityLabel d = labels[nbrs[k]];
        if (!seen[d]) {
          seen[d] = 1;
          touched.push_back(d);
        }
        acc[d] += ws[k];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto d : touched) {
      g.targets_.push_back(d);
      g.weights_.push_back(acc[d]);
      g.degree_[c] += acc[d];
      acc[d] = 0.0;
      seen[d] = 0;
    }
    g.offsets_[c + 1] = g.targets_.size();
    g.total_weight_ += g.degree_[c];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Modularity

double modularity(const WeightedGraph& graph, std::span<const CommunityLabel> labels) {
  const std::size_t n = graph.node_count();
  if (labels.size() != n) throw ValidationError("assignment does not cover every node");
  const double m2 = graph.total_weight();
  if (m2 <= 0.0) return 0.0;
  const double inside = deterministic_sum(n, [&](std::size_t v) {
    const auto nbrs = graph.neighbors(static_cast<NodeIndex>(v));
    const auto ws = graph.weights(static_cast<NodeIndex>(v));
    double s = 0.0;
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      if (labels[nbrs[k]] == labels[v]) s += ws[k];
    return s;
  });
  const auto max_label = n ? *std::max_element(labels.begin(), labels.end()) : 0u;
  std::vector<double> tot(static_cast<std::size_t>(max_label) + 1, 0.0);
  for (std::size_t v = 0; v < n; ++v) tot[labels[v]] += graph.degree(static_cast<NodeIndex>(v));
  double expected = 0.0;
  for (double t : tot) expected += (t / m2) * (t / m2);
  return inside / m2 - expected;
}

double modularity(const BipartiteGraph& graph, const CommunityAssignment& assignment) {
  const std::size_t users = graph.user_count();
  if (assignment.user_community.size() != users ||
      assignment.track_community.size() != graph.track_count())
    throw ValidationError("assignment does not cover every node");
  const double m2 = 2.0 * deterministic_sum(users, [&](std::size_t u) {
    return graph.edge_weight(static_cast<NodeIndex>(u)) *
           static_cast<double>(graph.fp_length(static_cast<NodeIndex>(u)));
  });
  if (m2 <= 0.0) return 0.0;
  const double inside = 2.0 * deterministic_sum(users, [&](std::size_t u) {
    const auto c = assignment.user_community[u];
    double s = 0.0;
    const double w = graph.edge_weight(static_cast<NodeIndex>(u));
    for (auto t : graph.user_tracks(static_cast<NodeIndex>(u)))
      if (assignment.track_community[t] == c) s += w;
    return s;
  });
  std::vector<double> tot(assignment.community_count, 0.0);
  for (std::size_t u = 0; u < users; ++u) {
    tot[assignment.user_community[u]] +=
        graph.edge_weight(static_cast<NodeIndex>(u)) * static_cast<double>(graph.fp_length(static_cast<NodeIndex>(u)));
  }
  const auto attention = attention_by_node(graph);
  for (std::size_t t = 0; t < graph.track_count(); ++t) tot[assignment.track_community[t]] += attention[t];
  double expected = 0.0;
  for (double t : tot) expected += (t / m2) * (t / m2);
  return inside / m2 - expected;
}

// ---------------------------------------------------------------------------
// Louvain

namespace {

double level_quality(std::span<const double> in, std::span<const double> tot, double m2) {
  double q = 0.0;
  for (std::size_t c = 0; c < in.size(); ++c) q += in[c] / m2 - (tot[c] / m2) * (tot[c] / m2);
  return q;
}

struct LocalMoveResult {
  bool moved = false;
  double quality = 0.0;
};

/// One level of local moving. `comm` receives a (non-dense) label per node.
LocalMoveResult local_moves(const WeightedGraph& g, std::vector<CommunityLabel>& comm, Rng& rng,
                            double min_gain) {
  const std::size_t n = g.node_count();
  const double m2 = g.total_weight();
  comm.resize(n);
  std::vector<double> tot(n), in(n, 0.0), self(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    comm[v] = static_cast<CommunityLabel>(v);
    tot[v] = g.degree(static_cast<NodeIndex>(v));
    const auto nbrs = g.neighbors(static_cast<NodeIndex>(v));
    const auto ws = g.weights(static_cast<NodeIndex>(v));
    for (std::size_t k = 0; k < nbrs.size(); ++k)
      if (nbrs[k] == v) self[v] += ws[k];
    in[v] = self[v];
  }
  LocalMoveResult result;
  if (m2 <= 0.0) return result;
  result.quality = level_quality(in, tot, m2);

  std::vector<NodeIndex> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::vector<double> link(n, 0.0);
  std::vector<char> seen(n, 0);
  std::vector<CommunityLabel> touched;

  while (true) {
    rng.shuffle(std::span<NodeIndex>(order));
    std::size_t moves = 0;
    for (const NodeIndex v : order) {
      const double k = g.degree(v);
      const CommunityLabel old = comm[v];
      touched.clear();
      const auto nbrs = g.neighbors(v);
      const auto ws = g.weights(v);
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        if (nbrs[i] == v) continue;
        const CommunityLabel c = comm[nbrs[i]];
        if (!seen[c]) {
          seen[c] = 1;
          touched.push_back(c);
        }
        link[c] += ws[i];
      }
      const double link_old = link[old];
      tot[old] -= k;
      in[old] -= 2.0 * link_old + self[v];

      CommunityLabel best = old;
      double best_gain = link_old - tot[old] * k / m2;
      const double tol = 1e-12 * (k > 0.0 ? k : 1.0);
      for (const CommunityLabel c : touched) {
        if (c == old) continue;
        const double gain = link[c] - tot[c] * k / m2;
        if (gain > best_gain + tol) {
          best = c;
          best_gain = gain;
        } else if (best != old && gain >= best_gain - tol && c < best) {
          best = c;
          best_gain = gain;
        }
      }
      tot[best] += k;
      in[best] += 2.0 * link[best] + self[v];
      comm[v] = best;
      if (best != old) ++moves;
      for (const CommunityLabel c : touched) {
        link[c] = 0.0;
        seen[c] = 0;
      }
    }
    if (moves == 0) break;
    result.moved = true;
    const double q = level_quality(in, tot, m2);
    const double gain = q - result.quality;
    result.quality = q;
    if (gain <= min_gain) break;
  }
  return result;
}

std::size_t densify(std::vector<CommunityLabel>& labels) {
  std::vector<CommunityLabel> remap(labels.size() + 1, static_cast<CommunityLabel>(-1));
  CommunityLabel next = 0;
  for (auto& l : labels) {
    if (l >= remap.size()) remap.resize(l + 1, static_cast<CommunityLabel>(-1));
    if (remap[l] == static_cast<CommunityLabel>(-1)) remap[l] = next++;
    l = remap[l];
  }
  return next;
}

}  // namespace

LouvainResult louvain(const WeightedGraph& graph, const LouvainOptions& options) {
  const std::size_t n = graph.node_count();
  LouvainResult result;
  result.labels.resize(n);
  std::iota(result.labels.begin(), result.labels.end(), 0u);
  result.community_count = n;

  std::vector<CommunityLabel> singletons(result.labels);
  double q_prev = modularity(graph, singletons);
  result.modularity = q_prev;
  if (graph.total_weight() <= 0.0) return result;

  WeightedGraph aggregated;
  const WeightedGraph* current = &graph;
  for (std::uint64_t level = 0;; ++level) {
    Rng rng(derive_seed(options.seed, level));
    std::vector<CommunityLabel> comm;
    const auto moved = local_moves(*current, comm, rng, options.min_modularity_gain);
    if (!moved.moved) break;
    const std::size_t k = densify(comm);
    for (auto& l : result.labels) l = comm[l];
    result.community_count = k;
    result.modularity = moved.quality;
    result.level_modularity.push_back(moved.quality);
    if (moved.quality - q_prev <= options.min_modularity_gain) break;
    q_prev = moved.quality;
    aggregated = WeightedGraph::aggregate(*current, comm, k);
    current = &aggregated;
  }
  result.community_count = densify(result.labels);
  return result;
}

CommunityAssignment detect_communities(const BipartiteGraph& graph, const LouvainOptions& options) {
  const auto wg = WeightedGraph::from_bipartite(graph);
  const auto res = louvain(wg, options);
  const std::size_t users = graph.user_count();
  const std::size_t k = res.community_count;

  std::vector<std::size_t> ucount(k, 0), tcount(k, 0), first(k, static_cast<std::size_t>(-1));
  for (std::size_t v = 0; v < res.labels.size(); ++v) {
    const auto c = res.labels[v];
    (v < users ? ucount : tcount)[c]++;
    first[c] = std::min(first[c], v);
  }
  std::vector<CommunityLabel> order(k);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](CommunityLabel a, CommunityLabel b) {
    return std::tuple(ucount[b], tcount[b], first[a]) < std::tuple(ucount[a], tcount[a], first[b]);
  });
  std::vector<CommunityLabel> relabel(k);
  for (std::size_t i = 0; i < k; ++i) relabel[order[i]] = static_cast<CommunityLabel>(i);

  CommunityAssignment out;
  out.community_count = k;
  out.modularity = res.modularity;
  out.user_community.resize(users);
  out.track_community.resize(graph.track_count());
  out.user_counts.assign(k, 0);
  out.track_counts.assign(k, 0);
  for (std::size_t u = 0; u < users; ++u) {
    out.user_community[u] = relabel[res.labels[u]];
    ++out.user_counts[out.user_community[u]];
  }
  for (std::size_t t = 0; t < graph.track_count(); ++t) {
    out.track_community[t] = relabel[res.labels[users + t]];
    ++out.track_counts[out.track_community[t]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (out.user_counts[c] == 0 || out.track_counts[c] == 0)
      out.warnings.push_back("community " + std::to_string(c) + " lacks a user or a track");
  }
  return out;
}

CommunityRanking rank_communities(const CommunityAssignment& assignment) {
  CommunityRanking r;
  for (std::size_t c = 0; c < assignment.community_count; ++c) {
    r.by_tracks.emplace_back(static_cast<CommunityLabel>(c), assignment.track_counts[c]);
    r.by_users.emplace_back(static_cast<CommunityLabel>(c), assignment.user_counts[c]);
  }
  auto cmp = [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  std::stable_sort(r.by_tracks.begin(), r.by_tracks.end(), cmp);
  std::stable_sort(r.by_users.begin(), r.by_users.end(), cmp);
  return r;
}

Coverage top_k_coverage(const CommunityAssignment& assignment, std::size_t k) {
  const std::size_t users = assignment.user_community.size();
  const std::size_t tracks = assignment.track_community.size();
  std::size_t cu = 0, ct = 0;
  for (std::size_t c = 0; c < std::min(k, assignment.community_count); ++c) {
    cu += assignment.user_counts[c];
    ct += assignment.track_counts[c];
  }
  Coverage cov;
  if (users) cov.users = static_cast<double>(cu) / static_cast<double>(users);
  if (tracks) cov.tracks = static_cast<double>(ct) / static_cast<double>(tracks);
  return cov;
}

std::pair<std::optional<std::size_t>, std::optional<std::size_t>> primary_tags(
    std::span<const double> strengths) {
  std::optional<std::size_t> first, second;
  for (std::size_t i = 0; i < strengths.size(); ++i) {
    if (!(strengths[i] > 0.0)) continue;
    if (!first || strengths[i] > strengths[*first]) {
      second = first;
      first = i;
    } else if (!second || strengths[i] > strengths[*second]) {
      second = i;
    }
  }
  return {first, second};
}

std::vector<CommunityProfile> profile_communities(const CommunityAssignment& assignment,
                                                  const Dataset& dataset, const BipartiteGraph& graph,
                                                  std::span<const TagVectorSet> user_tags) {
  const std::size_t k = assignment.community_count;
  std::vector<std::vector<UserIndex>> members(k);
  for (std::size_t u = 0; u < assignment.user_community.size(); ++u)
    members[assignment.user_community[u]].push_back(graph.dataset_user(static_cast<NodeIndex>(u)));

  const double total_users = static_cast<double>(graph.user_count());
  const double total_tracks = static_cast<double>(graph.track_count());
  std::vector<CommunityProfile> profiles(k);
  const auto nk = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t ci = 0; ci < nk; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    auto& p = profiles[c];
    p.label = static_cast<CommunityLabel>(c);
    p.users = assignment.user_counts[c];
    p.tracks = assignment.track_counts[c];
    p.user_share = total_users > 0 ? static_cast<double>(p.users) / total_users : 0.0;
    p.track_share = total_tracks > 0 ? static_cast<double>(p.tracks) / total_tracks : 0.0;
    p.tags = members[c].empty() ? TagVectorSet::zeros(dataset.schema())
                                : map_tags_to_group(user_tags, members[c]);
    for (const auto& v : p.tags.classes) p.primary_tags.push_back(primary_tags(v));

    double age_sum = 0.0;
    std::size_t aged = 0, female = 0, gendered = 0;
    for (auto u : members[c]) {
      if (auto a = dataset.age(u)) {
        age_sum += *a;
        ++aged;
      }
      const auto g = dataset.users()[u].gender;
      if (g != Gender::unknown) ++gendered;
      if (g == Gender::female) ++female;
    }
    if (aged) p.mean_age = age_sum / static_cast<double>(aged);
    if (gendered) p.female_proportion = static_cast<double>(female) / static_cast<double>(gendered);
  }
  return profiles;
}

double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.size() != b.size()) throw ValidationError("labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> joint;
  std::map<std::uint32_t, std::size_t> ra, rb;
  for (std::size_t i = 0; i < n; ++i) {
    ++joint[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](std::size_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [key, cnt] : joint) index += c2(cnt);
  for (const auto& [key, cnt] : ra) sa += c2(cnt);
  for (const auto& [key, cnt] : rb) sb += c2(cnt);
  const double expected = sa * sb / c2(n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace prefnet

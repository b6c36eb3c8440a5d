#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "fixtures.hpp"
#include "prefnet/community.hpp"
#include "prefnet/rng.hpp"
#include "prefnet/tagmap.hpp"

using namespace prefnet;
using fixture::Builder;

namespace {

// Dense O(n^2) modularity straight from the definition.
double dense_modularity(std::size_t n, const std::vector<WeightedEdge>& edges, const std::vector<CommunityLabel>& c) {
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (const auto& e : edges) {
    a[e.a][e.b] += e.weight;
    a[e.b][e.a] += e.weight;
  }
  std::vector<double> k(n, 0.0);
  double two_m = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      k[i] += a[i][j];
      two_m += a[i][j];
    }
  if (two_m == 0) return 0;
  double q = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (c[i] == c[j]) q += a[i][j] - k[i] * k[j] / two_m;
  return q / two_m;
}

// Max modularity over all set partitions (restricted growth strings).
double best_partition(std::size_t n, const std::vector<WeightedEdge>& edges) {
  std::vector<CommunityLabel> c(n, 0);
  double best = -1;
  std::function<void(std::size_t, CommunityLabel)> rec = [&](std::size_t i, CommunityLabel used) {
    if (i == n) {
      best = std::max(best, dense_modularity(n, edges, c));
      return;
    }
    for (CommunityLabel l = 0; l <= used; ++l) {
      c[i] = l;
      rec(i + 1, std::max<CommunityLabel>(used, l + 1));
    }
  };
  c[0] = 0;
  rec(1, 1);
  return best;
}

std::vector<WeightedEdge> clique(NodeIndex from, NodeIndex size) {
  std::vector<WeightedEdge> e;
  for (NodeIndex i = from; i < from + size; ++i)
    for (NodeIndex j = i + 1; j < from + size; ++j) e.push_back({i, j, 1.0});
  return e;
}

Dataset two_blocks() {
  Builder b;
  for (int blk = 0; blk < 2; ++blk)
    for (int u = 0; u < 5; ++u) {
      auto ui = b.user("b" + std::to_string(blk) + "u" + std::to_string(u));
      Playlist p;
      p.playlist_id = "fp" + b.users[ui].user_id;
      p.owner = ui;
      p.kind = PlaylistKind::favorite;
      for (int t = 0; t < 5; ++t) p.tracks.push_back(b.track("b" + std::to_string(blk) + "t" + std::to_string(t)));
      b.playlists.push_back(p);
    }
  return b.build();
}

}  // namespace

TEST_CASE("two equal cliques split give Q = 0.5") {
  auto edges = clique(0, 4);
  auto second = clique(4, 4);
  edges.insert(edges.end(), second.begin(), second.end());
  const WeightedGraph g(8, edges);
  const std::vector<CommunityLabel> split = {0, 0, 0, 0, 1, 1, 1, 1}, one(8, 0);
  CHECK(modularity(g, split) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(modularity(g, one)) < 1e-15);
  const auto r = louvain(g, {1, 1e-7});
  CHECK(r.community_count == 2);
  CHECK(r.modularity == doctest::Approx(0.5));
}

TEST_CASE("modularity matches the dense oracle") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(20);
    std::vector<WeightedEdge> edges;
    std::set<std::pair<NodeIndex, NodeIndex>> seen;
    for (std::size_t i = 0; i < 3 * n; ++i) {
      auto a = static_cast<NodeIndex>(rng.below(n)), b = static_cast<NodeIndex>(rng.below(n));
      if (a == b || !seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
      edges.push_back({a, b, 0.1 + rng.uniform()});
    }
    const WeightedGraph g(n, edges);
    std::vector<CommunityLabel> labels(n);
    for (auto& l : labels) l = static_cast<CommunityLabel>(rng.below(4));
    CHECK(modularity(g, labels) == doctest::Approx(dense_modularity(n, edges, labels)).epsilon(1e-12));
    // optimizer dominates a random assignment and reports its own Q honestly
    const auto r = louvain(g, {static_cast<std::uint64_t>(trial)});
    CHECK(r.modularity >= modularity(g, labels) - 1e-12);
    CHECK(std::abs(modularity(g, r.labels) - r.modularity) < 1e-9);
    for (std::size_t i = 1; i < r.level_modularity.size(); ++i)
      CHECK(r.level_modularity[i] >= r.level_modularity[i - 1] - 1e-12);
  }
}

TEST_CASE("bridged cliques reach the exhaustive optimum") {
  auto edges = clique(0, 4);
  auto second = clique(4, 4);
  edges.insert(edges.end(), second.begin(), second.end());
  edges.push_back({3, 4, 1.0});
  const WeightedGraph g(8, edges);
  const double best = best_partition(8, edges);
  for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(louvain(g, {seed}).modularity >= best - 1e-9);
}

TEST_CASE("edgeless graph") {
  const WeightedGraph g(4, std::vector<WeightedEdge>{});
  const auto r = louvain(g);
  CHECK(r.community_count == 4);
  CHECK(r.modularity == 0.0);
}

TEST_CASE("bad edges are rejected") {
  CHECK_THROWS(WeightedGraph(2, std::vector<WeightedEdge>{{0, 0, 1.0}}));
  CHECK_THROWS(WeightedGraph(2, std::vector<WeightedEdge>{{0, 1, 0.0}}));
}

TEST_CASE("disconnected bipartite blocks") {
  const auto ds = two_blocks();
  const auto g = build_graph(ds);
  const auto a = detect_communities(g, {7});
  CHECK(a.community_count == 2);
  for (NodeIndex u = 0; u < g.user_count(); ++u)
    for (auto t : g.user_tracks(u)) CHECK(a.user_community[u] == a.track_community[t]);
  CHECK(a.user_counts == std::vector<std::size_t>{5, 5});
  CHECK(a.warnings.empty());
  CHECK(modularity(g, a) == doctest::Approx(a.modularity).epsilon(1e-9));

  // same seed, same labels; another seed, same partition here
  const auto b = detect_communities(g, {7});
  CHECK(a.user_community == b.user_community);
  CHECK(a.track_community == b.track_community);
}

TEST_CASE("single edge") {
  Builder b;
  b.favorite(b.user("u"), {"t"});
  const auto a = detect_communities(build_graph(b.build()));
  CHECK(a.community_count == 1);
  CHECK(a.user_community[0] == a.track_community[0]);
}

TEST_CASE("ranking") {
  CommunityAssignment a;
  a.community_count = 3;
  a.track_counts = {5, 10, 1};
  a.user_counts = {3, 2, 2};
  a.user_community = {0, 0, 0, 1, 1, 2, 2};
  a.track_community.assign(16, 0);
  const auto r = rank_communities(a);
  CHECK(r.by_tracks == std::vector<std::pair<CommunityLabel, std::size_t>>{{1, 10}, {0, 5}, {2, 1}});
  CHECK(r.by_users == std::vector<std::pair<CommunityLabel, std::size_t>>{{0, 3}, {1, 2}, {2, 2}});
  CommunityAssignment single;
  single.community_count = 1;
  single.track_counts = {4};
  single.user_counts = {1};
  CHECK(rank_communities(single).by_tracks.size() == 1);
  const auto cov = top_k_coverage(a, 1);
  CHECK(cov.users == doctest::Approx(3.0 / 7.0));
  CHECK(cov.tracks == doctest::Approx(5.0 / 16.0));
}

TEST_CASE("profiles") {
  Builder b;
  auto owner = b.user("owner");
  b.general(owner, "g", {"a", "b", "c"}, {"Genre:Pop"});
  b.general(owner, "g2", {"c"}, {"Genre:Rock"});
  const auto f1 = b.user("f1", 1996, Gender::female);
  const auto f2 = b.user("f2", 1990, Gender::female);
  const auto m = b.user("m", 1994, Gender::male);
  const auto x = b.user("x");
  b.favorite(f1, {"a", "b"});
  b.favorite(f2, {"a", "b"});
  b.favorite(m, {"a", "b"});
  b.favorite(x, {"a", "b"});
  const auto ds = b.build();
  const auto g = build_graph(ds);
  // everything in one community
  CommunityAssignment assignment;
  assignment.community_count = 1;
  assignment.user_community.assign(g.user_count(), 0);
  assignment.track_community.assign(g.track_count(), 0);
  assignment.user_counts = {g.user_count()};
  assignment.track_counts = {g.track_count()};
  const auto users = map_tags_to_users(ds, map_tags_to_tracks(ds));
  const auto prof = profile_communities(assignment, ds, g, users);
  REQUIRE(prof.size() == 1);
  CHECK(*prof[0].female_proportion == doctest::Approx(0.667).epsilon(1e-3));
  CHECK(*prof[0].mean_age == doctest::Approx((20.0 + 26.0 + 22.0) / 3.0));
  CHECK(prof[0].primary_tags[1].first == std::optional<std::size_t>(0));
  CHECK(!prof[0].primary_tags[1].second);
  CHECK(prof[0].user_share == 1.0);
  CHECK(prof[0].track_share == 1.0);

  const std::vector<double> strengths = {0.1, 0.4, 0.4, 0.1};
  CHECK(primary_tags(strengths) == std::pair<std::optional<std::size_t>, std::optional<std::size_t>>{1, 2});
}

TEST_CASE("adjusted rand index") {
  const std::vector<std::uint32_t> a = {0, 0, 1, 1}, b = {0, 0, 1, 2}, c = {5, 5, 9, 9};
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
  CHECK(adjusted_rand_index(a, c) == 1.0);
  CHECK(adjusted_rand_index(a, b) == adjusted_rand_index(b, a));
}

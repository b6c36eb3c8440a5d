#include <doctest.h>

#include "prefnet/parallel.hpp"
#include "prefnet/serial.hpp"
#include "prefnet/synth.hpp"

using namespace prefnet;

namespace {

const SynthResult& data() {
  static const SynthResult r = [] {
    SynthConfig cfg;
    cfg.users = 8000;
    cfg.tracks = 4000;
    cfg.female_fraction = 0.45;
    cfg.unknown_gender_fraction = 0.1;
    cfg.missing_birth_fraction = 0.05;
    cfg.undated_every = 9;
    return generate(cfg, 123);
  }();
  return r;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  const auto& ds = data().dataset;
  const auto g = build_graph(ds);
  const auto tracks = map_tags_to_tracks(ds);
  const auto assignment = detect_communities(g, {1});
  const auto wg = WeightedGraph::from_bipartite(g);
  std::vector<CommunityLabel> labels(assignment.user_community);
  labels.insert(labels.end(), assignment.track_community.begin(), assignment.track_community.end());

  const auto ref_attention = serial::attention_by_node(g);
  const auto ref_users = serial::map_tags_to_users(ds, tracks);
  const auto ref_q = serial::modularity(wg, labels);
  const auto ref_counts = serial::user_community_counts(ds, g, assignment);

  for (int threads : {1, 2, 4}) {
    CAPTURE(threads);
    set_thread_count(threads);
    const auto att = attention_by_node(g);
    REQUIRE(att.size() == ref_attention.size());
    for (std::size_t t = 0; t < att.size(); ++t) CHECK(att[t] == doctest::Approx(ref_attention[t]).epsilon(1e-12));
    CHECK(map_tags_to_users(ds, tracks) == ref_users);
    CHECK(modularity(wg, labels) == doctest::Approx(ref_q).epsilon(1e-12));
    CHECK(user_community_counts(ds, g, assignment) == ref_counts);

    for (auto gender : {GenderFilter::all, GenderFilter::female}) {
      const auto par = attention_matrix(ds, g, gender);
      const auto ref = serial::attention_matrix(ds, gender);
      CHECK(par.release_years == ref.release_years);
      CHECK(par.birth_years == ref.birth_years);
      CHECK(par.cohort_sizes == ref.cohort_sizes);
      CHECK(par.users_without_birth_year == ref.users_without_birth_year);
      REQUIRE(par.values.size() == ref.values.size());
      for (std::size_t i = 0; i < par.values.size(); ++i)
        CHECK(par.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-12));
    }
  }
  set_thread_count(0);
}

TEST_CASE("parallel results do not depend on the thread count") {
  const auto& ds = data().dataset;
  const auto g = build_graph(ds);
  set_thread_count(1);
  const auto a1 = attention_by_node(g);
  const auto m1 = attention_matrix(ds, g);
  const auto g1 = global_attention(ds, g);
  const auto c1 = detect_communities(g, {9});
  set_thread_count(4);
  CHECK(attention_by_node(g) == a1);
  CHECK(attention_matrix(ds, g).values == m1.values);
  CHECK(global_attention(ds, g).share == g1.share);
  const auto c4 = detect_communities(g, {9});
  CHECK(c4.user_community == c1.user_community);
  CHECK(c4.modularity == c1.modularity);
  set_thread_count(0);
}

#include <doctest.h>

#include "fixtures.hpp"
#include "prefnet/analysis.hpp"
#include "prefnet/synth.hpp"
#include "prefnet/tagmap.hpp"

using namespace prefnet;

namespace {

struct Prepared {
  SynthResult synth;
  BipartiteGraph graph;
  std::vector<UserIndex> members;
  std::vector<TagVectorSet> user_tags;
  CommunityAssignment communities;
  std::vector<CommunityCounts> counts;
};

Prepared prepare(const SynthConfig& cfg, std::uint64_t seed) {
  Prepared p{generate(cfg, seed), {}, {}, {}, {}, {}};
  const auto& ds = p.synth.dataset;
  p.graph = build_graph(ds);
  p.members = graph_members(ds, p.graph);
  p.user_tags = map_tags_to_users(ds, map_tags_to_tracks(ds));
  p.communities = detect_communities(p.graph, {seed});
  p.counts = user_community_counts(ds, p.graph, p.communities);
  return p;
}

SynthConfig regional_config() {
  SynthConfig cfg;
  cfg.users = 6000;
  cfg.tracks = 2000;
  cfg.max_track_age = 20;
  cfg.regions = 12;
  cfg.income_block_link = 0.8;
  cfg.female_fraction = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("constant indicator gives absent correlations") {
  auto p = prepare(regional_config(), 1);
  std::vector<EconomicRow> rows;
  for (const auto& code : p.synth.truth.region_codes) rows.push_back({code, RegionLevel::province, "income", 1000.0, ""});
  const EconomicTable flat(rows);
  const auto r = regional_analysis(p.synth.dataset, p.members, flat, p.user_tags, p.counts,
                                   p.communities.community_count);
  CHECK(r.regions.size() == 12);
  for (const auto& cls : r.ranked_tags)
    for (const auto& t : cls) CHECK(!t.correlation.r);
  for (const auto& m : r.metrics) CHECK(!m.correlation.r);
}

TEST_CASE("income-linked block tags rank first and within diversity falls with income") {
  auto p = prepare(regional_config(), 2);
  const auto r = regional_analysis(p.synth.dataset, p.members, p.synth.economics, p.user_tags, p.counts,
                                   p.communities.community_count);
  REQUIRE(r.regions.size() == 12);
  CHECK(r.users_without_region == 0);
  for (std::size_t c = 0; c < r.ranked_tags.size(); ++c) {
    REQUIRE(!r.ranked_tags[c].empty());
    CHECK(r.ranked_tags[c].front().tag == p.synth.truth.block_tags[0][c]);
    CHECK(*r.ranked_tags[c].front().correlation.r > 0.5);
  }
  for (const auto& m : r.metrics)
    if (m.metric == "tag_diversity_within") CHECK(*m.correlation.r < 0.0);
}

TEST_CASE("users without a region are dropped and counted") {
  fixture::Builder b;
  for (int u = 0; u < 12; ++u) {
    auto ui = b.user("u" + std::to_string(u), 1995, u % 2 ? Gender::male : Gender::female,
                     u < 10 ? std::optional<std::string>("P" + std::to_string(u % 5)) : std::nullopt);
    b.favorite(ui, {"t" + std::to_string(u % 3)});
  }
  const auto ds = b.build();
  const auto g = build_graph(ds);
  const auto members = graph_members(ds, g);
  std::vector<TagVectorSet> tags(ds.users().size(), TagVectorSet::zeros(ds.schema()));
  std::vector<CommunityCounts> counts(ds.users().size());
  std::vector<EconomicRow> rows;
  for (int r = 0; r < 4; ++r) rows.push_back({"P" + std::to_string(r), RegionLevel::province, "income", 1.0 + r, ""});
  RegionalOptions opt;
  opt.min_users = 2;
  const auto r = regional_analysis(ds, members, EconomicTable(rows), tags, counts, 0, opt);
  CHECK(r.users_without_region == 2);
  CHECK(r.regions_without_indicator == 1);  // P4
  CHECK(r.regions.size() == 4);
}

TEST_CASE("gender kld shrinks with the planted skew") {
  std::vector<double> kld;
  for (double skew : {0.9, 0.6, 0.3, 0.0}) {
    SynthConfig cfg;
    cfg.users = 4000;
    cfg.tracks = 1600;
    cfg.max_track_age = 20;
    cfg.female_fraction = 0.5;
    cfg.gender_skew = skew;
    auto p = prepare(cfg, 5);
    const auto males = filter_gender(p.synth.dataset, p.members, Gender::male);
    const auto females = filter_gender(p.synth.dataset, p.members, Gender::female);
    kld.push_back(*tag_kld(p.user_tags, males, females, 1).value);
  }
  for (std::size_t i = 1; i < kld.size(); ++i) CHECK(kld[i] < kld[i - 1]);
}

TEST_CASE("divergence by age and age modes") {
  SynthConfig cfg;
  cfg.users = 3000;
  cfg.tracks = 1500;
  cfg.max_track_age = 20;
  cfg.female_fraction = 0.5;
  auto p = prepare(cfg, 9);
  const auto rows = gender_divergence_by_age(p.synth.dataset, p.members, p.user_tags, p.counts,
                                             p.communities.community_count);
  CHECK(rows.size() == 29);
  for (const auto& r : rows) {
    CHECK(r.tag_kld.size() == 5);
    CHECK(r.males + r.females > 0);
    for (const auto& d : r.tag_kld)
      if (d.value) CHECK(*d.value >= 0.0);
  }
  const auto modes = age_mode_table(p.synth.dataset, p.members, p.user_tags);
  CHECK(modes.size() == 6 + 24 + 12 + 13 + 17);
  for (const auto& m : modes) {
    CHECK(m.stage_means.size() == 3);
    if (m.mode) CHECK(m.mode->size() == 2);
  }
}

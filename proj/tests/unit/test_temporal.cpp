#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "prefnet/synth.hpp"
#include "prefnet/temporal.hpp"

using namespace prefnet;
using fixture::Builder;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

const SynthResult& synth_fixture() {
  static const SynthResult r = [] {
    SynthConfig cfg;
    cfg.users = 5000;
    cfg.tracks = 3000;
    cfg.max_track_age = 30;
    cfg.female_fraction = 0.5;
    cfg.missing_birth_fraction = 0.05;
    return generate(cfg, 21);
  }();
  return r;
}

}  // namespace

TEST_CASE("one user two dated tracks") {
  Builder b;
  b.track("x", 2010);
  b.track("y", 2012);
  b.favorite(b.user("u", 1995), {"x", "y"});
  const auto ds = b.build();
  const auto m = attention_matrix(ds, build_graph(ds));
  CHECK(m.release_years == std::vector<int>{2010, 2011, 2012});
  CHECK(m.birth_years == std::vector<int>{1995});
  CHECK(m.column(0) == std::vector<double>{0.5, 0.0, 0.5});
  const auto q = release_year_quantiles(m);
  REQUIRE(q.size() == 1);
  CHECK(q[0].q25 == 2010);
  CHECK(q[0].median == 2010);
  CHECK(q[0].q75 == 2012);
}

TEST_CASE("identical users and one release year") {
  Builder b;
  b.track("x", 2000);
  b.track("y", 2000);
  for (int u = 0; u < 3; ++u) b.favorite(b.user("u" + std::to_string(u), 1990), {"x", "y"});
  const auto ds = b.build();
  const auto g = build_graph(ds);
  const auto m = attention_matrix(ds, g);
  CHECK(m.column(0) == std::vector<double>{1.0});
  CHECK(m.cohort_sizes[0] == 3);
  CHECK(global_attention(ds, g).share == std::vector<double>{1.0});
}

TEST_CASE("flat preference gives I = 1") {
  Builder b;
  for (int y = 0; y < 5; ++y)
    for (int k = 0; k < 4; ++k) b.track("t" + std::to_string(y) + "_" + std::to_string(k), 2000 + y);
  for (int u = 0; u < 8; ++u) {
    auto ui = b.user("u" + std::to_string(u), 1990);
    Playlist p;
    p.playlist_id = "fp" + std::to_string(u);
    p.owner = ui;
    p.kind = PlaylistKind::favorite;
    for (int y = 0; y < 5; ++y) p.tracks.push_back(static_cast<TrackIndex>(y * 4 + u % 4));
    b.playlists.push_back(p);
  }
  const auto ds = b.build();
  const auto curve = mean_global_preference(ds, build_graph(ds));
  REQUIRE(curve.points.size() == 5);
  for (const auto& p : curve.points) CHECK(p.preference == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(curve.points.front().years_since_release == 2016 - 2000);
  CHECK(curve.dated_tracks == 20);
}

TEST_CASE("conservation identities on synthetic data") {
  const auto& ds = synth_fixture().dataset;
  const auto g = build_graph(ds);
  const auto m = attention_matrix(ds, g);
  for (std::size_t j = 0; j < m.birth_years.size(); ++j) {
    if (!m.cohort_sizes[j]) continue;
    CHECK(std::abs(sum(m.column(j)) - 1.0) < 1e-9);
  }
  for (double v : m.values) CHECK(v >= 0.0);

  const auto all = global_attention(ds, g);
  CHECK(std::abs(sum(all.share) - 1.0) < 1e-9);

  // A^G over known-birth users is the n_j weighted mean of columns
  const auto known = global_attention(ds, g, GenderFilter::all, true);
  double n = 0;
  for (auto s : m.cohort_sizes) n += static_cast<double>(s);
  CHECK(known.users == static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < m.release_years.size(); ++i) {
    double w = 0;
    for (std::size_t j = 0; j < m.birth_years.size(); ++j) w += static_cast<double>(m.cohort_sizes[j]) * m.at(i, j);
    CHECK(std::abs(known.share[i] - w / n) < 1e-9);
  }

  const auto curve = mean_global_preference(ds, g);
  double rho_i = 0;
  for (const auto& p : curve.points) rho_i += p.track_share * p.preference;
  CHECK(std::abs(rho_i - 1.0) < 1e-9);

  const auto r = relative_attention(m, known);
  for (const auto& v : r.values)
    if (v) CHECK(*v >= 0.0);
  for (int by : m.birth_years) {
    const auto s = sensitivity(r, by);
    if (!s) continue;
    double mean = 0;
    for (const auto& p : *s) mean += p.sensitivity;
    CHECK(std::abs(mean / static_cast<double>(s->size()) - 1.0) < 1e-9);
  }
}

TEST_CASE("gender filters partition the population") {
  const auto& ds = synth_fixture().dataset;
  const auto g = build_graph(ds);
  const auto all = global_attention(ds, g);
  const auto male = global_attention(ds, g, GenderFilter::male);
  const auto female = global_attention(ds, g, GenderFilter::female);
  CHECK(male.users + female.users == all.users);  // no unknown gender in this fixture
  for (std::size_t i = 0; i < all.share.size(); ++i)
    CHECK(all.share[i] ==
          doctest::Approx((male.share[i] * male.users + female.share[i] * female.users) / all.users).epsilon(1e-12));
}

TEST_CASE("single cohort has R = 1 and S = 1") {
  Builder b;
  b.track("a", 2000);
  b.track("b", 2003);
  b.track("c", 2005);
  b.favorite(b.user("u1", 1990), {"a", "b"});
  b.favorite(b.user("u2", 1990), {"b", "c", "a"});
  const auto ds = b.build();
  const auto g = build_graph(ds);
  const auto r = relative_attention(attention_matrix(ds, g), global_attention(ds, g, GenderFilter::all, true));
  for (std::size_t i = 0; i < r.release_years.size(); ++i)
    if (r.at(i, 0)) CHECK(*r.at(i, 0) == doctest::Approx(1.0).epsilon(1e-14));
  const auto s = sensitivity(r, 1990);
  REQUIRE(s);
  for (const auto& p : *s) CHECK(p.sensitivity == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s->front().age_at_release == 10);
}

TEST_CASE("mirrored cohorts") {
  Builder b;
  for (int k = 0; k < 4; ++k) {
    b.track("old" + std::to_string(k), 2000);
    b.track("new" + std::to_string(k), 2001);
  }
  // cohort 1980 favours 2000 three to one, cohort 1990 the reverse
  b.favorite(b.user("a", 1980), {"old0", "old1", "old2", "new0"});
  b.favorite(b.user("b", 1990), {"new0", "new1", "new2", "old0"});
  const auto ds = b.build();
  const auto g = build_graph(ds);
  const auto m = attention_matrix(ds, g);
  const auto r = relative_attention(m, global_attention(ds, g, GenderFilter::all, true));
  REQUIRE(r.birth_years.size() == 11);
  const std::size_t j1 = 0, j2 = 10;
  CHECK(*r.at(0, j1) == doctest::Approx(1.5));
  CHECK(*r.at(1, j1) == doctest::Approx(0.5));
  CHECK(*r.at(0, j1) == doctest::Approx(*r.at(1, j2)));
  CHECK(*r.at(1, j1) == doctest::Approx(*r.at(0, j2)));
  CHECK(!r.at(0, 5));  // empty cohort
  CHECK(!sensitivity(r, 1985));
  const auto by_age = mean_sensitivity_by_age(r);
  CHECK(by_age.size() == 4);  // ages 20, 21, 10, 11
}

TEST_CASE("axis mismatch is an error") {
  AttentionMatrix m;
  m.release_years = {2000, 2001};
  m.birth_years = {1990};
  m.values = {0.5, 0.5};
  m.cohort_sizes = {1};
  GlobalAttention g;
  g.release_years = {2000};
  g.share = {1.0};
  CHECK_THROWS(relative_attention(m, g));
}

TEST_CASE("popularity bands") {
  Builder b;
  for (int t = 0; t < 20; ++t) b.track("t" + std::to_string(t), 2010);
  // track t_k followed by 20 - k users
  for (int u = 0; u < 20; ++u) {
    auto ui = b.user("u" + std::to_string(u));
    Playlist p;
    p.playlist_id = "fp" + std::to_string(u);
    p.owner = ui;
    p.kind = PlaylistKind::favorite;
    for (int t = 0; t <= u; ++t) p.tracks.push_back(static_cast<TrackIndex>(t));
    b.playlists.push_back(p);
  }
  const auto ds = b.build();
  const auto g = build_graph(ds);
  const auto bands = popularity_bands(ds, g);
  CHECK(bands[0] == PopularityBand::hot);
  for (int t = 1; t <= 4; ++t) CHECK(bands[t] == PopularityBand::middle);
  for (int t = 5; t < 20; ++t) CHECK(bands[t] == PopularityBand::unpopular);

  const auto hot = mean_global_preference(ds, g, {GenderFilter::all, PopularityBand::hot});
  CHECK(hot.dated_tracks == 1);
  REQUIRE(hot.points.size() == 1);
  CHECK(hot.points[0].track_share == 1.0);
}

TEST_CASE("undated tracks count in the reported fraction only") {
  Builder b;
  b.track("d", 2010);
  b.track("u");
  b.favorite(b.user("x", 1990), {"d", "u"});
  b.favorite(b.user("y", 1990), {"u"});
  const auto ds = b.build();
  const auto g = build_graph(ds);
  const auto curve = mean_global_preference(ds, g);
  CHECK(curve.dated_tracks == 1);
  CHECK(curve.undated_fraction == 0.5);
  const auto m = attention_matrix(ds, g);
  CHECK(m.users_without_dated_tracks == 1);
}

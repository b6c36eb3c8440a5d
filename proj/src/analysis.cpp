#include "prefnet/analysis.hpp"

#include <algorithm>

#include "prefnet/tagmap.hpp"

namespace prefnet {

std::vector<UserIndex> graph_members(const Dataset& dataset, const BipartiteGraph& graph) {
  std::vector<UserIndex> out;
  for (std::size_t u = 0; u < dataset.users().size(); ++u)
    if (graph.user_node(static_cast<UserIndex>(u))) out.push_back(static_cast<UserIndex>(u));
  return out;
}

std::map<int, std::vector<UserIndex>> members_by_age(const Dataset& dataset, std::span<const UserIndex> members,
                                                     int min_age, int max_age) {
  std::map<int, std::vector<UserIndex>> out;
  for (auto u : members) {
    const auto age = dataset.age(u);
    if (age && *age >= min_age && *age <= max_age) out[*age].push_back(u);
  }
  return out;
}

std::vector<UserIndex> filter_gender(const Dataset& dataset, std::span<const UserIndex> members, Gender g) {
  std::vector<UserIndex> out;
  for (auto u : members)
    if (dataset.users()[u].gender == g) out.push_back(u);
  return out;
}

std::vector<AgeDivergence> gender_divergence_by_age(const Dataset& dataset, std::span<const UserIndex> members,
                                                    std::span<const TagVectorSet> user_tags,
                                                    std::span<const CommunityCounts> counts,
                                                    std::size_t community_count, int min_age, int max_age) {
  std::vector<AgeDivergence> out;
  const std::size_t classes = dataset.schema().class_count();
  for (const auto& [age, group] : members_by_age(dataset, members, min_age, max_age)) {
    const auto males = filter_gender(dataset, group, Gender::male);
    const auto females = filter_gender(dataset, group, Gender::female);
    AgeDivergence row;
    row.age = age;
    row.males = males.size();
    row.females = females.size();
    for (std::size_t c = 0; c < classes; ++c) {
      row.tag_kld.push_back(tag_kld(user_tags, males, females, c));
      row.tag_jsd.push_back(tag_jsd(user_tags, males, females, c));
    }
    row.community_kld = community_kld(counts, males, females, community_count);
    row.community_jsd = community_jsd(counts, males, females, community_count);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<AgeModeRow> age_mode_table(const Dataset& dataset, std::span<const UserIndex> members,
                                       std::span<const TagVectorSet> user_tags, const AgeModeOptions& options) {
  int lo = options.stages.front().first_age, hi = options.stages.front().last_age;
  for (const auto& s : options.stages) {
    lo = std::min(lo, s.first_age);
    hi = std::max(hi, s.last_age);
  }
  std::map<int, TagVectorSet> by_age;
  for (const auto& [age, group] : members_by_age(dataset, members, lo, hi))
    by_age.emplace(age, map_tags_to_group(user_tags, group));

  std::vector<AgeModeRow> out;
  const auto& schema = dataset.schema();
  for (std::size_t c = 0; c < schema.class_count(); ++c) {
    for (std::size_t k = 0; k < schema.cardinality(c); ++k) {
      std::map<int, double> strength;
      for (const auto& [age, v] : by_age) strength[age] = v.classes[c][k];
      AgeModeRow row;
      row.tag_class = c;
      row.tag = k;
      row.stage_means = stage_means(strength, options.stages);
      row.mode = classify_age_mode(row.stage_means, options.threshold);
      out.push_back(std::move(row));
    }
  }
  return out;
}

namespace {

Correlation correlate(const std::vector<double>& x, const std::vector<std::optional<double>>& y) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i]) {
      xs.push_back(x[i]);
      ys.push_back(*y[i]);
    }
  if (xs.size() < 3) {
    Correlation c;
    c.n = xs.size();
    c.reason = "fewer than 3 regions with a defined value";
    return c;
  }
  return pearson(xs, ys);
}

}  // namespace

RegionalAnalysis regional_analysis(const Dataset& dataset, std::span<const UserIndex> members,
                                   const EconomicTable& economics, std::span<const TagVectorSet> user_tags,
                                   std::span<const CommunityCounts> counts, std::size_t community_count,
                                   const RegionalOptions& options) {
  RegionalAnalysis out;
  out.level = options.level;
  out.indicator = options.indicator;
  const auto& schema = dataset.schema();
  const std::size_t classes = schema.class_count();

  std::map<std::string, std::vector<UserIndex>> groups;
  for (auto u : members) {
    const auto& user = dataset.users()[u];
    const auto& region = options.level == RegionLevel::province ? user.province : user.city;
    if (!region) {
      ++out.users_without_region;
      continue;
    }
    groups[*region].push_back(u);
  }
  const auto values = economics.indicator(options.level, options.indicator);

  for (const auto& [region, group] : groups) {
    if (group.size() < options.min_users) {
      ++out.regions_too_small;
      continue;
    }
    const auto it = values.find(region);
    if (it == values.end()) {
      ++out.regions_without_indicator;
      continue;
    }
    RegionRow row;
    row.region = region;
    row.users = group.size();
    row.indicator = it->second;
    row.tags = map_tags_to_group(user_tags, group);
    const auto males = filter_gender(dataset, group, Gender::male);
    const auto females = filter_gender(dataset, group, Gender::female);
    for (std::size_t c = 0; c < classes; ++c) {
      row.tag_diversity.push_back(tag_diversity(user_tags, group, c));
      row.gender_kld.push_back(tag_kld(user_tags, males, females, c));
    }
    if (community_count >= 2) row.community_diversity = community_diversity(counts, group, community_count);
    out.regions.push_back(std::move(row));
  }

  std::vector<double> x;
  for (const auto& r : out.regions) x.push_back(r.indicator);
  const std::size_t n = out.regions.size();
  if (n < 3) return out;

  out.ranked_tags.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < schema.cardinality(c); ++k) {
      std::vector<std::optional<double>> y;
      for (const auto& r : out.regions) y.push_back(r.tags.classes[c][k]);
      out.ranked_tags[c].push_back({c, k, correlate(x, y)});
    }
    std::stable_sort(out.ranked_tags[c].begin(), out.ranked_tags[c].end(),
                     [](const TagCorrelation& a, const TagCorrelation& b) {
                       if (a.correlation.r.has_value() != b.correlation.r.has_value()) return a.correlation.r.has_value();
                       if (!a.correlation.r) return false;
                       return *a.correlation.r > *b.correlation.r;
                     });
  }

  auto add_metric = [&](std::string name, std::optional<std::size_t> c, auto&& get) {
    std::vector<std::optional<double>> y;
    for (const auto& r : out.regions) y.push_back(get(r));
    out.metrics.push_back({std::move(name), c, correlate(x, y)});
  };
  for (std::size_t c = 0; c < classes; ++c) {
    add_metric("tag_diversity_individual", c, [c](const RegionRow& r) { return r.tag_diversity[c].mean_individual; });
    add_metric("tag_diversity_aggregated", c, [c](const RegionRow& r) { return r.tag_diversity[c].aggregated; });
    add_metric("tag_diversity_within", c, [c](const RegionRow& r) { return r.tag_diversity[c].within; });
    add_metric("gender_kld", c, [c](const RegionRow& r) { return r.gender_kld[c].value; });
  }
  add_metric("community_diversity_individual", std::nullopt,
             [](const RegionRow& r) { return r.community_diversity.mean_individual; });
  add_metric("community_diversity_aggregated", std::nullopt,
             [](const RegionRow& r) { return r.community_diversity.aggregated; });
  add_metric("community_diversity_within", std::nullopt,
             [](const RegionRow& r) { return r.community_diversity.within; });

  // Per-gender tag strengths against the indicator, summarized by sign.
  for (Gender g : {Gender::male, Gender::female}) {
    std::vector<std::optional<TagVectorSet>> vecs;
    for (const auto& r : out.regions) {
      const auto sub = filter_gender(dataset, groups[r.region], g);
      vecs.push_back(sub.empty() ? std::nullopt : std::optional(map_tags_to_group(user_tags, sub)));
    }
    for (std::size_t c = 0; c < classes; ++c) {
      GenderCorrelationSummary s;
      s.gender = g;
      s.tag_class = c;
      double pos = 0.0, neg = 0.0;
      for (std::size_t k = 0; k < schema.cardinality(c); ++k) {
        std::vector<std::optional<double>> y;
        for (const auto& v : vecs) y.push_back(v ? std::optional(v->classes[c][k]) : std::nullopt);
        const auto corr = correlate(x, y);
        if (!corr.r) continue;
        if (*corr.r > 0) {
          pos += *corr.r;
          ++s.positive;
        } else if (*corr.r < 0) {
          neg += *corr.r;
          ++s.negative;
        }
      }
      if (s.positive) s.mean_positive = pos / static_cast<double>(s.positive);
      if (s.negative) s.mean_negative = neg / static_cast<double>(s.negative);
      out.gender_summary.push_back(s);
    }
  }
  return out;
}

}  // namespace prefnet

#include "prefnet/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "prefnet/tagmap.hpp"

namespace prefnet {

std::optional<double> normalized_entropy(std::span<const double> distribution, std::size_t categories) {
  if (categories < 2) throw ValidationError("diversity needs at least 2 categories");
  double total = 0.0;
  for (double x : distribution) total += x;
  if (total <= 0.0) return std::nullopt;
  double h = 0.0;
  for (double x : distribution) {
    if (x <= 0.0) continue;
    const double p = x / total;
    h -= p * std::log(p);
  }
  const double d = h / std::log(static_cast<double>(categories));
  // One-hot input gives exactly 0; clamp rounding just above 1 for uniform input.
  return std::clamp(d, 0.0, 1.0);
}

GroupDiversity tag_diversity(std::span<const TagVectorSet> user_tags, std::span<const UserIndex> members,
                             std::size_t tag_class) {
  GroupDiversity out;
  out.members = members.size();
  if (members.empty()) return out;
  const std::size_t m = user_tags[members.front()].classes.at(tag_class).size();
  double sum = 0.0;
  std::size_t defined = 0;
  std::vector<double> group(m, 0.0);
  for (auto u : members) {
    const auto& v = user_tags[u].classes[tag_class];
    if (auto d = individual_tag_diversity(v, m)) {
      sum += *d;
      ++defined;
    } else {
      ++out.excluded;
    }
    for (std::size_t i = 0; i < m; ++i) group[i] += v[i];
  }
  if (defined) out.mean_individual = sum / static_cast<double>(defined);
  out.aggregated = aggregated_tag_diversity(group, m);
  if (out.mean_individual && out.aggregated) out.within = *out.aggregated - *out.mean_individual;
  return out;
}

std::optional<double> within_group_tag_diversity(std::span<const TagVectorSet> user_tags,
                                                 std::span<const UserIndex> members, std::size_t tag_class) {
  return tag_diversity(user_tags, members, tag_class).within;
}

std::vector<CommunityCounts> user_community_counts(const Dataset& dataset, const BipartiteGraph& graph,
                                                   const CommunityAssignment& assignment) {
  std::vector<CommunityCounts> out(dataset.users().size());
  const auto n = static_cast<std::int64_t>(graph.user_count());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t ui = 0; ui < n; ++ui) {
    const auto u = static_cast<NodeIndex>(ui);
    std::vector<CommunityLabel> labels;
    labels.reserve(graph.fp_length(u));
    for (auto t : graph.user_tracks(u)) labels.push_back(assignment.track_community[t]);
    std::sort(labels.begin(), labels.end());
    CommunityCounts counts;
    for (std::size_t i = 0; i < labels.size();) {
      std::size_t j = i;
      while (j < labels.size() && labels[j] == labels[i]) ++j;
      counts.emplace_back(labels[i], static_cast<std::uint32_t>(j - i));
      i = j;
    }
    out[graph.dataset_user(u)] = std::move(counts);
  }
  return out;
}

std::optional<double> individual_community_diversity(const CommunityCounts& counts,
                                                     std::size_t community_count) {
  if (community_count < 2) throw ValidationError("community diversity needs at least 2 communities");
  std::vector<double> v;
  v.reserve(counts.size());
  for (const auto& [label, n] : counts) v.push_back(static_cast<double>(n));
  return normalized_entropy(v, community_count);
}

std::vector<double> group_community_distribution(std::span<const CommunityCounts> counts,
                                                 std::span<const UserIndex> members,
                                                 std::size_t community_count) {
  std::vector<double> q(community_count, 0.0);
  double total = 0.0;
  for (auto u : members)
    for (const auto& [label, n] : counts[u]) {
      q[label] += static_cast<double>(n);
      total += static_cast<double>(n);
    }
  if (total > 0.0)
    for (auto& x : q) x /= total;
  return q;
}

std::optional<double> aggregated_community_diversity(std::span<const CommunityCounts> counts,
                                                     std::span<const UserIndex> members,
                                                     std::size_t community_count) {
  if (community_count < 2) throw ValidationError("community diversity needs at least 2 communities");
  return normalized_entropy(group_community_distribution(counts, members, community_count), community_count);
}

GroupDiversity community_diversity(std::span<const CommunityCounts> counts,
                                   std::span<const UserIndex> members, std::size_t community_count) {
  GroupDiversity out;
  out.members = members.size();
  double sum = 0.0;
  std::size_t defined = 0;
  for (auto u : members) {
    if (auto d = individual_community_diversity(counts[u], community_count)) {
      sum += *d;
      ++defined;
    } else {
      ++out.excluded;
    }
  }
  if (defined) out.mean_individual = sum / static_cast<double>(defined);
  out.aggregated = aggregated_community_diversity(counts, members, community_count);
  if (out.mean_individual && out.aggregated) out.within = *out.aggregated - *out.mean_individual;
  return out;
}

std::optional<double> within_group_community_diversity(std::span<const CommunityCounts> counts,
                                                       std::span<const UserIndex> members,
                                                       std::size_t community_count) {
  return community_diversity(counts, members, community_count).within;
}

Divergence symmetrized_kld(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("distributions differ in length");
  Divergence out;
  double sum = 0.0;
  bool shared = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && q[i] > 0.0) {
      shared = true;
      // KL(P||Q) + KL(Q||P) = sum (p - q)(ln p - ln q). Each term is >= 0 and
      // swapping P and Q negates both factors, so the result is exactly symmetric.
      sum += (p[i] - q[i]) * (std::log(p[i]) - std::log(q[i]));
    } else {
      out.dropped_p += p[i];
      out.dropped_q += q[i];
    }
  }
  if (shared) out.value = 0.5 * sum;
  return out;
}

double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("distributions differ in length");
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double tp = p[i] > 0.0 ? p[i] * std::log(p[i] / m) : 0.0;
    const double tq = q[i] > 0.0 ? q[i] * std::log(q[i] / m) : 0.0;
    js += 0.5 * (tp + tq);  // commutative per term, so swapping P and Q gives the same bits
  }
  return std::clamp(js, 0.0, std::log(2.0));
}

namespace {

std::optional<std::pair<std::vector<double>, std::vector<double>>> tag_pair(
    std::span<const TagVectorSet> user_tags, std::span<const UserIndex> a, std::span<const UserIndex> b,
    std::size_t tag_class) {
  if (a.empty() || b.empty()) return std::nullopt;
  auto ga = map_tags_to_group(user_tags, a);
  auto gb = map_tags_to_group(user_tags, b);
  return std::pair{std::move(ga.classes.at(tag_class)), std::move(gb.classes.at(tag_class))};
}

}  // namespace

Divergence tag_kld(std::span<const TagVectorSet> user_tags, std::span<const UserIndex> group_a,
                   std::span<const UserIndex> group_b, std::size_t tag_class) {
  auto pair = tag_pair(user_tags, group_a, group_b, tag_class);
  if (!pair) return {};
  return symmetrized_kld(pair->first, pair->second);
}

Divergence community_kld(std::span<const CommunityCounts> counts, std::span<const UserIndex> group_a,
                         std::span<const UserIndex> group_b, std::size_t community_count) {
  if (group_a.empty() || group_b.empty()) return {};
  const auto qa = group_community_distribution(counts, group_a, community_count);
  const auto qb = group_community_distribution(counts, group_b, community_count);
  return symmetrized_kld(qa, qb);
}

std::optional<double> tag_jsd(std::span<const TagVectorSet> user_tags, std::span<const UserIndex> group_a,
                              std::span<const UserIndex> group_b, std::size_t tag_class) {
  auto pair = tag_pair(user_tags, group_a, group_b, tag_class);
  if (!pair) return std::nullopt;
  const auto sum = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  if (sum(pair->first) <= 0.0 || sum(pair->second) <= 0.0) return std::nullopt;
  return jensen_shannon(pair->first, pair->second);
}

std::optional<double> community_jsd(std::span<const CommunityCounts> counts,
                                    std::span<const UserIndex> group_a,
                                    std::span<const UserIndex> group_b, std::size_t community_count) {
  if (group_a.empty() || group_b.empty()) return std::nullopt;
  const auto qa = group_community_distribution(counts, group_a, community_count);
  const auto qb = group_community_distribution(counts, group_b, community_count);
  double sa = 0.0, sb = 0.0;
  for (double x : qa) sa += x;
  for (double x : qb) sb += x;
  if (sa <= 0.0 || sb <= 0.0) return std::nullopt;
  return jensen_shannon(qa, qb);
}

}  // namespace prefnet

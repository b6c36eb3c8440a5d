#include "prefnet/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>

#include <json.hpp>

#include "prefnet/community.hpp"
#include "prefnet/graph.hpp"
#include "prefnet/io.hpp"
#include "prefnet/metrics.hpp"
#include "prefnet/rng.hpp"
#include "prefnet/tagmap.hpp"

namespace prefnet {

using nlohmann::json;
namespace fs = std::filesystem;

TagLevel parse_tag_level(std::string_view text) {
  if (text == "track") return TagLevel::track;
  if (text == "user") return TagLevel::user;
  if (text == "group") return TagLevel::group;
  throw ValidationError("unknown tag level '" + std::string(text) + "'");
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

using io::format_double;
using io::format_optional;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json vector_set_json(const TagSchema& schema, const TagVectorSet& set) {
  json j = json::object();
  for (std::size_t c = 0; c < schema.class_count(); ++c) j[schema.tag_class(c).name] = set.classes[c];
  return j;
}

json bigaussian_json(const BigaussianParams& p) {
  return {{"y0", p.y0}, {"xc", p.xc}, {"H", p.height}, {"w1", p.w1}, {"w2", p.w2}};
}

const std::map<std::string, std::vector<std::string>>& dependencies() {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"ingest", {}},
      {"graph", {"ingest"}},
      {"tagmap", {"graph"}},
      {"communities", {"graph", "tagmap"}},
      {"diversity", {"tagmap", "communities"}},
      {"divergence", {"tagmap", "communities"}},
      {"temporal", {"graph"}},
      {"fit", {"temporal"}},
      {"agemode", {"tagmap"}},
      {"regional", {"tagmap", "communities"}},
  };
  return deps;
}

void close_over(const std::string& stage, std::set<std::string>& run) {
  if (!run.insert(stage).second) return;
  for (const auto& d : dependencies().at(stage)) close_over(d, run);
}

struct TemporalState {
  AttentionMatrix matrix;
  GlobalAttention global;
  RelativeAttention relative;
  DecayCurve decay;
  std::vector<AgeSensitivity> by_age;
};

struct Context {
  const PipelineConfig& cfg;
  std::set<std::string> targets;
  Dataset dataset;
  LoadReport load;
  std::optional<EconomicTable> economics;
  BipartiteGraph graph;
  std::vector<UserIndex> members;
  TrackTags track_tags;
  std::vector<TagVectorSet> user_tags;
  CommunityAssignment assignment;
  std::vector<CommunityCounts> counts;
  TemporalState temporal;
  json report = json::object();
  std::vector<std::string> files;

  bool wants(const std::string& stage) const { return targets.count(stage) > 0; }

  void emit_text(const std::string& name, std::string_view contents) {
    io::write_file(cfg.out / name, contents);
    files.push_back(name);
  }
  void emit(const std::string& name, const io::CsvWriter& csv) { emit_text(name, csv.str()); }
  void emit_json(const std::string& name, const json& j) { emit_text(name, j.dump(1) + "\n"); }

  const TagSchema& schema() const { return dataset.schema(); }
};

// ---------------------------------------------------------------------------

void stage_ingest(Context& ctx) {
  const auto& cfg = ctx.cfg;
  LoadOptions options;
  options.reference_year = cfg.reference_year;
  Dataset loaded = load_playlists(cfg.input, cfg.format, options, &ctx.load);
  const auto loaded_users = loaded.users().size();
  if (cfg.economics) ctx.economics = load_economics(*cfg.economics);
  if (!cfg.exclude_regions.empty()) loaded = region_filter(loaded, cfg.exclude_regions);
  const auto after_region = loaded.users().size();
  if (cfg.age_filter) loaded = filter_demographics(loaded, cfg.demographics);
  ctx.dataset = std::move(loaded);

  std::size_t without_birth = 0;
  for (const auto& u : ctx.dataset.users()) without_birth += !u.birth_year;
  ctx.report["dataset"] = {
      {"records", ctx.load.records},
      {"users_loaded", loaded_users},
      {"users_after_region_filter", after_region},
      {"users", ctx.dataset.users().size()},
      {"users_without_birth_year", without_birth},
      {"tracks", ctx.dataset.tracks().size()},
      {"playlists", ctx.dataset.playlists().size()},
      {"release_year_conflicts", ctx.load.release_year_conflicts},
      {"owner_conflicts", ctx.load.owner_conflicts},
      {"reference_year", ctx.dataset.reference_year()},
      {"age_filter", cfg.age_filter ? json{{"min_age", cfg.demographics.min_age},
                                           {"max_age", cfg.demographics.max_age},
                                           {"exclude_default_birthdate", cfg.demographics.exclude_default_birthdate}}
                                     : json(nullptr)},
  };
  if (!ctx.wants("ingest")) return;
  io::CsvWriter csv({"age", "gender", "users", "fp_owners", "mean_fp_length"});
  for (const auto& row : cohort_summary(ctx.dataset))
    csv.row({std::to_string(row.age), std::string(to_string(row.gender)), std::to_string(row.users),
             std::to_string(row.fp_owners), format_optional(row.mean_fp_length)});
  ctx.emit("cohorts.csv", csv);
  if (!ctx.load.conflict_log.empty()) {
    std::string log;
    for (const auto& line : ctx.load.conflict_log) log += line + "\n";
    ctx.emit_text("ingest_conflicts.txt", log);
  }
}

void write_histogram(Context& ctx, const std::string& name, const Histogram& h) {
  io::CsvWriter csv({"bin_lo", "bin_hi", "count", "density"});
  for (const auto& b : h) csv.row({format_double(b.lo), format_double(b.hi), std::to_string(b.count), format_double(b.density)});
  ctx.emit(name, csv);
}

void stage_graph(Context& ctx) {
  ctx.graph = build_graph(ctx.dataset);
  ctx.members = graph_members(ctx.dataset, ctx.graph);
  const auto dist = degree_distributions(ctx.graph, ctx.cfg.bins_per_decade);
  const auto attention = attention_by_node(ctx.graph);
  double total = 0.0;
  for (double a : attention) total += a;
  ctx.report["graph"] = {
      {"users", ctx.graph.user_count()},
      {"tracks", ctx.graph.track_count()},
      {"edges", ctx.graph.edge_count()},
      {"skipped_users", ctx.graph.skipped_users()},
      {"total_attention", total},
      {"slope_fp_length", opt(log_log_slope(dist.fp_length))},
      {"slope_followers", opt(log_log_slope(dist.followers))},
      {"slope_attention", opt(log_log_slope(dist.attention))},
  };
  if (!ctx.wants("graph")) return;
  write_histogram(ctx, "degree_fp_length.csv", dist.fp_length);
  write_histogram(ctx, "degree_followers.csv", dist.followers);
  write_histogram(ctx, "degree_attention.csv", dist.attention);
  io::CsvWriter csv({"track_id", "followers", "attention"});
  for (std::size_t t = 0; t < ctx.graph.track_count(); ++t) {
    const auto node = static_cast<NodeIndex>(t);
    csv.row({ctx.dataset.tracks()[ctx.graph.dataset_track(node)].track_id, std::to_string(ctx.graph.followers(node)),
             format_double(attention[t])});
  }
  ctx.emit("attention.csv", csv);
}

/// Named user groups used by the tag, diversity and divergence outputs.
std::vector<std::pair<std::string, std::vector<UserIndex>>> user_groups(const Context& ctx) {
  std::vector<std::pair<std::string, std::vector<UserIndex>>> groups;
  groups.emplace_back("all", ctx.members);
  for (Gender g : {Gender::male, Gender::female})
    groups.emplace_back("gender=" + std::string(to_string(g)), filter_gender(ctx.dataset, ctx.members, g));
  const int lo = ctx.cfg.age_filter ? ctx.cfg.demographics.min_age : 0;
  const int hi = ctx.cfg.age_filter ? ctx.cfg.demographics.max_age : 200;
  for (const auto& [age, group] : members_by_age(ctx.dataset, ctx.members, lo, hi)) {
    groups.emplace_back("age=" + std::to_string(age), group);
    for (Gender g : {Gender::male, Gender::female})
      groups.emplace_back("age=" + std::to_string(age) + ";gender=" + std::string(to_string(g)),
                          filter_gender(ctx.dataset, group, g));
  }
  std::erase_if(groups, [](const auto& g) { return g.second.empty(); });
  return groups;
}

void stage_tagmap(Context& ctx) {
  ctx.track_tags = map_tags_to_tracks(ctx.dataset);
  ctx.user_tags = map_tags_to_users(ctx.dataset, ctx.track_tags);
  ctx.report["tags"] = {{"tagged_tracks", ctx.track_tags.tagged_tracks}, {"coverage", ctx.track_tags.coverage}};
  if (!ctx.wants("tagmap")) return;
  const auto& schema = ctx.schema();
  json doc = {{"schema_version", io::kSchemaVersion}, {"classes", json::array()}};
  for (const auto& c : schema.classes()) doc["classes"].push_back({{"name", c.name}, {"tags", c.tags}});
  json entities = json::array();
  switch (ctx.cfg.tag_level) {
    case TagLevel::track:
      doc["level"] = "track";
      for (std::size_t t = 0; t < ctx.dataset.tracks().size(); ++t)
        entities.push_back({{"id", ctx.dataset.tracks()[t].track_id},
                            {"vectors", vector_set_json(schema, ctx.track_tags.by_track[t])}});
      break;
    case TagLevel::user:
      doc["level"] = "user";
      for (auto u : ctx.members)
        entities.push_back(
            {{"id", ctx.dataset.users()[u].user_id}, {"vectors", vector_set_json(schema, ctx.user_tags[u])}});
      break;
    case TagLevel::group:
      doc["level"] = "group";
      for (const auto& [key, group] : user_groups(ctx))
        entities.push_back({{"id", key},
                            {"members", group.size()},
                            {"vectors", vector_set_json(schema, map_tags_to_group(ctx.user_tags, group))}});
      break;
  }
  doc["entities"] = std::move(entities);
  ctx.emit_json("tags_" + doc["level"].get<std::string>() + ".json", doc);
}

void stage_communities(Context& ctx) {
  LouvainOptions options;
  options.seed = derive_seed(ctx.cfg.seed, std::string_view("communities"));
  options.min_modularity_gain = ctx.cfg.min_gain;
  ctx.assignment = detect_communities(ctx.graph, options);
  ctx.counts = user_community_counts(ctx.dataset, ctx.graph, ctx.assignment);
  const auto cover = top_k_coverage(ctx.assignment, ctx.cfg.top_k);
  ctx.report["communities"] = {
      {"count", ctx.assignment.community_count},
      {"modularity", ctx.assignment.modularity},
      {"top_k", ctx.cfg.top_k},
      {"top_k_coverage", {{"users", cover.users}, {"tracks", cover.tracks}}},
      {"warnings", ctx.assignment.warnings.size()},
      {"seed", options.seed},
  };
  if (!ctx.wants("communities")) return;
  io::CsvWriter csv({"node_id", "side", "community"});
  for (std::size_t u = 0; u < ctx.graph.user_count(); ++u)
    csv.row({ctx.dataset.users()[ctx.graph.dataset_user(static_cast<NodeIndex>(u))].user_id, "user",
             std::to_string(ctx.assignment.user_community[u])});
  for (std::size_t t = 0; t < ctx.graph.track_count(); ++t)
    csv.row({ctx.dataset.tracks()[ctx.graph.dataset_track(static_cast<NodeIndex>(t))].track_id, "track",
             std::to_string(ctx.assignment.track_community[t])});
  ctx.emit("communities.csv", csv);

  const auto& schema = ctx.schema();
  json profiles = json::array();
  for (const auto& p : profile_communities(ctx.assignment, ctx.dataset, ctx.graph, ctx.user_tags)) {
    json primary = json::object();
    for (std::size_t c = 0; c < schema.class_count(); ++c) {
      const auto& tags = schema.tag_class(c).tags;
      const auto& [first, second] = p.primary_tags[c];
      primary[schema.tag_class(c).name] = {first ? json(tags[*first]) : json(nullptr),
                                           second ? json(tags[*second]) : json(nullptr)};
    }
    profiles.push_back({{"label", p.label},
                        {"users", p.users},
                        {"tracks", p.tracks},
                        {"user_share", p.user_share},
                        {"track_share", p.track_share},
                        {"mean_age", opt(p.mean_age)},
                        {"female_proportion", opt(p.female_proportion)},
                        {"primary_tags", primary},
                        {"tags", vector_set_json(schema, p.tags)}});
  }
  ctx.emit_json("community_profiles.json", json{{"schema_version", io::kSchemaVersion},
                                           {"warnings", ctx.assignment.warnings},
                                           {"communities", profiles}});
}

const std::vector<std::string> kLongHeader = {"group_key", "metric", "tag_class_or_community", "value",
                                              "n_members", "n_excluded"};

void stage_diversity(Context& ctx) {
  const auto& schema = ctx.schema();
  const auto mc = ctx.assignment.community_count;
  io::CsvWriter csv(kLongHeader);
  json headline = json::object();
  for (const auto& [key, group] : user_groups(ctx)) {
    auto put = [&](const std::string& what, const GroupDiversity& d) {
      const auto n = std::to_string(d.members), ex = std::to_string(d.excluded);
      csv.row({key, "individual_mean", what, format_optional(d.mean_individual), n, ex});
      csv.row({key, "aggregated", what, format_optional(d.aggregated), n, ex});
      csv.row({key, "within", what, format_optional(d.within), n, ex});
      if (key == "all")
        headline[what] = {{"individual_mean", opt(d.mean_individual)},
                          {"aggregated", opt(d.aggregated)},
                          {"within", opt(d.within)}};
    };
    for (std::size_t c = 0; c < schema.class_count(); ++c)
      put(schema.tag_class(c).name, tag_diversity(ctx.user_tags, group, c));
    if (mc >= 2) put("community", community_diversity(ctx.counts, group, mc));
  }
  ctx.report["diversity"] = headline;
  if (ctx.wants("diversity")) ctx.emit("diversity.csv", csv);
}

void stage_divergence(Context& ctx) {
  const auto& schema = ctx.schema();
  const auto mc = ctx.assignment.community_count;
  io::CsvWriter csv(kLongHeader);
  const int lo = ctx.cfg.age_filter ? ctx.cfg.demographics.min_age : 0;
  const int hi = ctx.cfg.age_filter ? ctx.cfg.demographics.max_age : 200;
  auto rows = gender_divergence_by_age(ctx.dataset, ctx.members, ctx.user_tags, ctx.counts, mc, lo, hi);
  // All ages pooled, keyed with an impossible age.
  {
    const auto males = filter_gender(ctx.dataset, ctx.members, Gender::male);
    const auto females = filter_gender(ctx.dataset, ctx.members, Gender::female);
    AgeDivergence all;
    all.age = -1;
    all.males = males.size();
    all.females = females.size();
    for (std::size_t c = 0; c < schema.class_count(); ++c) {
      all.tag_kld.push_back(tag_kld(ctx.user_tags, males, females, c));
      all.tag_jsd.push_back(tag_jsd(ctx.user_tags, males, females, c));
    }
    all.community_kld = community_kld(ctx.counts, males, females, mc);
    all.community_jsd = community_jsd(ctx.counts, males, females, mc);
    rows.insert(rows.begin(), std::move(all));
  }
  json series = json::array();
  for (const auto& r : rows) {
    const std::string key = r.age < 0 ? "all" : "age=" + std::to_string(r.age);
    const auto n = std::to_string(r.males + r.females);
    const std::string ex = "0";
    auto put_kld = [&](const std::string& what, const std::string& metric, const Divergence& d) {
      csv.row({key, metric, what, format_optional(d.value), n, ex});
      csv.row({key, metric + "_dropped_male", what, format_double(d.dropped_p), n, ex});
      csv.row({key, metric + "_dropped_female", what, format_double(d.dropped_q), n, ex});
    };
    json tag = json::object();
    for (std::size_t c = 0; c < schema.class_count(); ++c) {
      const auto& name = schema.tag_class(c).name;
      put_kld(name, "kld", r.tag_kld[c]);
      csv.row({key, "jsd", name, format_optional(r.tag_jsd[c]), n, ex});
      tag[name] = opt(r.tag_kld[c].value);
    }
    put_kld("community", "kld", r.community_kld);
    csv.row({key, "jsd", "community", format_optional(r.community_jsd), n, ex});
    if (r.age >= 0)
      series.push_back({{"age", r.age},
                        {"males", r.males},
                        {"females", r.females},
                        {"tag_kld", tag},
                        {"community_kld", opt(r.community_kld.value)}});
  }
  ctx.report["kld_by_age"] = series;
  if (ctx.wants("divergence")) ctx.emit("divergence.csv", csv);
}

std::string matrix_csv(const std::vector<int>& rows, const std::vector<int>& cols,
                       const std::function<std::string(std::size_t, std::size_t)>& cell) {
  std::vector<std::string> header{"release_year"};
  for (int c : cols) header.push_back(std::to_string(c));
  io::CsvWriter csv(header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> line{std::to_string(rows[i])};
    for (std::size_t j = 0; j < cols.size(); ++j) line.push_back(cell(i, j));
    csv.row(line);
  }
  return csv.str();
}

void stage_temporal(Context& ctx) {
  auto& st = ctx.temporal;
  st.matrix = attention_matrix(ctx.dataset, ctx.graph, ctx.cfg.gender);
  st.global = global_attention(ctx.dataset, ctx.graph, ctx.cfg.gender);
  st.relative = relative_attention(st.matrix, st.global);
  st.decay = mean_global_preference(ctx.dataset, ctx.graph, {ctx.cfg.gender, ctx.cfg.band});
  st.by_age = mean_sensitivity_by_age(st.relative);
  std::size_t populated = 0;
  for (auto n : st.matrix.cohort_sizes) populated += n > 0;
  ctx.report["temporal"] = {
      {"dated_tracks", st.decay.dated_tracks},
      {"undated_fraction", st.decay.undated_fraction},
      {"cohorts", populated},
      {"users_without_birth_year", st.matrix.users_without_birth_year},
      {"users_without_dated_tracks", st.matrix.users_without_dated_tracks},
      {"gender", ctx.cfg.gender == GenderFilter::all ? "all"
                 : ctx.cfg.gender == GenderFilter::male ? "male"
                                                        : "female"},
  };
  if (!ctx.wants("temporal")) return;
  const auto& m = st.matrix;
  ctx.emit_text("attention_matrix.csv", matrix_csv(m.release_years, m.birth_years, [&](std::size_t i, std::size_t j) {
             return m.cohort_sizes[j] ? format_double(m.at(i, j)) : std::string();
           }));
  const auto& r = st.relative;
  ctx.emit_text("relative_attention.csv", matrix_csv(r.release_years, r.birth_years, [&](std::size_t i, std::size_t j) {
             return format_optional(r.at(i, j));
           }));
  io::CsvWriter global({"release_year", "attention_share"});
  for (std::size_t i = 0; i < st.global.release_years.size(); ++i)
    global.row({std::to_string(st.global.release_years[i]), format_double(st.global.share[i])});
  ctx.emit("global_attention.csv", global);
  io::CsvWriter decay({"release_year", "years_since_release", "preference", "attention_share", "track_share", "tracks"});
  for (const auto& p : st.decay.points)
    decay.row({std::to_string(p.release_year), std::to_string(p.years_since_release), format_double(p.preference),
               format_double(p.attention_share), format_double(p.track_share), std::to_string(p.tracks)});
  ctx.emit("decay.csv", decay);
  io::CsvWriter sens({"birth_year", "age_at_release", "sensitivity"});
  for (int by : r.birth_years)
    if (const auto s = sensitivity(r, by))
      for (const auto& p : *s) sens.row({std::to_string(by), std::to_string(p.age_at_release), format_double(p.sensitivity)});
  ctx.emit("sensitivity.csv", sens);
  io::CsvWriter by_age({"age_at_release", "mean_sensitivity", "cohorts"});
  for (const auto& a : st.by_age)
    by_age.row({std::to_string(a.age_at_release), format_double(a.mean), std::to_string(a.cohorts)});
  ctx.emit("sensitivity_by_age.csv", by_age);
  io::CsvWriter q({"birth_year", "q25", "median", "q75"});
  for (const auto& row : release_year_quantiles(m))
    q.row({std::to_string(row.birth_year), std::to_string(row.q25), std::to_string(row.median), std::to_string(row.q75)});
  ctx.emit("release_quantiles.csv", q);
}

json fit_bigaussian_block(const std::vector<AgeSensitivity>& by_age, std::vector<CurvePoint>* points_out) {
  std::vector<CurvePoint> points;
  for (const auto& a : by_age) points.push_back({static_cast<double>(a.age_at_release), a.mean});
  if (points_out) *points_out = points;
  if (points.size() < 6) return {{"params", nullptr}, {"reason", "fewer than 6 sensitivity points"}};
  const auto fit = fit_bigaussian(points);
  return {{"params", bigaussian_json(fit.params)},
          {"residual_norm", fit.residual_norm},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"points", points.size()}};
}

void stage_fit(Context& ctx) {
  const auto& st = ctx.temporal;
  json fits = json::object();
  std::vector<CurvePoint> decay_points;
  for (const auto& p : st.decay.points) decay_points.push_back({static_cast<double>(p.years_since_release), p.preference});
  std::optional<PowerExpTailFit> decay;
  std::size_t usable = 0;
  for (const auto& p : decay_points) usable += p.x > 0 && p.y > 0;
  if (usable >= 4) {
    decay = fit_power_exp_tail(decay_points);
    fits["decay"] = {{"a", decay->amplitude},
                     {"b", decay->exponent},
                     {"c", decay->cutoff},
                     {"residual_norm", decay->residual_norm},
                     {"points_used", decay->points_used},
                     {"points_dropped", decay->points_dropped},
                     {"cutoff_pinned", decay->cutoff_pinned},
                     {"method", "log-space linear least squares"},
                     {"weighting", "unweighted"}};
  } else {
    fits["decay"] = {{"a", nullptr}, {"reason", "fewer than 4 points with x > 0 and y > 0"}};
  }

  std::vector<CurvePoint> sens_points;
  json big = json::object();
  big["all"] = fit_bigaussian_block(st.by_age, &sens_points);
  for (auto [g, name] : {std::pair{GenderFilter::male, "male"}, std::pair{GenderFilter::female, "female"}}) {
    const auto matrix = attention_matrix(ctx.dataset, ctx.graph, g);
    const auto global = global_attention(ctx.dataset, ctx.graph, g);
    big[name] = fit_bigaussian_block(mean_sensitivity_by_age(relative_attention(matrix, global)), nullptr);
  }
  fits["bigaussian"] = big;
  ctx.report["fits"] = fits;
  ctx.report["peak_sensitivity_age"] =
      big["all"]["params"].is_null() ? json(nullptr) : big["all"]["params"]["xc"];
  if (!ctx.wants("fit")) return;
  ctx.emit_json("fit_decay.json", json{{"schema_version", io::kSchemaVersion}, {"fit", fits["decay"]}});
  ctx.emit_json("fit_bigaussian.json", json{{"schema_version", io::kSchemaVersion}, {"fit", big}});
  if (decay) {
    io::CsvWriter csv({"x", "y", "fitted", "log_residual"});
    for (const auto& p : decay_points) {
      const double f = p.x > 0 ? power_exp_tail(p.x, decay->amplitude, decay->exponent, decay->cutoff) : 0.0;
      const bool used = p.x > 0 && p.y > 0;
      csv.row({format_double(p.x), format_double(p.y), used ? format_double(f) : std::string(),
               used ? format_double(std::log(p.y) - std::log(f)) : std::string()});
    }
    ctx.emit("fit_decay_residuals.csv", csv);
  }
  if (!big["all"]["params"].is_null()) {
    const auto& j = big["all"]["params"];
    const BigaussianParams p{j["y0"], j["xc"], j["H"], j["w1"], j["w2"]};
    io::CsvWriter csv({"x", "y", "fitted", "residual"});
    for (const auto& q : sens_points) {
      const double f = bigaussian(q.x, p);
      csv.row({format_double(q.x), format_double(q.y), format_double(f), format_double(q.y - f)});
    }
    ctx.emit("fit_bigaussian_residuals.csv", csv);
  }
}

void stage_agemode(Context& ctx) {
  const auto& schema = ctx.schema();
  const auto table = age_mode_table(ctx.dataset, ctx.members, ctx.user_tags, ctx.cfg.age_mode);
  std::map<std::string, std::size_t> tally;
  std::vector<std::string> header{"tag_class", "tag"};
  for (const auto& s : ctx.cfg.age_mode.stages)
    header.push_back("stage_" + std::to_string(s.first_age) + "_" + std::to_string(s.last_age));
  header.push_back("mode");
  io::CsvWriter csv(header);
  for (const auto& row : table) {
    std::vector<std::string> line{schema.tag_class(row.tag_class).name, schema.tag_class(row.tag_class).tags[row.tag]};
    for (const auto& m : row.stage_means) line.push_back(format_optional(m));
    line.push_back(row.mode.value_or(""));
    csv.row(line);
    ++tally[row.mode.value_or("absent")];
  }
  ctx.report["age_modes"] = tally;
  if (ctx.wants("agemode")) ctx.emit("age_mode.csv", csv);
}

void stage_regional(Context& ctx) {
  if (!ctx.economics) throw ValidationError("regional correlation needs an economics file (--economics)");
  const auto& schema = ctx.schema();
  json out = json::object();
  for (RegionLevel level : {RegionLevel::province, RegionLevel::city}) {
    RegionalOptions options = ctx.cfg.regional;
    options.level = level;
    const auto ra = regional_analysis(ctx.dataset, ctx.members, *ctx.economics, ctx.user_tags, ctx.counts,
                                      ctx.assignment.community_count, options);
    const std::string lv(to_string(level));
    json top = json::object();
    for (const auto& ranked : ra.ranked_tags)
      if (!ranked.empty() && ranked.front().correlation.r) {
        const auto& t = ranked.front();
        top[schema.tag_class(t.tag_class).name] = {{"tag", schema.tag_class(t.tag_class).tags[t.tag]},
                                                   {"r", opt(t.correlation.r)},
                                                   {"p", opt(t.correlation.p)}};
      }
    json metrics = json::object();
    for (const auto& m : ra.metrics)
      metrics[m.metric + (m.tag_class ? ":" + schema.tag_class(*m.tag_class).name : std::string())] =
          opt(m.correlation.r);
    out[lv] = {{"regions", ra.regions.size()},
               {"users_without_region", ra.users_without_region},
               {"regions_too_small", ra.regions_too_small},
               {"regions_without_indicator", ra.regions_without_indicator},
               {"top_tags", top},
               {"metric_r", metrics}};
    if (!ctx.wants("regional")) continue;

    io::CsvWriter regions({"region", "users", "indicator"});
    for (const auto& r : ra.regions) regions.row({r.region, std::to_string(r.users), format_double(r.indicator)});
    ctx.emit("regional_" + lv + "_regions.csv", regions);
    io::CsvWriter tags({"tag_class", "rank", "tag", "r", "p", "n", "reason"});
    for (const auto& ranked : ra.ranked_tags)
      for (std::size_t k = 0; k < ranked.size(); ++k) {
        const auto& t = ranked[k];
        tags.row({schema.tag_class(t.tag_class).name, std::to_string(k + 1), schema.tag_class(t.tag_class).tags[t.tag],
                  format_optional(t.correlation.r), format_optional(t.correlation.p), std::to_string(t.correlation.n),
                  t.correlation.reason});
      }
    ctx.emit("regional_" + lv + "_tags.csv", tags);
    io::CsvWriter mcsv({"metric", "tag_class", "r", "p", "n", "reason"});
    for (const auto& m : ra.metrics)
      mcsv.row({m.metric, m.tag_class ? schema.tag_class(*m.tag_class).name : "community",
                format_optional(m.correlation.r), format_optional(m.correlation.p), std::to_string(m.correlation.n),
                m.correlation.reason});
    ctx.emit("regional_" + lv + "_metrics.csv", mcsv);
    io::CsvWriter gcsv({"gender", "tag_class", "mean_positive_r", "positive", "mean_negative_r", "negative"});
    for (const auto& g : ra.gender_summary)
      gcsv.row({std::string(to_string(g.gender)), schema.tag_class(g.tag_class).name, format_optional(g.mean_positive),
                std::to_string(g.positive), format_optional(g.mean_negative), std::to_string(g.negative)});
    ctx.emit("regional_" + lv + "_gender.csv", gcsv);
  }
  ctx.report["regional"] = out;
}

using StageFn = void (*)(Context&);

const std::map<std::string, StageFn>& stage_table() {
  static const std::map<std::string, StageFn> table = {
      {"ingest", stage_ingest},         {"graph", stage_graph},           {"tagmap", stage_tagmap},
      {"communities", stage_communities}, {"diversity", stage_diversity}, {"divergence", stage_divergence},
      {"temporal", stage_temporal},     {"fit", stage_fit},               {"agemode", stage_agemode},
      {"regional", stage_regional},
  };
  return table;
}

void write_manifest(Context& ctx, const std::vector<StageStatus>& stages, bool complete) {
  std::sort(ctx.files.begin(), ctx.files.end());
  json files = json::array();
  for (const auto& name : ctx.files) {
    std::ifstream in(ctx.cfg.out / name, std::ios::binary);
    const std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    files.push_back({{"path", name}, {"fnv1a64", hex64(fnv1a64(contents))}});
  }
  json st = json::array();
  for (const auto& s : stages) {
    json e = {{"name", s.name}, {"status", s.status}};
    if (!s.error.empty()) e["error"] = s.error;
    st.push_back(e);
  }
  const json manifest = {{"schema_version", io::kSchemaVersion},
                         {"complete", complete},
                         {"seed", ctx.cfg.seed},
                         {"stages", st},
                         {"files", files}};
  io::write_file(ctx.cfg.out / "manifest.json", manifest.dump(1) + "\n");
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
  Context ctx{config, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, json::object(), {}};
  if (config.targets.empty()) {
    for (const auto& s : kStages)
      if (s != "regional" || config.economics) ctx.targets.insert(s);
  } else {
    for (const auto& t : config.targets) {
      if (!stage_table().count(t)) throw ValidationError("unknown stage '" + t + "'");
      ctx.targets.insert(t);
    }
  }
  std::set<std::string> run;
  for (const auto& t : ctx.targets) close_over(t, run);

  fs::create_directories(config.out);
  PipelineResult result;
  for (const auto& s : kStages) result.stages.push_back({s, run.count(s) ? "pending" : "not_run", ""});

  ctx.report["schema_version"] = io::kSchemaVersion;
  ctx.report["seed"] = config.seed;
  for (auto& status : result.stages) {
    if (status.status != "pending") continue;
    try {
      stage_table().at(status.name)(ctx);
      status.status = "complete";
    } catch (const ValidationError& e) {
      status.status = "failed";
      status.error = e.what();
      for (auto& s : result.stages)
        if (s.status == "pending") s.status = "not_run";
      write_manifest(ctx, result.stages, false);
      throw StageError(status.name, e.what(), true);
    } catch (const std::exception& e) {
      status.status = "failed";
      status.error = e.what();
      for (auto& s : result.stages)
        if (s.status == "pending") s.status = "not_run";
      write_manifest(ctx, result.stages, false);
      throw StageError(status.name, e.what(), false);
    }
  }
  json stages = json::object();
  for (const auto& s : result.stages) stages[s.name] = s.status;
  ctx.report["stages"] = stages;
  if (config.report) ctx.emit_json("report.json", ctx.report);
  write_manifest(ctx, result.stages, true);
  result.files = ctx.files;
  return result;
}

std::vector<CurvePoint> read_points_csv(const fs::path& path) {
  const auto lines = io::read_lines(path);
  std::vector<CurvePoint> points;
  bool header = false;
  std::size_t xi = 0, yi = 1;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto& line = lines[n];
    if (line.empty() || line[0] == '#') continue;
    const auto fields = io::split_csv(line);
    if (!header) {
      header = true;
      const auto x = std::find(fields.begin(), fields.end(), "x");
      const auto y = std::find(fields.begin(), fields.end(), "y");
      if (x == fields.end() || y == fields.end())
        throw ValidationError(path.string() + ": header must name columns x and y");
      xi = static_cast<std::size_t>(x - fields.begin());
      yi = static_cast<std::size_t>(y - fields.begin());
      continue;
    }
    const auto x = fields.size() > xi ? io::parse_double(fields[xi]) : std::nullopt;
    const auto y = fields.size() > yi ? io::parse_double(fields[yi]) : std::nullopt;
    if (!x || !y) throw ValidationError(path.string() + " line " + std::to_string(n + 1) + ": bad x or y");
    points.push_back({*x, *y});
  }
  return points;
}

void fit_points_file(const std::string& model, const FitFromPointsOptions& options) {
  const auto points = read_points_csv(options.points);
  json out = {{"schema_version", io::kSchemaVersion}, {"model", model}, {"points", points.size()}};
  io::CsvWriter csv({"x", "y", "fitted", "residual"});
  if (model == "decay") {
    const auto fit = fit_power_exp_tail(points);
    out["fit"] = {{"a", fit.amplitude},
                  {"b", fit.exponent},
                  {"c", fit.cutoff},
                  {"residual_norm", fit.residual_norm},
                  {"points_used", fit.points_used},
                  {"points_dropped", fit.points_dropped},
                  {"cutoff_pinned", fit.cutoff_pinned},
                  {"method", "log-space linear least squares"},
                  {"weighting", "unweighted"}};
    for (const auto& p : points) {
      if (p.x <= 0) continue;
      const double f = power_exp_tail(p.x, fit.amplitude, fit.exponent, fit.cutoff);
      csv.row({format_double(p.x), format_double(p.y), format_double(f), format_double(p.y - f)});
    }
  } else if (model == "bigaussian") {
    const auto fit = fit_bigaussian(points);
    out["fit"] = {{"params", bigaussian_json(fit.params)},
                  {"residual_norm", fit.residual_norm},
                  {"iterations", fit.iterations},
                  {"converged", fit.converged}};
    for (const auto& p : points) {
      const double f = bigaussian(p.x, fit.params);
      csv.row({format_double(p.x), format_double(p.y), format_double(f), format_double(p.y - f)});
    }
  } else {
    throw ValidationError("unknown fit model '" + model + "'");
  }
  io::write_file(options.out / ("fit_" + model + ".json"), out.dump(1) + "\n");
  io::write_file(options.out / ("fit_" + model + "_residuals.csv"), csv.str());
}

}  // namespace prefnet

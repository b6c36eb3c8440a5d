#include "prefnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include <json.hpp>

#include "prefnet/io.hpp"
#include "prefnet/rng.hpp"

namespace prefnet {

namespace {

struct Field {
  std::function<void(SynthConfig&, double)> set;
  std::function<double(const SynthConfig&)> get;
  bool integer = false;
};

template <typename T>
Field field(T SynthConfig::* member) {
  return {[member](SynthConfig& c, double v) { c.*member = static_cast<T>(v); },
          [member](const SynthConfig& c) { return static_cast<double>(c.*member); }, std::is_integral_v<T>};
}

Field sens(double BigaussianParams::* member) {
  return {[member](SynthConfig& c, double v) { c.sensitivity.*member = v; },
          [member](const SynthConfig& c) { return c.sensitivity.*member; }, false};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"users", field(&SynthConfig::users)},
      {"tracks", field(&SynthConfig::tracks)},
      {"blocks", field(&SynthConfig::blocks)},
      {"epsilon", field(&SynthConfig::epsilon)},
      {"fp_length_min", field(&SynthConfig::fp_length_min)},
      {"fp_length_max", field(&SynthConfig::fp_length_max)},
      {"reference_year", field(&SynthConfig::reference_year)},
      {"max_track_age", field(&SynthConfig::max_track_age)},
      {"age_min", field(&SynthConfig::age_min)},
      {"age_max", field(&SynthConfig::age_max)},
      {"missing_birth_fraction", field(&SynthConfig::missing_birth_fraction)},
      {"female_fraction", field(&SynthConfig::female_fraction)},
      {"unknown_gender_fraction", field(&SynthConfig::unknown_gender_fraction)},
      {"undated_every", field(&SynthConfig::undated_every)},
      {"decay_a", field(&SynthConfig::decay_a)},
      {"decay_b", field(&SynthConfig::decay_b)},
      {"decay_c", field(&SynthConfig::decay_c)},
      {"sensitivity_y0", sens(&BigaussianParams::y0)},
      {"sensitivity_xc", sens(&BigaussianParams::xc)},
      {"sensitivity_h", sens(&BigaussianParams::height)},
      {"sensitivity_w1", sens(&BigaussianParams::w1)},
      {"sensitivity_w2", sens(&BigaussianParams::w2)},
      {"general_playlists", field(&SynthConfig::general_playlists)},
      {"general_playlist_length", field(&SynthConfig::general_playlist_length)},
      {"tag_noise", field(&SynthConfig::tag_noise)},
      {"gender_skew", field(&SynthConfig::gender_skew)},
      {"regions", field(&SynthConfig::regions)},
      {"cities_per_region", field(&SynthConfig::cities_per_region)},
      {"income_block_link", field(&SynthConfig::income_block_link)},
      {"income_gender_slope", field(&SynthConfig::income_gender_slope)},
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("synth config: " + what);
}

void validate(const SynthConfig& c) {
  const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  check(c.users >= 1, "users must be positive");
  check(c.blocks >= 1, "blocks must be positive");
  check(c.blocks <= c.tracks, "more blocks than tracks");
  check(c.max_track_age >= 1, "max_track_age must be at least 1");
  const auto years = static_cast<std::size_t>(c.max_track_age) + 1;
  check(c.tracks >= c.blocks * years, "tracks must cover every (block, release year) cell");
  check(c.fp_length_min >= 1 && c.fp_length_min <= c.fp_length_max, "need 1 <= fp_length_min <= fp_length_max");
  check(c.fp_length_max <= c.tracks / c.blocks, "fp_length_max exceeds the tracks of one block");
  check(c.age_min >= 0 && c.age_min <= c.age_max, "need 0 <= age_min <= age_max");
  check(prob(c.epsilon) && prob(c.missing_birth_fraction) && prob(c.tag_noise) && prob(c.gender_skew) &&
            prob(c.income_block_link),
        "probabilities must lie in [0, 1]");
  check(prob(c.female_fraction) && prob(c.unknown_gender_fraction) &&
            c.female_fraction + c.unknown_gender_fraction <= 1.0,
        "gender fractions must sum to at most 1");
  check(c.decay_a > 0.0 && c.decay_c >= 0.0, "decay needs a > 0 and c >= 0");
  check(c.sensitivity.w1 > 0.0 && c.sensitivity.w2 > 0.0 && c.sensitivity.height >= 0.0,
        "sensitivity needs positive widths and non-negative height");
  check(c.sensitivity.y0 > 0.0 || c.sensitivity.height == 0.0,
        "sensitivity baseline y0 must be positive so every year stays reachable");
  check(c.general_playlist_length >= 1, "general_playlist_length must be positive");
  check(c.regions == 0 || c.cities_per_region >= 1, "cities_per_region must be positive");
}

}  // namespace

SynthConfig parse_synth_config(const std::vector<std::string>& lines) {
  SynthConfig config;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("synth config line " + std::to_string(i + 1) + ": expected key = value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto text = trim(std::string_view(line).substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end())
      throw ValidationError("synth config line " + std::to_string(i + 1) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ValidationError("synth config line " + std::to_string(i + 1) + ": duplicate key '" + key + "'");
    const auto value = io::parse_double(text);
    if (!value || (it->second.integer && (*value != std::floor(*value) || *value < -1e15)))
      throw ValidationError("synth config line " + std::to_string(i + 1) + ": bad value for '" + key + "'");
    if (it->second.integer && *value < 0 && key != "reference_year" && key != "max_track_age" &&
        key != "age_min" && key != "age_max")
      throw ValidationError("synth config line " + std::to_string(i + 1) + ": '" + key + "' must be >= 0");
    it->second.set(config, *value);
  }
  validate(config);
  return config;
}

SynthConfig load_synth_config(const std::filesystem::path& path) { return parse_synth_config(io::read_lines(path)); }

std::string write_synth_config(const SynthConfig& config) {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + " = " + io::format_double(f.get(config)) + "\n";
  return out;
}

SynthPlan make_synth_plan(const SynthConfig& config) {
  validate(config);
  SynthPlan plan;
  const int years = config.max_track_age + 1;
  for (int y = config.reference_year - config.max_track_age; y <= config.reference_year; ++y)
    plan.release_years.push_back(y);
  // rho from the realized layout: track t sits in year (t / blocks) mod years.
  std::vector<double> dated(static_cast<std::size_t>(years), 0.0);
  double total_dated = 0.0;
  for (std::size_t t = 0; t < config.tracks; ++t) {
    if (config.undated_every != 0 && (t + 1) % config.undated_every == 0) continue;
    dated[(t / config.blocks) % static_cast<std::size_t>(years)] += 1.0;
    total_dated += 1.0;
  }
  check(total_dated > 0.0, "no dated tracks");
  for (auto& d : dated) d /= total_dated;
  plan.track_share = std::move(dated);
  plan.target_attention.assign(static_cast<std::size_t>(years), 0.0);
  double planted = 0.0;
  for (int i = 0; i < years; ++i) {
    const int x = config.reference_year - plan.release_years[static_cast<std::size_t>(i)];
    if (x < 1) continue;
    const double t = plan.track_share[static_cast<std::size_t>(i)] *
                     power_exp_tail(x, config.decay_a, config.decay_b, config.decay_c);
    plan.target_attention[static_cast<std::size_t>(i)] = t;
    planted += t;
  }
  // The newest year (x = 0, where the power law diverges) takes the remaining mass.
  check(planted < 1.0, "decay law puts more than all attention on tracks older than one year");
  plan.target_attention.back() = 1.0 - planted;

  plan.correction.assign(static_cast<std::size_t>(years), 1.0);
  if (config.sensitivity.height == 0.0) return plan;

  const int ages = config.age_max - config.age_min + 1;
  const double w_known = (1.0 - config.missing_birth_fraction) / ages;
  const double w_missing = config.missing_birth_fraction;
  std::vector<double> marginal(static_cast<std::size_t>(years));
  for (std::size_t iter = 0; iter < 20000; ++iter) {
    plan.ipf_iterations = iter + 1;
    std::fill(marginal.begin(), marginal.end(), 0.0);
    for (int age = config.age_min; age <= config.age_max; ++age) {
      const auto p = planted_release_distribution(config, plan, config.reference_year - age);
      for (std::size_t i = 0; i < p.size(); ++i) marginal[i] += w_known * p[i];
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < marginal.size(); ++i) {
      marginal[i] += w_missing * plan.target_attention[i];
      const double target = plan.target_attention[i];
      if (target <= 0.0) continue;
      worst = std::max(worst, std::abs(marginal[i] / target - 1.0));
      plan.correction[i] *= target / marginal[i];
    }
    if (worst < 1e-13) break;
  }
  return plan;
}

std::vector<double> planted_release_distribution(const SynthConfig& config, const SynthPlan& plan,
                                                 std::optional<int> birth_year) {
  if (!birth_year || config.sensitivity.height == 0.0) return plan.target_attention;
  std::vector<double> p(plan.release_years.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double age_at_release = plan.release_years[i] - *birth_year;
    p[i] = plan.target_attention[i] * plan.correction[i] * bigaussian(age_at_release, config.sensitivity);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

namespace {

std::string padded(char prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

int digits_for(std::size_t n) { return std::max(1, static_cast<int>(std::to_string(n).size())); }

std::size_t sample_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::vector<double> to_cdf(const std::vector<double>& p) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = (acc += p[i]);
  return cdf;
}

}  // namespace

SynthResult generate(const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  SynthResult result;
  auto& truth = result.truth;
  truth.seed = seed;
  truth.plan = make_synth_plan(config);
  const auto& plan = truth.plan;
  const std::size_t years = plan.release_years.size();
  const std::size_t blocks = config.blocks;
  const auto& schema = TagSchema::standard();

  // Tracks: block = t mod B, release year cycles every B tracks.
  std::vector<TrackRecord> tracks(config.tracks);
  std::vector<std::vector<TrackIndex>> cells(blocks * years);
  std::vector<std::vector<TrackIndex>> year_tracks(years);
  std::vector<std::vector<TrackIndex>> block_tracks(blocks);
  truth.track_blocks.resize(config.tracks);
  const int tdig = digits_for(config.tracks);
  for (std::size_t t = 0; t < config.tracks; ++t) {
    const std::size_t b = t % blocks, yi = (t / blocks) % years;
    tracks[t].track_id = padded('t', t, tdig);
    if (config.undated_every == 0 || (t + 1) % config.undated_every != 0)
      tracks[t].release_year = plan.release_years[yi];
    truth.track_blocks[t] = static_cast<std::uint32_t>(b);
    cells[b * years + yi].push_back(static_cast<TrackIndex>(t));
    year_tracks[yi].push_back(static_cast<TrackIndex>(t));
    block_tracks[b].push_back(static_cast<TrackIndex>(t));
  }

  truth.block_tags.assign(blocks, std::vector<std::size_t>(schema.class_count()));
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t c = 0; c < schema.class_count(); ++c) truth.block_tags[b][c] = b % schema.cardinality(c);

  std::vector<double> normalized_income;
  if (config.regions > 0) {
    const int rdig = digits_for(config.regions);
    std::vector<EconomicRow> rows;
    for (std::size_t r = 0; r < config.regions; ++r) {
      const double z = config.regions > 1 ? static_cast<double>(r) / static_cast<double>(config.regions - 1) : 0.0;
      const double income = 20000.0 + 40000.0 * z;
      const auto code = padded('R', r + 1, rdig);
      truth.region_codes.push_back(code);
      truth.region_income.push_back(income);
      normalized_income.push_back(z);
      rows.push_back({code, RegionLevel::province, "income", income, ""});
      for (std::size_t k = 0; k < config.cities_per_region; ++k) {
        const double f = config.cities_per_region > 1
                             ? 0.9 + 0.2 * static_cast<double>(k) / static_cast<double>(config.cities_per_region - 1)
                             : 1.0;
        rows.push_back({code + "-C" + std::to_string(k + 1), RegionLevel::city, "income", income * f, ""});
      }
    }
    result.economics = EconomicTable(std::move(rows));
  }

  const int ages = config.age_max - config.age_min + 1;
  std::vector<std::vector<double>> age_cdf(static_cast<std::size_t>(ages));
  for (int a = 0; a < ages; ++a)
    age_cdf[static_cast<std::size_t>(a)] =
        to_cdf(planted_release_distribution(config, plan, config.reference_year - (config.age_min + a)));
  const auto missing_cdf = to_cdf(plan.target_attention);

  std::vector<UserRecord> users(config.users);
  std::vector<std::vector<TrackIndex>> favorites(config.users);
  truth.user_blocks.resize(config.users);
  const int udig = digits_for(config.users);
  const auto n = static_cast<std::int64_t>(config.users);
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t ui = 0; ui < n; ++ui) {
    const auto u = static_cast<std::size_t>(ui);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(u)));
    UserRecord& user = users[u];
    user.user_id = padded('u', u, udig);
    const double g = rng.uniform();
    user.gender = g < config.female_fraction ? Gender::female
                  : g < config.female_fraction + config.unknown_gender_fraction ? Gender::unknown
                                                                                 : Gender::male;
    const bool missing = rng.uniform() < config.missing_birth_fraction;
    const int age = config.age_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(ages)));
    if (!missing) user.birth_year = config.reference_year - age;
    double z = 0.0;
    if (config.regions > 0) {
      const auto r = static_cast<std::size_t>(rng.below(config.regions));
      const auto k = rng.below(config.cities_per_region);
      user.province = truth.region_codes[r];
      user.city = truth.region_codes[r] + "-C" + std::to_string(k + 1);
      z = normalized_income[r];
    }

    // Block choice: gender tilt first, then the regional income pull toward block 0.
    const double skew = std::clamp(config.gender_skew + config.income_gender_slope * z, 0.0, 1.0);
    std::vector<double> weight(blocks, 1.0);
    if (blocks >= 2 && user.gender != Gender::unknown) {
      for (std::size_t b = 0; b < blocks; ++b) {
        const bool first_half = b < blocks / 2;
        const bool favoured = (user.gender == Gender::female) == first_half;
        weight[b] = favoured ? 1.0 + skew : 1.0 - skew;
      }
    }
    const auto block_cdf = to_cdf(weight);
    std::size_t block = sample_cdf(block_cdf, rng.uniform());
    if (rng.uniform() < config.income_block_link * z) block = 0;
    truth.user_blocks[u] = static_cast<std::uint32_t>(block);

    const auto length = config.fp_length_min + rng.below(config.fp_length_max - config.fp_length_min + 1);
    const auto& cdf = missing ? missing_cdf : age_cdf[static_cast<std::size_t>(age - config.age_min)];
    std::vector<TrackIndex> chosen;
    chosen.reserve(length);
    std::set<TrackIndex> taken;
    std::size_t attempts = 0;
    while (chosen.size() < length && attempts < 1000 * length) {
      ++attempts;
      const auto yi = sample_cdf(cdf, rng.uniform());
      // A repeat redraws the track but keeps the year, so crowded years keep their share.
      for (int tries = 0; tries < 64; ++tries) {
        const auto& pool = rng.uniform() < config.epsilon ? year_tracks[yi] : cells[block * years + yi];
        const TrackIndex t = pool[rng.below(pool.size())];
        if (taken.insert(t).second) {
          chosen.push_back(t);
          break;
        }
      }
    }
    favorites[u] = std::move(chosen);
  }

  std::vector<Playlist> playlists;
  playlists.reserve(config.users + config.general_playlists);
  for (std::size_t u = 0; u < config.users; ++u) {
    Playlist fp;
    fp.playlist_id = "fp-" + users[u].user_id;
    fp.owner = static_cast<UserIndex>(u);
    fp.kind = PlaylistKind::favorite;
    fp.tracks = std::move(favorites[u]);
    playlists.push_back(std::move(fp));
  }

  const std::size_t general = config.general_playlists ? config.general_playlists : config.tracks / 10;
  Rng rng(derive_seed(seed, std::string_view("general-playlists")));
  const int gdig = digits_for(general);
  for (std::size_t i = 0; i < general; ++i) {
    Playlist pl;
    pl.playlist_id = "gp-" + padded('p', i, gdig).substr(1);
    pl.owner = static_cast<UserIndex>(rng.below(config.users));
    const std::size_t b = i % blocks;
    const auto& pool = block_tracks[b];
    const auto len = std::min(config.general_playlist_length, pool.size());
    std::set<TrackIndex> picked;
    while (picked.size() < len) picked.insert(pool[rng.below(pool.size())]);
    pl.tracks.assign(picked.begin(), picked.end());
    std::vector<std::size_t> classes(schema.class_count());
    for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = c;
    rng.shuffle(std::span<std::size_t>(classes));
    for (std::size_t k = 0; k < std::min<std::size_t>(kMaxGeneralPlaylistTags, classes.size()); ++k) {
      const auto c = classes[k];
      const auto tag = rng.uniform() < config.tag_noise ? static_cast<std::size_t>(rng.below(schema.cardinality(c)))
                                                        : truth.block_tags[b][c];
      pl.tags.push_back(schema.tag_class(c).name + ":" + schema.tag_class(c).tags[tag]);
    }
    std::sort(pl.tags.begin(), pl.tags.end());
    playlists.push_back(std::move(pl));
  }

  // Track table in first-appearance order, unreferenced tracks dropped, so the
  // dataset equals what the loader rebuilds from the written file.
  std::vector<std::int64_t> remap(tracks.size(), -1);
  std::vector<TrackRecord> used;
  std::vector<std::uint32_t> used_blocks;
  for (auto& pl : playlists)
    for (auto& t : pl.tracks) {
      if (remap[t] < 0) {
        remap[t] = static_cast<std::int64_t>(used.size());
        used.push_back(tracks[t]);
        used_blocks.push_back(truth.track_blocks[t]);
      }
      t = static_cast<TrackIndex>(remap[t]);
    }
  truth.track_blocks = std::move(used_blocks);

  result.dataset = Dataset(std::move(users), std::move(used), std::move(playlists), schema, config.reference_year);
  return result;
}

std::string ground_truth_json(const SynthConfig& config, const Dataset& dataset, const GroundTruth& truth) {
  using nlohmann::json;
  json j;
  j["schema_version"] = io::kSchemaVersion;
  j["seed"] = truth.seed;
  json cfg = json::object();
  for (const auto& [key, f] : fields()) cfg[key] = f.get(config);
  j["config"] = cfg;
  j["decay"] = {{"a", config.decay_a}, {"b", config.decay_b}, {"c", config.decay_c}};
  j["sensitivity"] = {{"y0", config.sensitivity.y0},
                      {"xc", config.sensitivity.xc},
                      {"H", config.sensitivity.height},
                      {"w1", config.sensitivity.w1},
                      {"w2", config.sensitivity.w2}};
  j["release_years"] = truth.plan.release_years;
  j["target_attention"] = truth.plan.target_attention;
  j["ipf_correction"] = truth.plan.correction;
  const auto& schema = TagSchema::standard();
  json tags = json::array();
  for (const auto& row : truth.block_tags) {
    json b = json::object();
    for (std::size_t c = 0; c < row.size(); ++c) b[schema.tag_class(c).name] = schema.tag_class(c).tags[row[c]];
    tags.push_back(b);
  }
  j["block_tags"] = tags;
  json ub = json::object(), tb = json::object();
  for (std::size_t u = 0; u < truth.user_blocks.size(); ++u) ub[dataset.users()[u].user_id] = truth.user_blocks[u];
  for (std::size_t t = 0; t < truth.track_blocks.size(); ++t) tb[dataset.tracks()[t].track_id] = truth.track_blocks[t];
  j["user_blocks"] = ub;
  j["track_blocks"] = tb;
  json regions = json::array();
  for (std::size_t r = 0; r < truth.region_codes.size(); ++r)
    regions.push_back({{"code", truth.region_codes[r]}, {"income", truth.region_income[r]}});
  j["regions"] = regions;
  return j.dump(1) + "\n";
}

void write_synth_outputs(const std::filesystem::path& dir, const SynthConfig& config, const SynthResult& result) {
  io::write_file(dir / "playlists.jsonl", write_playlists_jsonl(result.dataset));
  if (result.economics.size() > 0) io::write_file(dir / "economics.csv", write_economics(result.economics));
  io::write_file(dir / "ground_truth.json", ground_truth_json(config, result.dataset, result.truth));
  io::write_file(dir / "synth.conf", write_synth_config(config));
}

}  // namespace prefnet

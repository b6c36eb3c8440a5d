#include "prefnet/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "prefnet/io.hpp"

namespace prefnet {

using nlohmann::json;

namespace {

struct RawTrack {
  std::string id;
  std::optional<int> release_year;
  std::optional<std::string> album_id;
};

struct RawRecord {
  std::size_t line = 0;
  std::string playlist_id;
  PlaylistKind kind = PlaylistKind::general;
  UserRecord owner;
  std::vector<std::string> tags;
  std::vector<RawTrack> tracks;
};

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

void check_record(const RawRecord& rec, int reference_year) {
  if (rec.playlist_id.empty()) throw ValidationError("missing playlist_id");
  if (rec.owner.user_id.empty()) throw ValidationError("missing owner user_id");
  if (rec.kind == PlaylistKind::favorite && !rec.tags.empty())
    throw ValidationError("favorite playlist '" + rec.playlist_id + "' carries tags");
  if (rec.tags.size() > kMaxGeneralPlaylistTags)
    throw ValidationError("playlist '" + rec.playlist_id + "' carries more than 3 tags");
  if (rec.owner.birth_year &&
      (*rec.owner.birth_year < kMinBirthYear || *rec.owner.birth_year > reference_year))
    throw ValidationError("birth year " + std::to_string(*rec.owner.birth_year) +
                          " out of range for user '" + rec.owner.user_id + "'");
}

std::optional<std::string> opt_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<int> opt_int(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw ValidationError(std::string("field '") + key + "' must be an integer");
  return it->get<int>();
}

bool opt_bool(const json& obj, const char* key, bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_boolean()) throw ValidationError(std::string("field '") + key + "' must be a boolean");
  return it->get<bool>();
}

RawRecord parse_json_record(std::string_view text, std::size_t line, int reference_year) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ValidationError("record is not a JSON object");

  RawRecord rec;
  rec.line = line;
  rec.playlist_id = opt_string(obj, "playlist_id").value_or("");
  rec.kind = parse_playlist_kind(opt_string(obj, "kind").value_or(""));

  auto owner_it = obj.find("owner");
  if (owner_it == obj.end() || !owner_it->is_object()) throw ValidationError("missing owner object");
  const json& owner = *owner_it;
  rec.owner.user_id = opt_string(owner, "user_id").value_or("");
  rec.owner.birth_year = opt_int(owner, "birth_year");
  rec.owner.birth_default = opt_bool(owner, "birth_default", false);
  rec.owner.gender = parse_gender(opt_string(owner, "gender").value_or(""));
  rec.owner.province = opt_string(owner, "province");
  rec.owner.city = opt_string(owner, "city");
  rec.owner.active = opt_bool(owner, "active", true);

  if (auto tags = obj.find("tags"); tags != obj.end() && !tags->is_null()) {
    if (!tags->is_array()) throw ValidationError("tags must be an array");
    for (const auto& t : *tags) {
      if (!t.is_string()) throw ValidationError("tag entries must be strings");
      rec.tags.push_back(t.get<std::string>());
    }
  }
  if (auto tracks = obj.find("tracks"); tracks != obj.end() && !tracks->is_null()) {
    if (!tracks->is_array()) throw ValidationError("tracks must be an array");
    rec.tracks.reserve(tracks->size());
    for (const auto& t : *tracks) {
      RawTrack track;
      if (t.is_string()) {
        track.id = t.get<std::string>();
      } else if (t.is_object()) {
        track.id = opt_string(t, "track_id").value_or("");
        track.release_year = opt_int(t, "release_year");
        track.album_id = opt_string(t, "album_id");
      } else {
        throw ValidationError("track entries must be objects");
      }
      if (track.id.empty()) throw ValidationError("track without track_id");
      rec.tracks.push_back(std::move(track));
    }
  }
  check_record(rec, reference_year);
  return rec;
}

bool same_demographics(const UserRecord& a, const UserRecord& b) { return a == b; }

/// Single-writer merge of parsed records into a Dataset.
Dataset assemble(std::vector<RawRecord>& records, const LoadOptions& options, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};
  rep.records = records.size();
  auto log_conflict = [&](std::string msg) {
    if (rep.conflict_log.size() < 100) rep.conflict_log.push_back(std::move(msg));
  };

  std::vector<UserRecord> users;
  std::vector<TrackRecord> tracks;
  std::vector<Playlist> playlists;
  std::unordered_map<std::string, UserIndex> user_ix;
  std::unordered_map<std::string, TrackIndex> track_ix;
  std::vector<char> has_favorite;
  playlists.reserve(records.size());

  for (auto& rec : records) {
    UserIndex owner;
    if (auto it = user_ix.find(rec.owner.user_id); it != user_ix.end()) {
      owner = it->second;
      if (!same_demographics(users[owner], rec.owner)) {
        ++rep.owner_conflicts;
        log_conflict("user '" + rec.owner.user_id + "' has conflicting demographics at line " +
                     std::to_string(rec.line));
      }
    } else {
      owner = static_cast<UserIndex>(users.size());
      user_ix.emplace(rec.owner.user_id, owner);
      users.push_back(rec.owner);
      has_favorite.push_back(0);
    }
    if (rec.kind == PlaylistKind::favorite) {
      if (has_favorite[owner])
        throw ValidationError(line_error(rec.line, "duplicate favorite playlist for user '" +
                                                       rec.owner.user_id + "'"));
      has_favorite[owner] = 1;
    }

    Playlist pl;
    pl.playlist_id = std::move(rec.playlist_id);
    pl.owner = owner;
    pl.kind = rec.kind;
    pl.tags = std::move(rec.tags);
    pl.tracks.reserve(rec.tracks.size());
    for (auto& t : rec.tracks) {
      TrackIndex ix;
      if (auto it = track_ix.find(t.id); it != track_ix.end()) {
        ix = it->second;
        auto& known = tracks[ix];
        if (t.release_year) {
          if (!known.release_year) {
            known.release_year = t.release_year;
          } else if (*known.release_year != *t.release_year) {
            ++rep.release_year_conflicts;
            log_conflict("track '" + t.id + "' release year " + std::to_string(*t.release_year) +
                         " conflicts with " + std::to_string(*known.release_year) + " at line " +
                         std::to_string(rec.line));
          }
        }
        if (!known.album_id && t.album_id) known.album_id = t.album_id;
      } else {
        ix = static_cast<TrackIndex>(tracks.size());
        track_ix.emplace(t.id, ix);
        tracks.push_back(TrackRecord{std::move(t.id), t.release_year, std::move(t.album_id)});
      }
      pl.tracks.push_back(ix);
    }
    playlists.push_back(std::move(pl));
  }
  return Dataset(std::move(users), std::move(tracks), std::move(playlists), options.schema,
                 options.reference_year);
}

std::string join_tags(const std::vector<std::string>& tags) {
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) out += '|';
    out += tags[i];
  }
  return out;
}

std::vector<std::string> split_tags(std::string_view text) {
  std::vector<std::string> tags;
  if (text.empty()) return tags;
  std::size_t start = 0;
  while (true) {
    const auto bar = text.find('|', start);
    tags.emplace_back(text.substr(start, bar == std::string_view::npos ? bar : bar - start));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return tags;
}

const std::vector<std::string> kCsvHeader = {
    "playlist_id", "kind", "user_id", "birth_year", "birth_default", "gender", "province",
    "city", "active", "track_id", "release_year", "album_id", "tags"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

InputFormat parse_input_format(std::string_view text) {
  if (text == "json-lines" || text == "jsonl" || text == "json") return InputFormat::json_lines;
  if (text == "csv") return InputFormat::csv;
  throw ValidationError("unknown input format '" + std::string(text) + "'");
}

Dataset parse_playlists_jsonl(const std::vector<std::string>& lines, const LoadOptions& options,
                              LoadReport* report) {
  const auto n = static_cast<std::int64_t>(lines.size());
  std::vector<std::optional<RawRecord>> parsed(lines.size());
  std::vector<std::string> errors(lines.size());

#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& text = lines[static_cast<std::size_t>(i)];
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      parsed[static_cast<std::size_t>(i)] =
          parse_json_record(text, static_cast<std::size_t>(i) + 1, options.reference_year);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }

  std::vector<RawRecord> records;
  records.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!errors[i].empty()) throw ValidationError(line_error(i + 1, errors[i]));
    if (parsed[i]) records.push_back(std::move(*parsed[i]));
  }
  return assemble(records, options, report);
}

Dataset parse_playlists_csv(const std::vector<std::string>& lines, const LoadOptions& options,
                            LoadReport* report) {
  std::size_t first = 0;
  while (first < lines.size() && (lines[first].empty() || lines[first][0] == '#')) ++first;
  if (first == lines.size()) throw ValidationError("CSV playlist file has no header");
  if (io::split_csv(lines[first]) != kCsvHeader)
    throw ValidationError(line_error(first + 1, "unexpected CSV header"));

  std::vector<RawRecord> records;
  std::unordered_map<std::string, std::size_t> by_playlist;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      const auto f = io::split_csv(lines[i]);
      if (f.size() != kCsvHeader.size()) throw ValidationError("expected 13 fields");
      auto [it, inserted] = by_playlist.emplace(f[0], records.size());
      if (inserted) {
        RawRecord rec;
        rec.line = i + 1;
        rec.playlist_id = f[0];
        rec.kind = parse_playlist_kind(f[1]);
        rec.owner.user_id = f[2];
        if (!f[3].empty()) {
          auto by = io::parse_int(f[3]);
          if (!by) throw ValidationError("birth_year is not an integer");
          rec.owner.birth_year = static_cast<int>(*by);
        }
        rec.owner.birth_default = (f[4] == "1" || f[4] == "true");
        rec.owner.gender = parse_gender(f[5]);
        if (!f[6].empty()) rec.owner.province = f[6];
        if (!f[7].empty()) rec.owner.city = f[7];
        rec.owner.active = !(f[8] == "0" || f[8] == "false");
        rec.tags = split_tags(f[12]);
        check_record(rec, options.reference_year);
        records.push_back(std::move(rec));
      }
      auto& rec = records[it->second];
      if (!f[9].empty()) {
        RawTrack track;
        track.id = f[9];
        if (!f[10].empty()) {
          auto ry = io::parse_int(f[10]);
          if (!ry) throw ValidationError("release_year is not an integer");
          track.release_year = static_cast<int>(*ry);
        }
        if (!f[11].empty()) track.album_id = f[11];
        rec.tracks.push_back(std::move(track));
      }
    } catch (const ValidationError& e) {
      throw ValidationError(line_error(i + 1, e.what()));
    }
  }
  return assemble(records, options, report);
}

Dataset load_playlists(const std::filesystem::path& path, InputFormat format,
                       const LoadOptions& options, LoadReport* report) {
  const auto lines = io::read_lines(path);
  return format == InputFormat::csv ? parse_playlists_csv(lines, options, report)
                                    : parse_playlists_jsonl(lines, options, report);
}

std::string write_playlists_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& pl : dataset.playlists()) {
    const auto& user = dataset.users()[pl.owner];
    json owner = {{"user_id", user.user_id}};
    if (user.birth_year) owner["birth_year"] = *user.birth_year;
    if (user.birth_default) owner["birth_default"] = true;
    if (user.gender != Gender::unknown) owner["gender"] = std::string(to_string(user.gender));
    if (user.province) owner["province"] = *user.province;
    if (user.city) owner["city"] = *user.city;
    if (!user.active) owner["active"] = false;

    json tracks = json::array();
    for (auto t : pl.tracks) {
      const auto& tr = dataset.tracks()[t];
      json entry = {{"track_id", tr.track_id}};
      if (tr.release_year) entry["release_year"] = *tr.release_year;
      if (tr.album_id) entry["album_id"] = *tr.album_id;
      tracks.push_back(std::move(entry));
    }
    json rec = {{"playlist_id", pl.playlist_id},
                {"kind", std::string(to_string(pl.kind))},
                {"owner", std::move(owner)},
                {"tags", pl.tags},
                {"tracks", std::move(tracks)}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::string write_playlists_csv(const Dataset& dataset) {
  std::string out;
  for (std::size_t i = 0; i < kCsvHeader.size(); ++i) {
    if (i) out += ',';
    out += kCsvHeader[i];
  }
  out += '\n';
  auto emit = [&](const Playlist& pl, const TrackRecord* tr) {
    const auto& u = dataset.users()[pl.owner];
    std::vector<std::string> f = {
        pl.playlist_id,
        std::string(to_string(pl.kind)),
        u.user_id,
        u.birth_year ? std::to_string(*u.birth_year) : "",
        u.birth_default ? "1" : "0",
        u.gender == Gender::unknown ? "" : std::string(to_string(u.gender)),
        u.province.value_or(""),
        u.city.value_or(""),
        u.active ? "1" : "0",
        tr ? tr->track_id : "",
        tr && tr->release_year ? std::to_string(*tr->release_year) : "",
        tr ? tr->album_id.value_or("") : "",
        join_tags(pl.tags)};
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) out += ',';
      out += io::csv_escape(f[i]);
    }
    out += '\n';
  };
  for (const auto& pl : dataset.playlists()) {
    if (pl.tracks.empty()) emit(pl, nullptr);
    for (auto t : pl.tracks) emit(pl, &dataset.tracks()[t]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Economics

std::string_view to_string(RegionLevel level) {
  return level == RegionLevel::province ? "province" : "city";
}

EconomicTable::EconomicTable(std::vector<EconomicRow> rows) : rows_(std::move(rows)) {
  std::set<std::tuple<int, std::string, std::string>> keys;
  for (const auto& row : rows_) {
    if (!keys.emplace(static_cast<int>(row.level), row.region_code, row.indicator).second)
      throw ValidationError("duplicate economics key (" + std::string(to_string(row.level)) +
                            ", " + row.region_code + ", " + row.indicator + ")");
    const auto name = lower(row.indicator);
    const bool monetary = name.find("income") != std::string::npos ||
                          name.find("gdp") != std::string::npos;
    if (monetary && row.value < 0.0)
      throw ValidationError("negative value for indicator '" + row.indicator + "' in region " +
                            row.region_code);
  }
}

std::optional<double> EconomicTable::value(RegionLevel level, std::string_view region,
                                           std::string_view indicator) const {
  for (const auto& row : rows_)
    if (row.level == level && row.region_code == region && row.indicator == indicator)
      return row.value;
  return std::nullopt;
}

std::map<std::string, double> EconomicTable::indicator(RegionLevel level,
                                                       std::string_view name) const {
  std::map<std::string, double> out;
  for (const auto& row : rows_)
    if (row.level == level && row.indicator == name) out.emplace(row.region_code, row.value);
  return out;
}

EconomicTable parse_economics(const std::vector<std::string>& lines) {
  if (lines.empty()) throw ValidationError("economics file is empty (header required)");
  const std::vector<std::string> header = {"region_code", "level", "indicator", "value"};
  std::string first = lines[0];
  if (first.rfind("\xEF\xBB\xBF", 0) == 0) first.erase(0, 3);
  if (io::split_csv(first) != header)
    throw ValidationError("economics header must be exactly region_code,level,indicator,value");

  std::vector<EconomicRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = io::split_csv(lines[i]);
    const std::string where = "economics row " + std::to_string(i);
    if (f.size() != 4) throw ValidationError(where + ": expected 4 fields");
    EconomicRow row;
    row.region_code = f[0];
    if (f[1] == "province") row.level = RegionLevel::province;
    else if (f[1] == "city") row.level = RegionLevel::city;
    else throw ValidationError(where + ": unknown level '" + f[1] + "'");
    row.indicator = f[2];
    auto v = io::parse_double(f[3]);
    if (!v) throw ValidationError(where + ": non-numeric value '" + f[3] + "'");
    row.value = *v;
    rows.push_back(std::move(row));
  }
  return EconomicTable(std::move(rows));
}

EconomicTable load_economics(const std::filesystem::path& path) {
  return parse_economics(io::read_lines(path));
}

std::string write_economics(const EconomicTable& table) {
  std::string out = "region_code,level,indicator,value\n";
  for (const auto& row : table.rows()) {
    out += io::csv_escape(row.region_code) + "," + std::string(to_string(row.level)) + "," +
           io::csv_escape(row.indicator) + "," + io::format_double(row.value) + "\n";
  }
  return out;
}

Dataset region_filter(const Dataset& dataset, const std::set<std::string>& excluded_regions) {
  if (excluded_regions.empty()) return dataset;
  return dataset.subset_users([&](const UserRecord& u) {
    if (u.province && excluded_regions.count(*u.province)) return false;
    if (u.city && excluded_regions.count(*u.city)) return false;
    return true;
  });
}

}  // namespace prefnet

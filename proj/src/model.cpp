#include "prefnet/model.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_set>

namespace prefnet {

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::male: return "male";
    case Gender::female: return "female";
    case Gender::unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(PlaylistKind k) {
  return k == PlaylistKind::favorite ? "favorite" : "general";
}

Gender parse_gender(std::string_view text) {
  if (text == "male" || text == "m" || text == "M") return Gender::male;
  if (text == "female" || text == "f" || text == "F") return Gender::female;
  if (text.empty() || text == "unknown") return Gender::unknown;
  throw ValidationError("unknown gender '" + std::string(text) + "'");
}

PlaylistKind parse_playlist_kind(std::string_view text) {
  if (text == "favorite") return PlaylistKind::favorite;
  if (text == "general") return PlaylistKind::general;
  throw ValidationError("unknown playlist kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// TagSchema

TagSchema::TagSchema(std::vector<TagClass> classes) : classes_(std::move(classes)) {
  std::set<std::string> names;
  for (const auto& cls : classes_) {
    if (!names.insert(cls.name).second)
      throw ValidationError("duplicate tag class '" + cls.name + "'");
    std::set<std::string> seen;
    for (const auto& tag : cls.tags)
      if (!seen.insert(tag).second)
        throw ValidationError("duplicate tag '" + tag + "' in class '" + cls.name + "'");
  }
}

const TagSchema& TagSchema::standard() {
  static const TagSchema schema({
      {"Language", {"Chinese", "EU&US", "Japanese", "Korean", "Cantonese", "Other LNGs"}},
      {"Genre",
       {"Pop", "Rock", "Folk", "Electronica", "Dance", "Rap", "Light Music", "Jazz",
        "Country", "R&B/Soul", "Classical", "Ethnic", "Britpop", "Metal", "Punk", "Blues",
        "Reggae", "World Music", "Latin", "Alternative/Indie", "New Age", "Antique",
        "Post-Rock", "Bossa Nova"}},
      {"Scenario",
       {"Early Morning", "Night", "Studying", "Working", "Noon Recess", "Afternoon Tea",
        "Metro", "Driving", "Sports", "Travel", "Walking", "Bar"}},
      {"Emotion",
       {"Nostalgia", "Refreshing", "Romantic", "Sexy", "Sad", "Healing", "Relaxing", "Lonely",
        "Touched", "Exciting", "Happy", "Quiet", "Missing"}},
      {"Theme",
       {"OST", "ACG", "Campus", "Game", "1970s", "1980s", "1990s", "Web Song", "KTV",
        "Classic", "Cover", "Guitar", "Piano", "Instrumental", "Children", "Ranklist",
        "2000s"}},
  });
  return schema;
}

std::optional<std::size_t> TagSchema::class_index(std::string_view name) const {
  for (std::size_t c = 0; c < classes_.size(); ++c)
    if (classes_[c].name == name) return c;
  return std::nullopt;
}

std::optional<std::size_t> TagSchema::tag_index(std::size_t c, std::string_view tag) const {
  const auto& tags = classes_.at(c).tags;
  for (std::size_t t = 0; t < tags.size(); ++t)
    if (tags[t] == tag) return t;
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> TagSchema::resolve(std::string_view ref) const {
  const auto colon = ref.find(':');
  if (colon != std::string_view::npos) {
    if (auto c = class_index(ref.substr(0, colon))) {
      if (auto t = tag_index(*c, ref.substr(colon + 1))) return {*c, *t};
    }
  }
  throw ValidationError("tag '" + std::string(ref) + "' is not in the tag schema");
}

// ---------------------------------------------------------------------------
// TagVectorSet

TagVectorSet TagVectorSet::zeros(const TagSchema& schema) {
  TagVectorSet set;
  set.classes.reserve(schema.class_count());
  for (std::size_t c = 0; c < schema.class_count(); ++c)
    set.classes.emplace_back(schema.cardinality(c), 0.0);
  return set;
}

bool TagVectorSet::is_zero(std::size_t c) const {
  const auto& v = classes.at(c);
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

bool TagVectorSet::all_zero() const {
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (!is_zero(c)) return false;
  return true;
}

void TagVectorSet::normalize() {
  for (auto& v : classes) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (total == 0.0) continue;
    for (auto& x : v) x /= total;
  }
}

TagVectorSet& TagVectorSet::operator+=(const TagVectorSet& other) {
  if (classes.empty()) {
    classes = other.classes;
    return *this;
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (std::size_t t = 0; t < classes[c].size(); ++t) classes[c][t] += other.classes[c][t];
  return *this;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<UserRecord> users, std::vector<TrackRecord> tracks,
                 std::vector<Playlist> playlists, TagSchema schema, int reference_year)
    : users_(std::move(users)),
      tracks_(std::move(tracks)),
      playlists_(std::move(playlists)),
      schema_(std::move(schema)),
      reference_year_(reference_year) {
  user_lookup_.reserve(users_.size());
  for (std::size_t u = 0; u < users_.size(); ++u) {
    const auto& user = users_[u];
    if (!user_lookup_.emplace(user.user_id, static_cast<UserIndex>(u)).second)
      throw ValidationError("duplicate user_id '" + user.user_id + "'");
    if (user.birth_year && (*user.birth_year < kMinBirthYear || *user.birth_year > reference_year_))
      throw ValidationError("user '" + user.user_id + "' has birth year " +
                            std::to_string(*user.birth_year) + " outside [" +
                            std::to_string(kMinBirthYear) + ", " +
                            std::to_string(reference_year_) + "]");
  }
  track_lookup_.reserve(tracks_.size());
  for (std::size_t t = 0; t < tracks_.size(); ++t)
    if (!track_lookup_.emplace(tracks_[t].track_id, static_cast<TrackIndex>(t)).second)
      throw ValidationError("duplicate track_id '" + tracks_[t].track_id + "'");

  favorite_.assign(users_.size(), -1);
  for (std::size_t p = 0; p < playlists_.size(); ++p) {
    const auto& pl = playlists_[p];
    if (pl.owner >= users_.size())
      throw ValidationError("playlist '" + pl.playlist_id + "' has an unresolved owner");
    for (auto t : pl.tracks)
      if (t >= tracks_.size())
        throw ValidationError("playlist '" + pl.playlist_id + "' references an unknown track");
    if (pl.kind == PlaylistKind::favorite) {
      if (!pl.tags.empty())
        throw ValidationError("favorite playlist '" + pl.playlist_id + "' carries tags");
      if (favorite_[pl.owner] >= 0)
        throw ValidationError("user '" + users_[pl.owner].user_id +
                              "' owns more than one favorite playlist");
      favorite_[pl.owner] = static_cast<std::int64_t>(p);
    } else if (pl.tags.size() > kMaxGeneralPlaylistTags) {
      throw ValidationError("playlist '" + pl.playlist_id + "' carries more than " +
                            std::to_string(kMaxGeneralPlaylistTags) + " tags");
    }
  }
}

std::optional<UserIndex> Dataset::find_user(std::string_view user_id) const {
  auto it = user_lookup_.find(std::string(user_id));
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<TrackIndex> Dataset::find_track(std::string_view track_id) const {
  auto it = track_lookup_.find(std::string(track_id));
  if (it == track_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Dataset::favorite_of(UserIndex user) const {
  const auto p = favorite_.at(user);
  if (p < 0) return std::nullopt;
  return static_cast<std::size_t>(p);
}

std::optional<int> Dataset::age(UserIndex user) const {
  const auto& by = users_.at(user).birth_year;
  if (!by) return std::nullopt;
  return reference_year_ - *by;
}

Dataset Dataset::subset_users(const std::function<bool(const UserRecord&)>& keep) const {
  constexpr auto kDropped = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> user_map(users_.size(), kDropped);
  std::vector<UserRecord> users;
  for (std::size_t u = 0; u < users_.size(); ++u) {
    if (!keep(users_[u])) continue;
    user_map[u] = static_cast<std::uint32_t>(users.size());
    users.push_back(users_[u]);
  }

  std::vector<char> track_used(tracks_.size(), 0);
  for (const auto& pl : playlists_)
    if (user_map[pl.owner] != kDropped)
      for (auto t : pl.tracks) track_used[t] = 1;

  std::vector<std::uint32_t> track_map(tracks_.size(), kDropped);
  std::vector<TrackRecord> tracks;
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    if (!track_used[t]) continue;
    track_map[t] = static_cast<std::uint32_t>(tracks.size());
    tracks.push_back(tracks_[t]);
  }

  std::vector<Playlist> playlists;
  for (const auto& pl : playlists_) {
    if (user_map[pl.owner] == kDropped) continue;
    Playlist copy = pl;
    copy.owner = user_map[pl.owner];
    for (auto& t : copy.tracks) t = track_map[t];
    playlists.push_back(std::move(copy));
  }
  return Dataset(std::move(users), std::move(tracks), std::move(playlists), schema_,
                 reference_year_);
}

bool Dataset::operator==(const Dataset& other) const {
  return reference_year_ == other.reference_year_ && schema_ == other.schema_ &&
         users_ == other.users_ && tracks_ == other.tracks_ && playlists_ == other.playlists_;
}

// ---------------------------------------------------------------------------
// Demographics

Dataset filter_demographics(const Dataset& dataset, const DemographicFilter& filter) {
  if (filter.min_age > filter.max_age)
    throw ValidationError("min_age exceeds max_age");
  const int ref = dataset.reference_year();
  return dataset.subset_users([&](const UserRecord& user) {
    if (filter.exclude_default_birthdate && user.birth_default) return false;
    if (!user.birth_year) return true;
    const int age = ref - *user.birth_year;
    return age >= filter.min_age && age <= filter.max_age;
  });
}

std::size_t distinct_length(const Playlist& playlist) {
  std::vector<TrackIndex> ids = playlist.tracks;
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

std::vector<CohortRow> cohort_summary(const Dataset& dataset) {
  struct Acc {
    std::size_t users = 0;
    std::size_t owners = 0;
    std::size_t total_length = 0;
  };
  std::map<std::pair<int, int>, Acc> table;
  for (std::size_t u = 0; u < dataset.users().size(); ++u) {
    const auto age = dataset.age(static_cast<UserIndex>(u));
    if (!age) continue;
    auto& acc = table[{*age, static_cast<int>(dataset.users()[u].gender)}];
    ++acc.users;
    if (auto fp = dataset.favorite_of(static_cast<UserIndex>(u))) {
      ++acc.owners;
      acc.total_length += distinct_length(dataset.playlists()[*fp]);
    }
  }
  std::vector<CohortRow> rows;
  rows.reserve(table.size());
  for (const auto& [key, acc] : table) {
    CohortRow row;
    row.age = key.first;
    row.gender = static_cast<Gender>(key.second);
    row.users = acc.users;
    row.fp_owners = acc.owners;
    if (acc.owners > 0)
      row.mean_fp_length = static_cast<double>(acc.total_length) / static_cast<double>(acc.owners);
    rows.push_back(row);
  }
  return rows;
}

std::optional<double> sex_ratio(const std::vector<CohortRow>& rows, int age) {
  std::size_t males = 0, females = 0;
  for (const auto& row : rows) {
    if (row.age != age) continue;
    if (row.gender == Gender::male) males += row.users;
    if (row.gender == Gender::female) females += row.users;
  }
  if (females == 0) return std::nullopt;
  return static_cast<double>(males) / static_cast<double>(females);
}

}  // namespace prefnet

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace prefnet {

/// Input that violates a documented contract (bad file, bad config, bad
/// argument). The CLI maps it to exit code 1; every other exception is a
/// runtime failure.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Gender : std::uint8_t { male, female, unknown };
enum class PlaylistKind : std::uint8_t { favorite, general };

std::string_view to_string(Gender g);
std::string_view to_string(PlaylistKind k);
Gender parse_gender(std::string_view text);
PlaylistKind parse_playlist_kind(std::string_view text);

using UserIndex = std::uint32_t;
using TrackIndex = std::uint32_t;

inline constexpr int kMinBirthYear = 1900;
inline constexpr std::size_t kMaxGeneralPlaylistTags = 3;

struct UserRecord {
  std::string user_id;
  std::optional<int> birth_year;
  /// Set at ingestion when the full birthdate is the platform default.
  bool birth_default = false;
  Gender gender = Gender::unknown;
  std::optional<std::string> province;
  std::optional<std::string> city;
  bool active = true;

  bool operator==(const UserRecord&) const = default;
};

struct TrackRecord {
  std::string track_id;
  std::optional<int> release_year;
  std::optional<std::string> album_id;

  bool operator==(const TrackRecord&) const = default;
};

struct Playlist {
  std::string playlist_id;
  UserIndex owner = 0;
  PlaylistKind kind = PlaylistKind::general;
  std::vector<TrackIndex> tracks;
  /// "class:tag" references, resolved against the schema by the tag mapper.
  std::vector<std::string> tags;

  bool operator==(const Playlist&) const = default;
};

struct TagClass {
  std::string name;
  std::vector<std::string> tags;

  bool operator==(const TagClass&) const = default;
};

class TagSchema {
 public:
  TagSchema() = default;
  explicit TagSchema(std::vector<TagClass> classes);

  /// The five-class platform tag-set (Language, Genre, Scenario, Emotion, Theme).
  static const TagSchema& standard();

  std::size_t class_count() const { return classes_.size(); }
  const TagClass& tag_class(std::size_t c) const { return classes_.at(c); }
  const std::vector<TagClass>& classes() const { return classes_; }
  std::size_t cardinality(std::size_t c) const { return classes_.at(c).tags.size(); }

  std::optional<std::size_t> class_index(std::string_view name) const;
  std::optional<std::size_t> tag_index(std::size_t c, std::string_view tag) const;

  /// Resolves a "class:tag" reference to (class index, tag index).
  /// Throws ValidationError naming the reference when it is not in the schema.
  std::pair<std::size_t, std::size_t> resolve(std::string_view ref) const;

  bool operator==(const TagSchema& other) const { return classes_ == other.classes_; }

 private:
  std::vector<TagClass> classes_;
};

/// One strength vector per tag class.
struct TagVectorSet {
  std::vector<std::vector<double>> classes;

  static TagVectorSet zeros(const TagSchema& schema);

  bool is_zero(std::size_t c) const;
  bool all_zero() const;
  /// Scales every non-zero class vector to sum to 1; zero vectors stay zero.
  void normalize();
  TagVectorSet& operator+=(const TagVectorSet& other);

  bool operator==(const TagVectorSet&) const = default;
};

/// Immutable user/track/playlist store. Playlists refer to users and tracks by
/// index into the corresponding tables.
class Dataset {
 public:
  Dataset() = default;
  /// Validates every invariant (unique ids, resolvable references, playlist
  /// tag rules, one favorite playlist per owner, birth-year range) and throws
  /// ValidationError on the first violation.
  Dataset(std::vector<UserRecord> users, std::vector<TrackRecord> tracks,
          std::vector<Playlist> playlists, TagSchema schema, int reference_year);

  const std::vector<UserRecord>& users() const { return users_; }
  const std::vector<TrackRecord>& tracks() const { return tracks_; }
  const std::vector<Playlist>& playlists() const { return playlists_; }
  const TagSchema& schema() const { return schema_; }
  int reference_year() const { return reference_year_; }

  std::optional<UserIndex> find_user(std::string_view user_id) const;
  std::optional<TrackIndex> find_track(std::string_view track_id) const;
  /// Index of the user's favorite playlist, if any.
  std::optional<std::size_t> favorite_of(UserIndex user) const;
  std::optional<int> age(UserIndex user) const;

  /// Keeps the users accepted by `keep`, their playlists, and the tracks those
  /// playlists reference. Relative order is preserved.
  Dataset subset_users(const std::function<bool(const UserRecord&)>& keep) const;

  bool operator==(const Dataset& other) const;

 private:
  std::vector<UserRecord> users_;
  std::vector<TrackRecord> tracks_;
  std::vector<Playlist> playlists_;
  TagSchema schema_;
  int reference_year_ = 0;
  std::unordered_map<std::string, UserIndex> user_lookup_;
  std::unordered_map<std::string, TrackIndex> track_lookup_;
  std::vector<std::int64_t> favorite_;  // per user, -1 when absent
};

struct DemographicFilter {
  int min_age = 12;
  int max_age = 40;
  bool exclude_default_birthdate = true;
};

/// Retains users whose age (reference year minus birth year) lies in
/// [min_age, max_age]. Users without a birth year are kept; see README.
Dataset filter_demographics(const Dataset& dataset, const DemographicFilter& filter);

struct CohortRow {
  int age = 0;
  Gender gender = Gender::unknown;
  std::size_t users = 0;
  std::size_t fp_owners = 0;
  std::optional<double> mean_fp_length;
};

/// Rows sorted by (age, gender). Users without a birth year are not counted.
std::vector<CohortRow> cohort_summary(const Dataset& dataset);

/// Males per female at the given age; absent when there are no females.
std::optional<double> sex_ratio(const std::vector<CohortRow>& rows, int age);

/// Number of distinct tracks in a playlist.
std::size_t distinct_length(const Playlist& playlist);

}  // namespace prefnet

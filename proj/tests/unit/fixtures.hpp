#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "prefnet/model.hpp"

namespace fixture {

using namespace prefnet;

// Small hand-built datasets. Playlists name tracks by id; tracks are created
// on first use with the given release year (or none).
struct Builder {
  std::vector<UserRecord> users;
  std::vector<TrackRecord> tracks;
  std::vector<Playlist> playlists;
  int reference_year = 2016;

  UserIndex user(const std::string& id, std::optional<int> birth = std::nullopt, Gender g = Gender::unknown,
                 std::optional<std::string> province = std::nullopt) {
    UserRecord u;
    u.user_id = id;
    u.birth_year = birth;
    u.gender = g;
    u.province = province;
    users.push_back(u);
    return static_cast<UserIndex>(users.size() - 1);
  }

  TrackIndex track(const std::string& id, std::optional<int> year = std::nullopt) {
    for (std::size_t i = 0; i < tracks.size(); ++i)
      if (tracks[i].track_id == id) return static_cast<TrackIndex>(i);
    tracks.push_back({id, year, std::nullopt});
    return static_cast<TrackIndex>(tracks.size() - 1);
  }

  void favorite(UserIndex owner, std::initializer_list<std::string> ids) {
    Playlist p;
    p.playlist_id = "fp-" + users[owner].user_id;
    p.owner = owner;
    p.kind = PlaylistKind::favorite;
    for (const auto& id : ids) p.tracks.push_back(track(id));
    playlists.push_back(p);
  }

  void general(UserIndex owner, const std::string& id, std::initializer_list<std::string> ids,
               std::vector<std::string> tags) {
    Playlist p;
    p.playlist_id = id;
    p.owner = owner;
    p.kind = PlaylistKind::general;
    for (const auto& t : ids) p.tracks.push_back(track(t));
    p.tags = std::move(tags);
    playlists.push_back(p);
  }

  Dataset build() const { return Dataset(users, tracks, playlists, TagSchema::standard(), reference_year); }
};

// user1 FP {a,b,c}, user2 FP {a,d}
inline Dataset two_user_example() {
  Builder b;
  const auto u1 = b.user("u1");
  const auto u2 = b.user("u2");
  b.favorite(u1, {"a", "b", "c"});
  b.favorite(u2, {"a", "d"});
  return b.build();
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("prefnet-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture

// Serial reference vs OpenMP kernels on a synthetic dataset.
// usage: bench_kernels [users] [threads] [reps]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "prefnet/community.hpp"
#include "prefnet/parallel.hpp"
#include "prefnet/serial.hpp"
#include "prefnet/synth.hpp"

using namespace prefnet;

namespace {

template <typename F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - t0;
    if (d.count() < best) best = d.count();
  }
  return best;
}

volatile double sink = 0;

}  // namespace

int main(int argc, char** argv) {
  const std::size_t users = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 50000;
  const int threads = argc > 2 ? std::atoi(argv[2]) : 0;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 5;

  SynthConfig cfg;
  cfg.users = users;
  cfg.tracks = users / 2;
  cfg.fp_length_min = 20;
  cfg.fp_length_max = 80;
  cfg.female_fraction = 0.45;
  cfg.max_track_age = 40;
  const auto data = generate(cfg, 7);
  const auto& ds = data.dataset;

  set_thread_count(threads);
  std::printf("users %zu, tracks %zu, threads %d, best of %d\n", ds.users().size(), ds.tracks().size(),
              thread_count(), reps);

  const auto g = build_graph(ds);
  const auto wg = WeightedGraph::from_bipartite(g);
  const auto tags = map_tags_to_tracks(ds);
  const auto assignment = detect_communities(g, {1});
  std::vector<CommunityLabel> labels(assignment.user_community);
  labels.insert(labels.end(), assignment.track_community.begin(), assignment.track_community.end());

  auto row = [&](const char* name, auto&& ser, auto&& par) {
    const double s = best_ms(reps, ser), p = best_ms(reps, par);
    std::printf("%-22s serial %9.2f ms  parallel %9.2f ms  x%.2f\n", name, s, p, s / p);
  };
  row("attention_by_node", [&] { sink = serial::attention_by_node(g)[0]; },
      [&] { sink = attention_by_node(g)[0]; });
  row("modularity", [&] { sink = serial::modularity(wg, labels); }, [&] { sink = modularity(wg, labels); });
  row("map_tags_to_users", [&] { sink = double(serial::map_tags_to_users(ds, tags).size()); },
      [&] { sink = double(map_tags_to_users(ds, tags).size()); });
  row("attention_matrix", [&] { sink = serial::attention_matrix(ds).values[0]; },
      [&] { sink = attention_matrix(ds, g).values[0]; });
  row("user_community_counts", [&] { sink = double(serial::user_community_counts(ds, g, assignment).size()); },
      [&] { sink = double(user_community_counts(ds, g, assignment).size()); });
  return 0;
}

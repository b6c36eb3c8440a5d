#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "prefnet/io.hpp"
#include "prefnet/parallel.hpp"
#include "prefnet/pipeline.hpp"
#include "prefnet/synth.hpp"

using namespace prefnet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Synthetic fixture written once per process.
const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    const auto d = fixture::temp_dir("pipeline-fixture");
    SynthConfig cfg;
    cfg.users = 3000;
    cfg.tracks = 2000;
    cfg.regions = 6;
    cfg.cities_per_region = 2;
    cfg.female_fraction = 0.5;
    cfg.missing_birth_fraction = 0.02;
    cfg.income_block_link = 0.5;
    write_synth_outputs(d, cfg, generate(cfg, 77));
    return d;
  }();
  return dir;
}

PipelineConfig base_config(const std::string& out_name) {
  PipelineConfig cfg;
  cfg.input = fixture_dir() / "playlists.jsonl";
  cfg.economics = fixture_dir() / "economics.csv";
  cfg.out = fixture::temp_dir(out_name);
  cfg.seed = 5;
  cfg.regional.min_users = 5;
  return cfg;
}

std::map<std::string, std::string> bundle(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PREFNET_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("full run writes every section and a complete manifest") {
  const auto cfg = base_config("pipeline-full");
  const auto result = run_pipeline(cfg);
  for (const auto& s : result.stages) CHECK(s.status == "complete");

  const auto report = json::parse(slurp(cfg.out / "report.json"));
  for (const char* key : {"schema_version", "seed", "dataset", "graph", "tags", "communities", "diversity",
                          "kld_by_age", "temporal", "fits", "peak_sensitivity_age", "age_modes", "regional", "stages"})
    CHECK_MESSAGE(report.contains(key), key);

  const auto manifest = json::parse(slurp(cfg.out / "manifest.json"));
  CHECK(manifest["complete"] == true);
  CHECK(manifest["schema_version"] == 1);
  CHECK(manifest["files"].size() == result.files.size());
  for (const auto& f : manifest["files"]) {
    const auto path = cfg.out / f["path"].get<std::string>();
    REQUIRE(fs::exists(path));
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(slurp(path))));
    CHECK(f["fnv1a64"] == hex);
    if (path.extension() == ".csv") CHECK(slurp(path).rfind("# schema_version=1\n", 0) == 0);
    if (path.extension() == ".json") CHECK(json::parse(slurp(path)).contains("schema_version"));
  }
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("regional without economics names the stage") {
  auto cfg = base_config("pipeline-noecon");
  cfg.economics.reset();
  cfg.targets = {"regional"};
  try {
    run_pipeline(cfg);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "regional");
    CHECK(e.validation());
  }
  const auto manifest = json::parse(slurp(cfg.out / "manifest.json"));
  CHECK(manifest["complete"] == false);
}

TEST_CASE("targets write only their own outputs") {
  auto cfg = base_config("pipeline-graph");
  cfg.targets = {"graph"};
  cfg.report = false;
  const auto result = run_pipeline(cfg);
  for (const auto& f : result.files) CHECK((f.rfind("degree_", 0) == 0 || f == "attention.csv"));
  CHECK(fs::exists(cfg.out / "manifest.json"));
  CHECK(!fs::exists(cfg.out / "report.json"));
}

TEST_CASE("identical bytes across runs and thread counts") {
  auto a = base_config("pipeline-det-a");
  auto b = base_config("pipeline-det-b");
  set_thread_count(1);
  run_pipeline(a);
  set_thread_count(3);
  run_pipeline(b);
  set_thread_count(0);
  const auto ba = bundle(a.out), bb = bundle(b.out);
  CHECK(ba.size() == bb.size());
  for (const auto& [name, bytes] : ba) CHECK_MESSAGE(bb.at(name) == bytes, name);
}

TEST_CASE("fit from a points file") {
  const auto dir = fixture::temp_dir("pipeline-points");
  std::string csv = "# schema_version=1\nx,y\n";
  for (int x = 1; x <= 30; ++x) csv += std::to_string(x) + "," + io::format_double(power_exp_tail(x, 1.97, 0.34, 0.023)) + "\n";
  io::write_file(dir / "points.csv", csv);
  fit_points_file("decay", {dir / "points.csv", dir / "out"});
  const auto fit = json::parse(slurp(dir / "out" / "fit_decay.json"));
  CHECK(fit["fit"]["b"].get<double>() == doctest::Approx(0.34).epsilon(1e-9));
  CHECK(read_points_csv(dir / "points.csv").size() == 30);
  io::write_file(dir / "bad.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(read_points_csv(dir / "bad.csv"), ValidationError);
}

TEST_CASE("cli exit codes") {
  const auto out = fixture::temp_dir("pipeline-cli");
  const auto in = (fixture_dir() / "playlists.jsonl").string();
  CHECK(run_cli("--out " + out.string() + " graph-stats --input " + in) == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(run_cli("--out " + out.string() + " fit correlate --input " + in) == 1);
  CHECK(run_cli("--out " + out.string() + " graph-stats --input /nonexistent/file.jsonl") == 1);
  CHECK(run_cli("--bogus-flag") == 1);
  io::write_file(out / "bad.conf", "users = -3\n");
  CHECK(run_cli("--out " + out.string() + " synth --config " + (out / "bad.conf").string()) == 1);
  io::write_file(out / "ok.conf", "users = 200\ntracks = 500\n");
  CHECK(run_cli("--seed 3 --out " + (out / "synth").string() + " synth --config " + (out / "ok.conf").string()) == 0);
  CHECK(fs::exists(out / "synth" / "ground_truth.json"));
}

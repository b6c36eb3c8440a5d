#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefnet/io.hpp"
#include "prefnet/parallel.hpp"
#include "prefnet/pipeline.hpp"
#include "prefnet/synth.hpp"

using namespace prefnet;

namespace {

struct InputArgs {
  std::string input;
  std::string format = "jsonl";
  std::string economics;
  std::vector<std::string> exclude_regions;
  int reference_year = 2016;
  int min_age = 12;
  int max_age = 40;
  bool no_age_filter = false;
  bool keep_default_birthdate = false;
};

void add_input_options(CLI::App* cmd, InputArgs& args) {
  cmd->add_option("--input", args.input, "Playlist export (JSON-lines or CSV)")->required();
  cmd->add_option("--format", args.format, "jsonl or csv")->capture_default_str();
  cmd->add_option("--economics", args.economics, "Regional indicator CSV");
  cmd->add_option("--exclude-regions", args.exclude_regions, "Province or city codes to drop")->delimiter(',');
  cmd->add_option("--reference-year", args.reference_year, "Year ages are measured against")->capture_default_str();
  cmd->add_option("--min-age", args.min_age)->capture_default_str();
  cmd->add_option("--max-age", args.max_age)->capture_default_str();
  cmd->add_flag("--no-age-filter", args.no_age_filter, "Keep users of every age");
  cmd->add_flag("--keep-default-birthdate", args.keep_default_birthdate,
                "Keep users whose birthdate is the platform default");
}

void apply_input(const InputArgs& args, PipelineConfig& cfg) {
  cfg.input = args.input;
  cfg.format = parse_input_format(args.format);
  if (!args.economics.empty()) cfg.economics = args.economics;
  cfg.exclude_regions.insert(args.exclude_regions.begin(), args.exclude_regions.end());
  cfg.reference_year = args.reference_year;
  cfg.age_filter = !args.no_age_filter;
  cfg.demographics.min_age = args.min_age;
  cfg.demographics.max_age = args.max_age;
  cfg.demographics.exclude_default_birthdate = !args.keep_default_birthdate;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefnet: playlist preference-network analytics"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out = "out";
  app.add_option("--seed", seed, "Root seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker cap (0: runtime default)");
  app.add_option("--out", out, "Output directory")->capture_default_str();

  InputArgs input;
  PipelineConfig cfg;
  std::string level = "group", gender = "all", band = "all", fit_model, points, synth_config;
  double min_gain = 1e-7;
  std::size_t top_k = 8, min_region_users = 10;
  std::string indicator = "income";
  double age_threshold = 0.10;

  struct Stage {
    const char* name;
    const char* help;
    std::vector<std::string> targets;
  };
  const std::vector<Stage> stages = {
      {"ingest", "Load and validate playlists; write cohort table", {"ingest"}},
      {"graph-stats", "Degree and attention distributions", {"graph"}},
      {"tagmap", "Tag vector-sets for tracks, users or groups", {"tagmap"}},
      {"communities", "Community detection and profiles", {"communities"}},
      {"diversity", "Tag and community diversity per group", {"diversity"}},
      {"divergence", "Male/female KLD and JSD per age", {"divergence"}},
      {"temporal", "Attention matrices, decay and sensitivity", {"temporal"}},
      {"agemode", "Age-mode trend code per tag", {"agemode"}},
      {"report", "Run every stage and write report.json", {}},
  };
  std::vector<std::pair<CLI::App*, std::vector<std::string>>> pipeline_cmds;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_input_options(cmd, input);
    pipeline_cmds.emplace_back(cmd, s.targets);
    if (std::string(s.name) == "tagmap") cmd->add_option("--level", level, "track, user or group")->capture_default_str();
    if (std::string(s.name) == "communities" || std::string(s.name) == "report") {
      cmd->add_option("--min-gain", min_gain, "Louvain stopping threshold")->capture_default_str();
      cmd->add_option("--top-k", top_k, "Communities counted in the coverage figure")->capture_default_str();
    }
    if (std::string(s.name) == "temporal" || std::string(s.name) == "report") {
      cmd->add_option("--gender", gender, "all, male or female")->capture_default_str();
      cmd->add_option("--popularity-band", band, "all, hot, middle or unpopular")->capture_default_str();
    }
    if (std::string(s.name) == "agemode" || std::string(s.name) == "report")
      cmd->add_option("--threshold", age_threshold, "Relative change between stages")->capture_default_str();
    if (std::string(s.name) == "report") {
      cmd->add_option("--indicator", indicator, "Economic indicator for regional correlation")->capture_default_str();
      cmd->add_option("--min-region-users", min_region_users)->capture_default_str();
    }
  }

  auto* fit = app.add_subcommand("fit", "Model fits: decay, bigaussian, correlate, agemode");
  fit->add_option("model", fit_model, "decay, bigaussian, correlate or agemode")
      ->required()
      ->check(CLI::IsMember({"decay", "bigaussian", "correlate", "agemode"}));
  fit->add_option("--points", points, "CSV with x,y columns; fits it directly instead of running the pipeline");
  fit->add_option("--input", input.input, "Playlist export");
  fit->add_option("--format", input.format)->capture_default_str();
  fit->add_option("--economics", input.economics, "Regional indicator CSV");
  fit->add_option("--exclude-regions", input.exclude_regions)->delimiter(',');
  fit->add_option("--reference-year", input.reference_year)->capture_default_str();
  fit->add_flag("--no-age-filter", input.no_age_filter);
  fit->add_option("--indicator", indicator)->capture_default_str();
  fit->add_option("--min-region-users", min_region_users)->capture_default_str();
  fit->add_option("--threshold", age_threshold)->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted ground truth");
  synth->add_option("--config", synth_config, "Flat key = value file (defaults when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    set_thread_count(threads);
    if (synth->parsed()) {
      const auto config = synth_config.empty() ? SynthConfig{} : load_synth_config(synth_config);
      const auto result = generate(config, seed);
      write_synth_outputs(out, config, result);
      std::cout << "wrote " << result.dataset.users().size() << " users, " << result.dataset.tracks().size()
                << " tracks to " << out << "\n";
      return 0;
    }
    cfg.out = out;
    cfg.seed = seed;
    cfg.min_gain = min_gain;
    cfg.top_k = top_k;
    cfg.tag_level = parse_tag_level(level);
    cfg.gender = parse_gender_filter(gender);
    cfg.band = parse_popularity_band(band);
    cfg.age_mode.threshold = age_threshold;
    cfg.regional.indicator = indicator;
    cfg.regional.min_users = min_region_users;

    if (fit->parsed()) {
      if (!points.empty()) {
        if (fit_model != "decay" && fit_model != "bigaussian")
          throw ValidationError("--points only applies to decay and bigaussian");
        fit_points_file(fit_model, {points, out});
        return 0;
      }
      if (input.input.empty()) throw ValidationError("fit needs --input or --points");
      apply_input(input, cfg);
      cfg.targets = fit_model == "correlate" ? std::set<std::string>{"regional"}
                    : fit_model == "agemode" ? std::set<std::string>{"agemode"}
                                             : std::set<std::string>{"fit"};
      cfg.report = false;
      run_pipeline(cfg);
      return 0;
    }
    for (const auto& [cmd, targets] : pipeline_cmds) {
      if (!cmd->parsed()) continue;
      apply_input(input, cfg);
      cfg.targets.insert(targets.begin(), targets.end());
      cfg.report = targets.empty();
      const auto result = run_pipeline(cfg);
      for (const auto& f : result.files) std::cout << (std::filesystem::path(out) / f).string() << "\n";
      return 0;
    }
    return 1;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.validation() ? 1 : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

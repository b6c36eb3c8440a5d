#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prefnet/fit.hpp"
#include "prefnet/ingest.hpp"
#include "prefnet/model.hpp"

namespace prefnet {

/// Generator settings. Read from a flat `key = value` file; see README for
/// the key list.
struct SynthConfig {
  std::size_t users = 1000;
  std::size_t tracks = 1000;
  std::size_t blocks = 8;
  /// Probability that a favorite is drawn from any block rather than the user's own.
  double epsilon = 0.05;
  std::size_t fp_length_min = 10;
  std::size_t fp_length_max = 30;
  int reference_year = 2016;
  /// Release years span [reference_year - max_track_age, reference_year].
  int max_track_age = 60;
  int age_min = 12;
  int age_max = 40;
  double missing_birth_fraction = 0.0;
  double female_fraction = 0.4;
  double unknown_gender_fraction = 0.0;
  /// Every k-th track has no release year (0 disables).
  std::size_t undated_every = 0;

  /// Decay law I^G(x) = a x^-b e^{-c x} planted for x >= 1.
  double decay_a = 1.97;
  double decay_b = 0.34;
  double decay_c = 0.023;
  /// Cohort sensitivity shape over age at release; height 0 disables it.
  BigaussianParams sensitivity{0.43, 12.88, 0.87, 13.18, 7.26};

  std::size_t general_playlists = 0;  // 0: tracks / 10
  std::size_t general_playlist_length = 20;
  /// Chance that a playlist tag is random instead of the block's planted tag.
  double tag_noise = 0.1;

  /// Female users lean toward the first half of the blocks, males toward the second.
  double gender_skew = 0.0;

  std::size_t regions = 0;
  std::size_t cities_per_region = 2;
  /// Probability, scaled by normalized regional income, of using block 0.
  double income_block_link = 0.0;
  /// Added to gender_skew, scaled by normalized regional income.
  double income_gender_slope = 0.0;
};

SynthConfig parse_synth_config(const std::vector<std::string>& lines);
SynthConfig load_synth_config(const std::filesystem::path& path);
std::string write_synth_config(const SynthConfig& config);

/// Year-level sampling law shared by all users.
struct SynthPlan {
  /// Oldest first.
  std::vector<int> release_years;
  /// rho_x for each release year, from the generated track layout.
  std::vector<double> track_share;
  /// Planted A^G per release year.
  std::vector<double> target_attention;
  /// Per release year multiplier found by iterative proportional fitting so
  /// that the cohort mixture reproduces target_attention.
  std::vector<double> correction;
  std::size_t ipf_iterations = 0;
};

/// Throws ValidationError for an infeasible configuration.
SynthPlan make_synth_plan(const SynthConfig& config);

/// P_j over the plan's release years for a cohort; an absent birth year gets
/// the target marginal.
std::vector<double> planted_release_distribution(const SynthConfig& config, const SynthPlan& plan,
                                                 std::optional<int> birth_year);

struct GroundTruth {
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> user_blocks;   // dataset user order
  std::vector<std::uint32_t> track_blocks;  // dataset track order (referenced tracks only)
  /// [block][class] -> tag index.
  std::vector<std::vector<std::size_t>> block_tags;
  std::vector<std::string> region_codes;
  std::vector<double> region_income;
  SynthPlan plan;
};

struct SynthResult {
  Dataset dataset;
  EconomicTable economics;
  GroundTruth truth;
};

/// Deterministic for a fixed (config, seed), independent of thread count.
SynthResult generate(const SynthConfig& config, std::uint64_t seed);

/// Block labels are keyed by user_id and track_id.
std::string ground_truth_json(const SynthConfig& config, const Dataset& dataset, const GroundTruth& truth);

/// playlists.jsonl, economics.csv (when regions > 0) and ground_truth.json.
void write_synth_outputs(const std::filesystem::path& dir, const SynthConfig& config, const SynthResult& result);

}  // namespace prefnet

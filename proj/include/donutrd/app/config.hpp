#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "donutrd/core.hpp"
#include "donutrd/diagnostics.hpp"
#include "donutrd/elasticity.hpp"
#include "donutrd/honest.hpp"
#include "donutrd/synth.hpp"

namespace donutrd::app {

struct RunConfig {
  // Exactly one of these is set.
  std::optional<std::filesystem::path> input;
  std::optional<CohortParams> simulation;

  CsvSchema schema;
  int threshold = kDefaultThreshold;
  std::uint64_t seed = 20240601;
  bool simulation_seed_pinned = false;  // [simulation] seed given explicitly

  RdSpec oop = default_spec("oop");
  RdSpec adherence = default_spec("adherence");
  RdSpec enrollment = default_spec("treated");
  HonestSettings honest;
  double weak_floor = kDefaultWeakFloor;

  BaselineMode baseline_mode = BaselineMode::boundary;
  int baseline_window = 5;
  int replicates = 1999;

  std::vector<int> placebo_thresholds = default_placebo_thresholds();
  std::vector<double> bandwidths = default_bandwidths();
  std::vector<std::string> balance_covariates = {
      "sex", "charlson", "prior_oop_30d", "diagnosis_year", "diagnosis_month"};

  std::size_t mc_replications = 0;  // simulate: 0 skips the Monte Carlo run

  std::filesystem::path out_dir = "out";

  /// Seed overrides (--seed) go through here so the simulation seed follows
  /// unless it was pinned in the file.
  void set_seed(std::uint64_t s);
  PedSpecs ped_specs() const;
  void validate() const;
};

/// Parses TOML. Relative paths resolve against `base_dir`. Throws
/// Error{config} with the offending key in the message.
RunConfig parse_config(std::string_view toml_text,
                       const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// TOML text with every key at its default (main analysis).
std::string default_config_text();

}  // namespace donutrd::app

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovl/model.hpp"
#include "ovl/sim.hpp"
#include "ovl/spectral.hpp"
#include "ovl/vec3.hpp"

namespace ovl {

// One experiment, fully described by a JSON file. Unknown keys anywhere in
// the document are rejected; all physical preconditions are re-checked at
// load so a config that parses is a config that runs.
struct ExperimentConfig {
  ModelParams model;
  IntegratorScheme scheme;
  uint64_t n_traj = 0;
  std::vector<double> sample_times;

  std::optional<SpectralGrid> grid;
  std::optional<RegimeParams> regime;  // when present, defines model coefficients
  std::vector<Vec3> lambdas;           // CF wavevectors (spectral / compare)

  struct InitialDensity {
    double sigma = 1.0;  // isotropic Gaussian width
    Vec3 center;
  };
  std::optional<InitialDensity> initial_density;

  std::vector<double> sweep_epsilons;  // used by the sweep workflow

  // Optional flagship-workflow tag: speed_relaxation | cf_crosscheck |
  // v0_symmetry | diffusion_limit | wave_limit. Empty = generic run.
  std::string experiment;

  uint64_t master_seed = 0;
  std::vector<std::string> output_formats;  // subset of {"csv", "binary"}
  std::map<std::string, double> thresholds;

  double threshold_or(const std::string& name, double fallback) const;
  bool wants_format(const std::string& fmt) const;
};

// Parses and validates config text; error messages carry the 1-based line for
// syntax errors and the JSON path for schema/physics violations.
ExperimentConfig parse_config_text(const std::string& text);

// Reads the file and delegates to parse_config_text; IoError on read failure.
ExperimentConfig load_config_file(const std::string& path);

// Canonical serialized form (sorted keys, defaults materialized): two configs
// describing the same experiment dump to identical bytes.
std::string canonical_config_dump(const ExperimentConfig& cfg);

uint64_t fnv1a64(const std::string& bytes);

// Hex digest of the canonical dump; recorded in output manifests.
std::string config_hash_hex(const ExperimentConfig& cfg);

}

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ovl/analysis.hpp"
#include "ovl/config.hpp"
#include "ovl/sim.hpp"
#include "ovl/spectral.hpp"

namespace ovl {

// Everything a workflow produced, still in memory; the CLI decides which
// pieces become files and in which formats.
struct ExperimentOutput {
  std::vector<ComparisonReport> reports;
  std::vector<std::pair<std::string, Ensemble>> ensembles;      // base name -> data
  std::vector<std::pair<std::string, DensityResult>> densities;
  std::vector<std::pair<std::string, std::string>> tables;      // file name -> text
  bool all_pass() const;
};

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

// Generic workflows behind the simulate / spectral / compare / sweep verbs.
ExperimentOutput run_simulate_workflow(const ExperimentConfig& cfg, int threads);
ExperimentOutput run_spectral_workflow(const ExperimentConfig& cfg, int threads);
ExperimentOutput run_compare_workflow(const ExperimentConfig& cfg, int threads,
                                      const std::string& ensemble_path = "",
                                      const std::string& prediction_path = "");
ExperimentOutput run_sweep_workflow(const ExperimentConfig& cfg, int threads);

// Flagship workflows (configs usually come from preset_config).
ExperimentOutput run_speed_relaxation(const ExperimentConfig& cfg, int threads);
ExperimentOutput run_cf_crosscheck(const ExperimentConfig& cfg, int threads);
ExperimentOutput run_v0_symmetry(const ExperimentConfig& cfg, int threads);
ExperimentOutput run_diffusion_limit(const ExperimentConfig& cfg, int threads);
ExperimentOutput run_wave_limit(const ExperimentConfig& cfg, int threads);

// Dispatches on cfg.experiment when set, otherwise falls back to the generic
// workflow implied by the config (sweep if sweep_epsilons, else compare).
ExperimentOutput run_experiment(const ExperimentConfig& cfg, int threads,
                                const std::string& ensemble_path = "",
                                const std::string& prediction_path = "");

// Exact mean of the squared speed after `steps` explicit-Euler steps with
// constant coefficients: m <- m (1 - a dt)^2 + 2 b^2 dt. The orthogonal kick
// adds exactly 2 b^2 dt in expectation regardless of the current state, so
// this recursion is the noise-free value of the ensemble average.
double em_mean_speed_sq(double a, double b, double v0_sq, double dt,
                        long long steps);

}

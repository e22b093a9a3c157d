#pragma once

#include <cstdint>
#include <vector>

#include "ovl/model.hpp"
#include "ovl/rng.hpp"

namespace ovl {

struct State {
  double t = 0.0;
  Vec3 x;
  Vec3 v;
};

enum class SchemeKind { EulerMaruyama, SpeedProjected };

struct IntegratorScheme {
  SchemeKind kind = SchemeKind::EulerMaruyama;
  double dt = 0.0;

  // dt > 0; for EulerMaruyama additionally dt * max a(t) < 0.5.
  void validate(const CoefficientProfile& coeffs, double t_max) const;
};

struct Ensemble {
  ModelParams params;
  IntegratorScheme scheme;
  uint64_t master_seed = 0;
  uint64_t n_traj = 0;
  std::vector<double> sample_times;  // as realized on the step grid
  std::vector<State> states;         // trajectory-major: [traj][time_idx]

  size_t n_times() const { return sample_times.size(); }
  const State& at(size_t traj, size_t time_idx) const {
    return states[traj * sample_times.size() + time_idx];
  }
  // Index of a sample time, matched to 1e-9 absolute; throws TimeNotSampled.
  size_t time_index(double t) const;
};

// One Euler-Maruyama step of dv = -a v dt + (v x H) dt + (b/|v|)(v x dw),
// dx = v dt, with coefficients evaluated at the pre-step time.
State em_step(const State& s, const ModelParams& params, double dt, Vec3 dw);

// em_step for the direction, then the speed rescaled onto the deterministic
// law at t + dt.
State speed_projected_step(const State& s, const ModelParams& params, double dt,
                           Vec3 dw, const SpeedLaw& law);

// Internal variant taking the precomputed target squared speed.
State speed_projected_step_to(const State& s, const ModelParams& params, double dt,
                              Vec3 dw, double target_speed_sq);

// Generates n_traj independent trajectories sampled at sample_times (which
// must be strictly increasing, start at 0, and lie on the dt grid within
// 1e-9). Bitwise reproducible for fixed inputs at any thread count.
Ensemble simulate_ensemble(const ModelParams& params, const IntegratorScheme& scheme,
                           uint64_t n_traj, const std::vector<double>& sample_times,
                           uint64_t master_seed, int n_threads = 1);

}

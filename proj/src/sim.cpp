#include "ovl/sim.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>

#include "ovl/errors.hpp"

namespace ovl {

void IntegratorScheme::validate(const CoefficientProfile& coeffs, double t_max) const {
  if (dt <= 0.0) throw ConfigError("integrator dt must be positive");
  if (kind == SchemeKind::EulerMaruyama) {
    // Conservative bound: max a(t) over [0, t_max] for the closed vocabulary.
    double a_max = coeffs.a_fn().c0;
    switch (coeffs.a_fn().kind) {
      case TimeFunction::Kind::Constant: break;
      case TimeFunction::Kind::Ramp:
        a_max = std::max(a_max, coeffs.a_fn().c0 + coeffs.a_fn().c1 * t_max);
        break;
      case TimeFunction::Kind::Sine:
        a_max = coeffs.a_fn().c0 + std::abs(coeffs.a_fn().c1);
        break;
    }
    if (dt * a_max >= 0.5)
      throw ConfigError("EulerMaruyama stability guard: dt * max(a) = " +
                        std::to_string(dt * a_max) + " must be < 0.5");
  }
}

size_t Ensemble::time_index(double t) const {
  for (size_t i = 0; i < sample_times.size(); ++i)
    if (std::abs(sample_times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
      return i;
  throw TimeNotSampled("time " + std::to_string(t) + " is not a sample time");
}

State em_step(const State& s, const ModelParams& params, double dt, Vec3 dw) {
  const double a = params.coeffs.a(s.t);
  const double b = params.coeffs.b(s.t);
  const Vec3 drift = -a * s.v + cross(s.v, params.H);
  const Vec3 kick = ortho_cross_noise(s.v, dw, b);
  State out;
  out.t = s.t + dt;
  out.x = s.x + dt * s.v;
  out.v = s.v + dt * drift + kick;
  if (norm_sq(out.v) == 0.0)
    throw ZeroVelocity("em_step: velocity reached zero at t = " + std::to_string(out.t) +
                       " (dt too large)");
  return out;
}

State speed_projected_step_to(const State& s, const ModelParams& params, double dt,
                              Vec3 dw, double target_speed_sq) {
  State out = em_step(s, params, dt, dw);
  out.v = std::sqrt(target_speed_sq / norm_sq(out.v)) * out.v;
  return out;
}

State speed_projected_step(const State& s, const ModelParams& params, double dt,
                           Vec3 dw, const SpeedLaw& law) {
  return speed_projected_step_to(s, params, dt, dw, speed_squared(s.t + dt, law));
}

namespace {

std::vector<uint64_t> sample_steps(const std::vector<double>& sample_times, double dt) {
  if (sample_times.empty()) throw ConfigError("sample_times must be non-empty");
  if (sample_times.front() != 0.0) throw ConfigError("sample_times must start at 0");
  std::vector<uint64_t> steps(sample_times.size());
  for (size_t i = 0; i < sample_times.size(); ++i) {
    if (i > 0 && !(sample_times[i] > sample_times[i - 1]))
      throw ConfigError("sample_times must be strictly increasing");
    const double k = sample_times[i] / dt;
    const auto ki = static_cast<uint64_t>(std::llround(k));
    if (std::abs(static_cast<double>(ki) * dt - sample_times[i]) >
        1e-9 * std::max(1.0, sample_times[i]))
      throw ConfigError("sample time " + std::to_string(sample_times[i]) +
                        " does not lie on the dt grid");
    steps[i] = ki;
  }
  return steps;
}

}  // namespace

Ensemble simulate_ensemble(const ModelParams& params, const IntegratorScheme& scheme,
                           uint64_t n_traj, const std::vector<double>& sample_times,
                           uint64_t master_seed, int n_threads) {
  if (n_traj < 1) throw ConfigError("n_traj must be >= 1");
  const double t_max = sample_times.empty() ? 0.0 : sample_times.back();
  params.validate(t_max);
  scheme.validate(params.coeffs, t_max);
  const std::vector<uint64_t> steps = sample_steps(sample_times, scheme.dt);
  const uint64_t n_steps = steps.back();
  const double dt = scheme.dt;

  Ensemble ens;
  ens.params = params;
  ens.scheme = scheme;
  ens.master_seed = master_seed;
  ens.n_traj = n_traj;
  ens.sample_times.resize(steps.size());
  for (size_t i = 0; i < steps.size(); ++i)
    ens.sample_times[i] = static_cast<double>(steps[i]) * dt;
  ens.states.resize(n_traj * steps.size());

  // Per-step coefficient and target-speed tables shared by all trajectories.
  std::vector<double> a_tab(n_steps), b_tab(n_steps), target_sq;
  for (uint64_t k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    a_tab[k] = params.coeffs.a(t);
    b_tab[k] = params.coeffs.b(t);
  }
  if (scheme.kind == SchemeKind::SpeedProjected) {
    const SpeedLaw law{params.coeffs, norm_sq(params.v0)};
    target_sq.resize(n_steps + 1);
    target_sq[0] = law.v0_sq;
    for (uint64_t k = 1; k <= n_steps; ++k)
      target_sq[k] = speed_squared(static_cast<double>(k) * dt, law);
  }

  std::atomic<uint64_t> error_traj{n_traj};
  std::string error_msg;
  std::mutex error_mutex;

  auto run_trajectory = [&](uint64_t traj) {
    const RngLineage lineage{master_seed, traj};
    State s{0.0, params.x0, params.v0};
    size_t next_sample = 0;
    if (steps[0] == 0) {
      ens.states[traj * steps.size()] = s;
      next_sample = 1;
    }
    for (uint64_t k = 0; k < n_steps && next_sample < steps.size(); ++k) {
      const Vec3 dw = wiener_increment(lineage, k, dt);
      const double a = a_tab[k];
      const double b = b_tab[k];
      const Vec3 drift = -a * s.v + cross(s.v, params.H);
      const Vec3 kick = ortho_cross_noise(s.v, dw, b);
      s.x += dt * s.v;
      s.v = s.v + dt * drift + kick;
      s.t = static_cast<double>(k + 1) * dt;
      if (norm_sq(s.v) == 0.0)
        throw ZeroVelocity("velocity reached zero at t = " + std::to_string(s.t));
      if (!target_sq.empty())
        s.v = std::sqrt(target_sq[k + 1] / norm_sq(s.v)) * s.v;
      if (k + 1 == steps[next_sample]) {
        ens.states[traj * steps.size() + next_sample] = s;
        ++next_sample;
      }
    }
  };

  const int workers = std::max(1, n_threads);
  if (workers == 1) {
    for (uint64_t traj = 0; traj < n_traj; ++traj) {
      try {
        run_trajectory(traj);
      } catch (const Error& e) {
        throw ZeroVelocity("trajectory " + std::to_string(traj) + ": " + e.what());
      }
    }
  } else {
    std::atomic<uint64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const uint64_t traj = next.fetch_add(1);
          if (traj >= n_traj) return;
          try {
            run_trajectory(traj);
          } catch (const Error& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            uint64_t prev = error_traj.load();
            if (traj < prev) {
              error_traj.store(traj);
              error_msg = e.what();
            }
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (error_traj.load() != n_traj)
      throw ZeroVelocity("trajectory " + std::to_string(error_traj.load()) + ": " +
                         error_msg);
  }
  return ens;
}

}

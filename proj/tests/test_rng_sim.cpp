#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "ovl/analysis.hpp"
#include "ovl/errors.hpp"
#include "ovl/experiments.hpp"
#include "ovl/rng.hpp"
#include "ovl/sim.hpp"

using namespace ovl;

namespace {

int popcount_diff(const std::array<uint32_t, 4>& a, const std::array<uint32_t, 4>& b) {
  int n = 0;
  for (int i = 0; i < 4; ++i) n += __builtin_popcount(a[i] ^ b[i]);
  return n;
}

ModelParams constant_model(double a, double b, Vec3 v0) {
  ModelParams m;
  m.coeffs = CoefficientProfile::constant(a, b);
  m.v0 = v0;
  return m;
}

}  // namespace

TEST_CASE("counter generator is a pure function of key and counter") {
  const auto b1 = philox4x32({1, 2}, {3, 4, 5, 6});
  const auto b2 = philox4x32({1, 2}, {3, 4, 5, 6});
  CHECK(b1 == b2);
  CHECK(b1 != philox4x32({1, 2}, {3, 4, 5, 7}));
  CHECK(b1 != philox4x32({2, 2}, {3, 4, 5, 6}));
  // Pinned first run of this implementation; a change here means streams (and
  // every seeded result downstream) silently moved.
  CHECK(b1 == std::array<uint32_t, 4>{2287000220u, 3243900748u, 1970613706u,
                                      2103475449u});
  const Vec3 z = normal_triple({42, 7}, 9);
  CHECK(z.x1 == doctest::Approx(1.5313449546339386).epsilon(1e-16));
  CHECK(z.x2 == doctest::Approx(0.60542056082025197).epsilon(1e-16));
  CHECK(z.x3 == doctest::Approx(1.6061870085625545).epsilon(1e-16));
}

TEST_CASE("single counter bit flips roughly half the output bits") {
  double total = 0;
  const int trials = 512;
  for (int i = 0; i < trials; ++i) {
    const std::array<uint32_t, 4> c{static_cast<uint32_t>(i), 77u, 0u, 5u};
    auto flipped = c;
    flipped[1] ^= 1u << (i % 32);
    total += popcount_diff(philox4x32({9, 9}, c), philox4x32({9, 9}, flipped));
  }
  const double mean_flips = total / trials;  // ideal 64 of 128
  CHECK(mean_flips > 56.0);
  CHECK(mean_flips < 72.0);
}

TEST_CASE("normal triples have unit variance, zero mean, no cross-correlation") {
  const size_t n = 200000;
  double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s33 = 0, s12 = 0, s13 = 0, s23 = 0, s3 = 0;
  for (size_t i = 0; i < n; ++i) {
    const Vec3 z = normal_triple({2024, i}, 0);
    s1 += z.x1; s2 += z.x2; s3 += z.x3;
    s11 += z.x1 * z.x1; s22 += z.x2 * z.x2; s33 += z.x3 * z.x3;
    s12 += z.x1 * z.x2; s13 += z.x1 * z.x3; s23 += z.x2 * z.x3;
  }
  const double nn = static_cast<double>(n);
  const double tol_mean = 5.0 / std::sqrt(nn);        // 5 sigma
  const double tol_var = 5.0 * std::sqrt(2.0 / nn);   // var of sample variance ~ 2/n
  CHECK(std::abs(s1 / nn) < tol_mean);
  CHECK(std::abs(s2 / nn) < tol_mean);
  CHECK(std::abs(s3 / nn) < tol_mean);
  CHECK(std::abs(s11 / nn - 1.0) < tol_var);
  CHECK(std::abs(s22 / nn - 1.0) < tol_var);
  CHECK(std::abs(s33 / nn - 1.0) < tol_var);
  CHECK(std::abs(s12 / nn) < tol_mean);
  CHECK(std::abs(s13 / nn) < tol_mean);
  CHECK(std::abs(s23 / nn) < tol_mean);
}

TEST_CASE("wiener increments scale as sqrt(dt) and differ across streams") {
  const Vec3 z = normal_triple({5, 11}, 3);
  const Vec3 w = wiener_increment({5, 11}, 3, 0.25);
  CHECK(w.x1 == doctest::Approx(0.5 * z.x1).epsilon(1e-15));
  CHECK(w.x3 == doctest::Approx(0.5 * z.x3).epsilon(1e-15));
  // neighboring trajectories and steps are distinct draws
  const Vec3 a = normal_triple({5, 11}, 4);
  const Vec3 b = normal_triple({5, 12}, 3);
  CHECK(norm(z - a) > 1e-8);
  CHECK(norm(z - b) > 1e-8);
}

TEST_CASE("explicit step: deterministic pieces") {
  SUBCASE("drift-free transport") {
    ModelParams m = constant_model(1e-12, 0.0, {1, 2, 3});
    const State s{0.0, {0, 0, 0}, {1, 2, 3}};
    const State out = em_step(s, m, 0.5, {0, 0, 0});
    CHECK(out.x.x1 == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(out.x.x2 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.v.x2 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(out.t == doctest::Approx(0.5));
  }
  SUBCASE("pure decay matches (1 - a dt)^n") {
    ModelParams m = constant_model(1.0, 0.0, {2, 0, 0});
    State s{0.0, {0, 0, 0}, {2, 0, 0}};
    const double dt = 1e-3;
    for (int i = 0; i < 1000; ++i) s = em_step(s, m, dt, {0, 0, 0});
    CHECK(s.v.x1 == doctest::Approx(2.0 * std::pow(1.0 - dt, 1000)).epsilon(1e-12));
    CHECK(s.v.x2 == 0.0);
  }
  SUBCASE("angular drift precesses the velocity through a full turn") {
    ModelParams m = constant_model(1e-12, 0.0, {1, 0, 0});
    m.H = {0, 0, 1};
    State s{0.0, {0, 0, 0}, {1, 0, 0}};
    const double dt = 1e-4;
    const int n = static_cast<int>(std::round(2.0 * M_PI / dt));
    for (int i = 0; i < n; ++i) s = em_step(s, m, dt, {0, 0, 0});
    CHECK(norm(s.v - Vec3{1, 0, 0}) < 1e-3);
    // the spiral-out of the explicit rotation stays at O(dt) over one turn
    CHECK(std::abs(norm(s.v) - 1.0) < 5e-4);
  }
}

TEST_CASE("speed-projected step keeps the trajectory on the deterministic law") {
  ModelParams m = constant_model(1.0, 1.0, {2, 0, 0});
  const SpeedLaw law{m.coeffs, 4.0};
  State s{0.0, {0, 0, 0}, {2, 0, 0}};
  const double dt = 1e-3;
  for (int i = 0; i < 2000; ++i) {
    const Vec3 dw = wiener_increment({99, 0}, i, dt);
    s = speed_projected_step(s, m, dt, dw, law);
    if (i % 500 == 499) {
      const double target = speed_squared(s.t, law);
      CHECK(norm_sq(s.v) == doctest::Approx(target).epsilon(1e-13));
    }
  }
}

TEST_CASE("ensemble generation is bitwise identical at any thread count") {
  ModelParams m = constant_model(1.0, 1.0, {1, 1, 0});
  const IntegratorScheme sch{SchemeKind::SpeedProjected, 1e-2};
  const std::vector<double> times{0.0, 0.1, 0.5};
  const Ensemble e1 = simulate_ensemble(m, sch, 64, times, 777, 1);
  const Ensemble e3 = simulate_ensemble(m, sch, 64, times, 777, 3);
  const Ensemble e8 = simulate_ensemble(m, sch, 64, times, 777, 8);
  REQUIRE(e1.states.size() == e3.states.size());
  CHECK(std::memcmp(e1.states.data(), e3.states.data(),
                    e1.states.size() * sizeof(State)) == 0);
  CHECK(std::memcmp(e1.states.data(), e8.states.data(),
                    e1.states.size() * sizeof(State)) == 0);
  const Ensemble other = simulate_ensemble(m, sch, 64, times, 778, 1);
  CHECK(std::memcmp(e1.states.data(), other.states.data(),
                    e1.states.size() * sizeof(State)) != 0);
  CHECK(e1.time_index(0.5) == 2);
  CHECK_THROWS_AS(e1.time_index(0.3), TimeNotSampled);
}

TEST_CASE("scheme validation") {
  const auto coeffs = CoefficientProfile::constant(10.0, 1.0);
  IntegratorScheme em{SchemeKind::EulerMaruyama, 0.06};  // dt * a = 0.6
  CHECK_THROWS_AS(em.validate(coeffs, 1.0), ConfigError);
  em.dt = 0.04;
  CHECK_NOTHROW(em.validate(coeffs, 1.0));
  IntegratorScheme sp{SchemeKind::SpeedProjected, 0.0};
  CHECK_THROWS_AS(sp.validate(coeffs, 1.0), ConfigError);
}

TEST_CASE("long-run ensemble equilibrates isotropically") {
  // a = b = 1: attracting speed 1, direction decorrelates in O(1) time.
  ModelParams m = constant_model(1.0, 1.0, {1.4, 0, 0});
  const IntegratorScheme sch{SchemeKind::SpeedProjected, 2e-3};
  const std::vector<double> times{0.0, 6.0};
  const Ensemble ens = simulate_ensemble(m, sch, 4000, times, 31415, 1);
  double m1 = 0, m2 = 0, m3 = 0, c12 = 0, vmean1 = 0;
  for (size_t k = 0; k < ens.n_traj; ++k) {
    const Vec3 v = ens.at(k, 1).v;
    m1 += v.x1 * v.x1; m2 += v.x2 * v.x2; m3 += v.x3 * v.x3;
    c12 += v.x1 * v.x2;
    vmean1 += v.x1;
  }
  const double n = static_cast<double>(ens.n_traj);
  // per-axis share of |v|^2 = 1 is 1/3; SE of the share is ~ 0.3/sqrt(n)
  const double se = 5.0 * 0.3 / std::sqrt(n);
  CHECK(std::abs(m1 / n - 1.0 / 3.0) < se);
  CHECK(std::abs(m2 / n - 1.0 / 3.0) < se);
  CHECK(std::abs(m3 / n - 1.0 / 3.0) < se);
  CHECK(std::abs(c12 / n) < se);
  // E[v(t)] = exp(-a t) v0 has decayed to ~0.003; the residual is noise
  CHECK(std::abs(vmean1 / n) < 5.0 / std::sqrt(n));
}

TEST_CASE("mean velocity decays as exp(-a t) with angular drift precession") {
  ModelParams m = constant_model(2.0, 0.7, {1, 0, 0});
  m.H = {0, 0, 3.0};
  const IntegratorScheme sch{SchemeKind::SpeedProjected, 1e-3};
  const double t = 0.4;
  const Ensemble ens = simulate_ensemble(m, sch, 20000, {0.0, t}, 2718, 2);
  Vec3 mean{};
  for (size_t k = 0; k < ens.n_traj; ++k) mean += ens.at(k, 1).v;
  mean = mean / static_cast<double>(ens.n_traj);
  // v x H = -H x v: the mean precesses clockwise about +H while decaying
  const double decay = std::exp(-2.0 * t);
  const Vec3 expected{decay * std::cos(3.0 * t), -decay * std::sin(3.0 * t), 0.0};
  // speed is O(1) so the mean's standard error is ~ 1/sqrt(n) per axis
  const double tol = 5.0 / std::sqrt(static_cast<double>(ens.n_traj));
  CHECK(norm(mean - expected) < tol * 2.0);
}

TEST_CASE("explicit-scheme mean squared speed obeys the exact recursion") {
  // The orthogonal kick adds |kick|^2 = (b^2/|v|^2)|v x dw|^2 with
  // E|v x dw|^2 = 2 |v|^2 dt, so E|v'|^2 = |v|^2 (1-a dt)^2 + 2 b^2 dt exactly.
  ModelParams m = constant_model(1.0, 1.0, {2, 0, 0});
  const double dt = 2e-3;
  const long long steps = 250;  // t = 0.5
  const IntegratorScheme sch{SchemeKind::EulerMaruyama, dt};
  const Ensemble ens = simulate_ensemble(m, sch, 60000, {0.0, 0.5}, 1618, 2);
  std::vector<double> sq(ens.n_traj);
  for (size_t k = 0; k < ens.n_traj; ++k) sq[k] = norm_sq(ens.at(k, 1).v);
  const double mc = pairwise_sum(sq) / static_cast<double>(ens.n_traj);
  const double exact = em_mean_speed_sq(1.0, 1.0, 4.0, dt, steps);
  // MC fluctuation of the mean of |v|^2 at this n is ~ 0.004; allow 5 sigma
  double var = 0.0;
  for (double s : sq) var += (s - mc) * (s - mc);
  var /= (sq.size() - 1.0);
  CHECK(std::abs(mc - exact) < 5.0 * std::sqrt(var / sq.size()));
}

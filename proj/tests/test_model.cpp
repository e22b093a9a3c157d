#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ovl/errors.hpp"
#include "ovl/model.hpp"
#include "ovl/quadrature.hpp"

using namespace ovl;

namespace {

// Reference integrator for the coupled speed/kernel system
//   s' = -2 a s + 2 b^2,   f' = b^2 - (2 a + b^2 / s) f,
// written without reference to the library's solution forms.
struct SF {
  double s, f;
};
SF reference_sf(double t_end, const CoefficientProfile& p, double v0_sq, int n_steps) {
  double s = v0_sq, f = 0.0;
  const double h = t_end / n_steps;
  auto ds = [&](double t, double sv) { return -2.0 * p.a(t) * sv + 2.0 * p.b_sq(t); };
  auto df = [&](double t, double sv, double fv) {
    return p.b_sq(t) - (2.0 * p.a(t) + p.b_sq(t) / sv) * fv;
  };
  for (int i = 0; i < n_steps; ++i) {
    const double t = i * h;
    const double k1s = ds(t, s), k1f = df(t, s, f);
    const double k2s = ds(t + h / 2, s + h / 2 * k1s);
    const double k2f = df(t + h / 2, s + h / 2 * k1s, f + h / 2 * k1f);
    const double k3s = ds(t + h / 2, s + h / 2 * k2s);
    const double k3f = df(t + h / 2, s + h / 2 * k2s, f + h / 2 * k2f);
    const double k4s = ds(t + h, s + h * k3s);
    const double k4f = df(t + h, s + h * k3s, f + h * k3f);
    s += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s);
    f += h / 6 * (k1f + 2 * k2f + 2 * k3f + k4f);
  }
  return {s, f};
}

}  // namespace

TEST_CASE("squared speed follows the exponential relaxation law") {
  // c + (v0^2 - c) exp(-2 a t), c = b^2/a
  CHECK(speed_squared(1.0, {CoefficientProfile::constant(1.0, 1.0), 4.0}) ==
        doctest::Approx(1.4060058497098381).epsilon(1e-15));
  CHECK(speed_squared(0.5, {CoefficientProfile::constant(2.0, 1.0), 1.0}) ==
        doctest::Approx(0.56766764161830635).epsilon(1e-15));
  // b = 0: pure exponential decay of the initial speed
  CHECK(speed_squared(5.0, {CoefficientProfile::constant(1.0, 0.0), 4.0}) ==
        doctest::Approx(0.00018159971904993941).epsilon(1e-15));
  CHECK(speed_squared(0.0, {CoefficientProfile::constant(3.0, 2.0), 7.0}) == 7.0);
}

TEST_CASE("speed law is attracted to b^2/a monotonically") {
  const SpeedLaw above{CoefficientProfile::constant(1.0, 1.0), 4.0};
  const SpeedLaw below{CoefficientProfile::constant(1.0, 1.0), 0.25};
  double prev_above = 4.0, prev_below = 0.25;
  for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double sa = speed_squared(t, above);
    const double sb = speed_squared(t, below);
    CHECK(sa < prev_above);
    CHECK(sa > 1.0);
    CHECK(sb > prev_below);
    CHECK(sb < 1.0);
    prev_above = sa;
    prev_below = sb;
  }
}

TEST_CASE("ratio-locked profile keeps the attracting sphere exact") {
  const auto p = CoefficientProfile::ratio_locked(TimeFunction::sine(1.5, 0.5, 3.0), 2.0);
  const SpeedLaw on_sphere{p, 2.0};
  for (double t : {0.1, 0.7, 2.3})
    CHECK(speed_squared(t, on_sphere) == doctest::Approx(2.0).epsilon(1e-14));
  // off the sphere it still relaxes toward v_eq_sq
  const SpeedLaw off{p, 5.0};
  CHECK(speed_squared(4.0, off) == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("general-profile speed matches a reference integration") {
  const auto p = CoefficientProfile::general(TimeFunction::sine(1.0, 0.5, 2.0),
                                             TimeFunction::ramp(0.8, 0.3));
  for (double t : {0.5, 1.0, 2.0}) {
    const double ref = reference_sf(t, p, 3.0, 40000).s;
    CHECK(speed_squared(t, {p, 3.0}) == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("memory kernel closed forms") {
  CHECK(memory_kernel_f(1.0, CoefficientProfile::constant(1.0, 1.0), 1.0) ==
        doctest::Approx(0.31673764387737869).epsilon(1e-15));
  CHECK(memory_kernel_f(1.0, CoefficientProfile::constant(1.0, 1.0), 4.0) ==
        doctest::Approx(0.35670118325512899).epsilon(1e-15));
  CHECK(memory_kernel_f(2.0, CoefficientProfile::constant(0.5, 2.0), 9.0) ==
        doctest::Approx(2.5546801819623545).epsilon(1e-15));
  CHECK(memory_kernel_f(0.0, CoefficientProfile::constant(1.0, 1.0), 4.0) == 0.0);
  CHECK(memory_kernel_f(3.0, CoefficientProfile::constant(2.0, 0.0), 4.0) == 0.0);
}

TEST_CASE("memory kernel agrees with the defining ODE for all profile kinds") {
  const double v0_sq = 2.5;
  SUBCASE("constant") {
    const auto p = CoefficientProfile::constant(1.3, 0.9);
    for (double t : {0.3, 1.0, 4.0})
      CHECK(memory_kernel_f(t, p, v0_sq) ==
            doctest::Approx(reference_sf(t, p, v0_sq, 20000).f).epsilon(1e-9));
  }
  SUBCASE("ratio locked") {
    const auto p = CoefficientProfile::ratio_locked(TimeFunction::ramp(1.0, 0.4), 1.7);
    for (double t : {0.3, 1.0, 4.0})
      CHECK(memory_kernel_f(t, p, v0_sq) ==
            doctest::Approx(reference_sf(t, p, v0_sq, 20000).f).epsilon(1e-8));
  }
  SUBCASE("general") {
    const auto p = CoefficientProfile::general(TimeFunction::sine(1.0, 0.5, 2.0),
                                               TimeFunction::ramp(0.8, 0.3));
    for (double t : {0.3, 1.0, 4.0})
      CHECK(memory_kernel_f(t, p, v0_sq) ==
            doctest::Approx(reference_sf(t, p, v0_sq, 20000).f).epsilon(1e-6));
  }
}

TEST_CASE("closed kernel is stable where the naive form overflows") {
  // A = a t = 2000: any e^{+A} intermediate would overflow; the value itself
  // is just c/3.
  const double f = memory_kernel_closed(2000.0, 1.0, 4.0);
  CHECK(std::isfinite(f));
  CHECK(f == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(memory_kernel_f(2.0, CoefficientProfile::constant(1000.0, 1000.0), 4.0) ==
        doctest::Approx(1000.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("equilibrium speed") {
  CHECK(equilibrium_speed_sq(CoefficientProfile::constant(2.0, 1.0)) == 0.5);
  CHECK(equilibrium_speed_sq(CoefficientProfile::ratio_locked(
            TimeFunction::constant(3.0), 1.25)) == 1.25);
  CHECK_THROWS_AS(equilibrium_speed_sq(CoefficientProfile::general(
                      TimeFunction::constant(1.0), TimeFunction::ramp(1.0, 0.1))),
                  NotApplicable);
}

TEST_CASE("noise kick and projection are orthogonal to the velocity") {
  CHECK(ortho_cross_noise({2, 0, 0}, {0, 3, 0}, 1.0).x3 == doctest::Approx(3.0));
  const Vec3 pr = ortho_project({1, 1, 0}, {1, 0, 0});
  CHECK(pr.x1 == doctest::Approx(-0.5));
  CHECK(pr.x2 == doctest::Approx(0.5));
  CHECK(pr.x3 == doctest::Approx(0.0));

  std::mt19937_64 gen(12345);
  std::normal_distribution<double> nd;
  double worst_kick = 0.0, worst_proj = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const Vec3 v{nd(gen), nd(gen), nd(gen)};
    const Vec3 dw{nd(gen), nd(gen), nd(gen)};
    if (norm(v) < 1e-6) continue;
    const Vec3 kick = ortho_cross_noise(v, dw, 1.7);
    const double nk = norm(kick);
    if (nk > 0) worst_kick = std::max(worst_kick, std::abs(dot(v, kick)) / (norm(v) * nk));
    const Vec3 pj = ortho_project(v, dw);
    const double np = norm(pj);
    if (np > 0) worst_proj = std::max(worst_proj, std::abs(dot(v, pj)) / (norm(v) * np));
  }
  CHECK(worst_kick <= 1e-12);
  CHECK(worst_proj <= 1e-12);
}

TEST_CASE("noise kick magnitude is b |dw| sin(angle)") {
  const Vec3 v{1, 2, -1};
  const Vec3 dw{0.3, -0.4, 0.7};
  const Vec3 kick = ortho_cross_noise(v, dw, 2.0);
  const double expected = 2.0 * norm(cross(v, dw)) / norm(v);
  CHECK(norm(kick) == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(ortho_cross_noise({0, 0, 0}, dw, 1.0), ZeroVelocity);
}

TEST_CASE("model validation") {
  ModelParams m;
  m.coeffs = CoefficientProfile::constant(1.0, 1.0);
  m.v0 = {1, 0, 0};
  CHECK_NOTHROW(m.validate(10.0));
  m.v0 = {0, 0, 0};
  CHECK_THROWS_AS(m.validate(10.0), ConfigError);
  m.v0 = {1, 0, 0};
  m.coeffs = CoefficientProfile::general(TimeFunction::ramp(1.0, -1.0),
                                         TimeFunction::constant(1.0));
  CHECK_THROWS_AS(m.validate(2.0), ConfigError);  // a(t) crosses zero before t_max
}

TEST_CASE("adaptive quadrature") {
  const double s = integrate([](double x) { return x * x; }, 0.0, 1.0);
  CHECK(s == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  const double osc =
      integrate([](double x) { return std::cos(10.0 * x); }, 0.0, 2.0);
  CHECK(osc == doctest::Approx(std::sin(20.0) / 10.0).epsilon(1e-12));

  CumulativeIntegral ci([](double x) { return std::cos(x); }, 6.0);
  for (double t : {0.0, 0.5, 3.0, 5.9})
    CHECK(ci(t) == doctest::Approx(std::sin(t)).epsilon(1e-11));
}

#include "ovl/model.hpp"

#include <cmath>
#include <string>

#include "ovl/errors.hpp"
#include "ovl/quadrature.hpp"

namespace ovl {

void ModelParams::validate(double t_max) const {
  if (!is_finite(H) || !is_finite(v0) || !is_finite(x0))
    throw ConfigError("model parameters must be finite");
  if (norm_sq(v0) == 0.0) throw ConfigError("|v0| must be positive");
  coeffs.validate(t_max);
}

Vec3 ortho_cross_noise(Vec3 v, Vec3 dw, double b) {
  const double vs = norm_sq(v);
  if (vs == 0.0) throw ZeroVelocity("ortho_cross_noise: |v| = 0");
  return (b / std::sqrt(vs)) * cross(v, dw);
}

Vec3 ortho_project(Vec3 v, Vec3 dxi) {
  const double vs = norm_sq(v);
  if (vs == 0.0) throw ZeroVelocity("ortho_project: |v| = 0");
  return (dot(v, dxi) / vs) * v - dxi;
}

namespace {

// Relaxation with constant target c = b^2/a and rate 2a.
double speed_constant(double t, double a, double b, double v0_sq) {
  const double c = (b * b) / a;
  return c + (v0_sq - c) * std::exp(-2.0 * a * t);
}

double speed_general(double t, const CoefficientProfile& p, double v0_sq) {
  // |v(t)|^2 = e^{-2A(t)} v0^2 + int_0^t 2 b^2(tau) e^{-2(A(t)-A(tau))} dtau,
  // A(t) = int_0^t a. Shifted exponent keeps everything in range for large A.
  CumulativeIntegral A([&p](double s) { return p.a(s); }, t,
                       {1e-14, 1e-12, 48});
  const double At = A(t);
  auto integrand = [&](double tau) {
    return 2.0 * p.b_sq(tau) * std::exp(-2.0 * (At - A(tau)));
  };
  return std::exp(-2.0 * At) * v0_sq + integrate(integrand, 0.0, t);
}

double kernel_general(double t, const CoefficientProfile& p, double v0_sq) {
  CumulativeIntegral A([&p](double s) { return p.a(s); }, t,
                       {1e-14, 1e-12, 48});
  auto speed_at = [&](double theta) {
    const double Ath = A(theta);
    auto inner = [&](double tau) {
      return 2.0 * p.b_sq(tau) * std::exp(-2.0 * (Ath - A(tau)));
    };
    return std::exp(-2.0 * Ath) * v0_sq + integrate(inner, 0.0, theta);
  };
  CumulativeIntegral E(
      [&](double theta) { return 2.0 * p.a(theta) + p.b_sq(theta) / speed_at(theta); },
      t, {1e-12, 1e-10, 48});
  const double Et = E(t);
  auto integrand = [&](double tau) {
    return p.b_sq(tau) * std::exp(E(tau) - Et);
  };
  return integrate(integrand, 0.0, t, {1e-12, 1e-9, 48});
}

}  // namespace

// Closed form shared by Constant and RatioLocked profiles. With
// k = v0^2/c - 1 (c the equilibrium speed) and A the integrated drift rate:
//   f = (c/3) [ (1 + k e^{-2A})^{3/2} - (1+k)^{3/2} e^{-3A} ] / sqrt(1 + k e^{-2A})
// Derived by substituting u = e^{2A} into the kernel integral; reduces to
// (c/3)(1 - e^{-3A}) at k = 0. Uses only decaying exponentials, so it stays
// finite for arbitrarily large A.
double memory_kernel_closed(double A, double c_eq_sq, double v0_sq) {
  const double k = v0_sq / c_eq_sq - 1.0;
  const double e2 = std::exp(-2.0 * A);
  const double e3 = std::exp(-3.0 * A);
  const double base = 1.0 + k * e2;  // = |v(t)|^2 / c > 0
  return (c_eq_sq / 3.0) *
         (std::pow(base, 1.5) - std::pow(1.0 + k, 1.5) * e3) / std::sqrt(base);
}

double speed_squared(double t, const SpeedLaw& law) {
  if (t < 0.0) throw ConfigError("speed_squared: t must be >= 0");
  if (law.v0_sq <= 0.0) throw ConfigError("speed_squared: v0_sq must be positive");
  switch (law.profile.kind()) {
    case CoefficientProfile::Kind::Constant:
      return speed_constant(t, law.profile.const_a(), law.profile.const_b(), law.v0_sq);
    case CoefficientProfile::Kind::RatioLocked: {
      const double A = integrate([&](double s) { return law.profile.a(s); }, 0.0, t);
      const double e2 = std::exp(-2.0 * A);
      return law.profile.v_eq_sq() + (law.v0_sq - law.profile.v_eq_sq()) * e2;
    }
    case CoefficientProfile::Kind::General:
      return speed_general(t, law.profile, law.v0_sq);
  }
  throw ConfigError("speed_squared: unknown profile kind");
}

double memory_kernel_f(double t, const CoefficientProfile& profile, double v0_sq) {
  if (t < 0.0) throw ConfigError("memory_kernel_f: t must be >= 0");
  if (v0_sq <= 0.0) throw ConfigError("memory_kernel_f: v0_sq must be positive");
  if (t == 0.0) return 0.0;
  switch (profile.kind()) {
    case CoefficientProfile::Kind::Constant: {
      const double a = profile.const_a();
      const double b = profile.const_b();
      if (b == 0.0) return 0.0;
      return memory_kernel_closed(a * t, (b * b) / a, v0_sq);
    }
    case CoefficientProfile::Kind::RatioLocked: {
      const double A = integrate([&](double s) { return profile.a(s); }, 0.0, t);
      return memory_kernel_closed(A, profile.v_eq_sq(), v0_sq);
    }
    case CoefficientProfile::Kind::General:
      return kernel_general(t, profile, v0_sq);
  }
  throw ConfigError("memory_kernel_f: unknown profile kind");
}

double equilibrium_speed_sq(const CoefficientProfile& profile) {
  switch (profile.kind()) {
    case CoefficientProfile::Kind::Constant: {
      const double b = profile.const_b();
      return (b * b) / profile.const_a();
    }
    case CoefficientProfile::Kind::RatioLocked:
      return profile.v_eq_sq();
    case CoefficientProfile::Kind::General:
      throw NotApplicable("equilibrium_speed_sq: General profiles have no fixed equilibrium");
  }
  throw NotApplicable("equilibrium_speed_sq: unknown profile kind");
}

}

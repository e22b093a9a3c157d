#pragma once

#include "ovl/coefficients.hpp"
#include "ovl/vec3.hpp"

namespace ovl {

struct ModelParams {
  CoefficientProfile coeffs;
  Vec3 H;   // angular drift field; enters as v x H
  Vec3 v0;  // |v0| > 0 required
  Vec3 x0;

  // Throws ConfigError on non-finite fields, |v0| = 0, or coefficient
  // positivity failure over [0, t_max].
  void validate(double t_max) const;
};

// Noise kick (b/|v|) * (v x dw). Exactly orthogonal to v by construction.
Vec3 ortho_cross_noise(Vec3 v, Vec3 dw, double b);

// Projection-minus-identity form v (v,dxi)/|v|^2 - dxi; the result is the
// negative of dxi's component orthogonal to v, so (v, result) = 0.
Vec3 ortho_project(Vec3 v, Vec3 dxi);

struct SpeedLaw {
  CoefficientProfile profile;
  double v0_sq = 0.0;  // > 0
};

// Deterministic squared speed at time t. Constant profiles use the closed
// exponential relaxation form; RatioLocked uses it with int a(t) by adaptive
// quadrature; General integrates the variation-of-constants formula.
double speed_squared(double t, const SpeedLaw& law);

// Memory kernel f(t) = int_0^t b^2(tau) exp(-int_tau^t [2a + b^2/|v|^2]) dtau,
// with |v|^2 the deterministic speed law started at v0_sq. Closed form for
// Constant and RatioLocked profiles, tabulated quadrature for General.
double memory_kernel_f(double t, const CoefficientProfile& profile, double v0_sq);

// Closed kernel value given A = int_0^t a and equilibrium speed c_eq_sq.
// Valid whenever b^2/a is constant in time (Constant and RatioLocked).
double memory_kernel_closed(double A, double c_eq_sq, double v0_sq);

// b^2/a for Constant, v_eq_sq for RatioLocked; NotApplicable for General.
double equilibrium_speed_sq(const CoefficientProfile& profile);

}

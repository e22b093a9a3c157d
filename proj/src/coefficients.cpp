#include "ovl/coefficients.hpp"

#include <algorithm>

#include "ovl/errors.hpp"

namespace ovl {

double TimeFunction::min_on(double t_max) const {
  switch (kind) {
    case Kind::Constant: return c0;
    case Kind::Ramp: return std::min(c0, c0 + c1 * t_max);
    case Kind::Sine: return c0 - std::abs(c1);
  }
  return c0;
}

CoefficientProfile CoefficientProfile::constant(double a, double b) {
  CoefficientProfile p;
  p.kind_ = Kind::Constant;
  p.a_fn_ = TimeFunction::constant(a);
  p.b_fn_ = TimeFunction::constant(b);
  return p;
}

CoefficientProfile CoefficientProfile::ratio_locked(TimeFunction a_fn, double v_eq_sq) {
  CoefficientProfile p;
  p.kind_ = Kind::RatioLocked;
  p.a_fn_ = a_fn;
  p.v_eq_sq_ = v_eq_sq;
  return p;
}

CoefficientProfile CoefficientProfile::general(TimeFunction a_fn, TimeFunction b_fn) {
  CoefficientProfile p;
  p.kind_ = Kind::General;
  p.a_fn_ = a_fn;
  p.b_fn_ = b_fn;
  return p;
}

double CoefficientProfile::a(double t) const { return a_fn_(t); }

double CoefficientProfile::b_sq(double t) const {
  if (kind_ == Kind::RatioLocked) return v_eq_sq_ * a_fn_(t);
  const double b = b_fn_(t);
  return b * b;
}

double CoefficientProfile::b(double t) const {
  if (kind_ == Kind::RatioLocked) return std::sqrt(v_eq_sq_ * a_fn_(t));
  return b_fn_(t);
}

double CoefficientProfile::const_a() const {
  if (kind_ != Kind::Constant) throw NotApplicable("const_a: profile is not Constant");
  return a_fn_.c0;
}

double CoefficientProfile::const_b() const {
  if (kind_ != Kind::Constant) throw NotApplicable("const_b: profile is not Constant");
  return b_fn_.c0;
}

double CoefficientProfile::v_eq_sq() const {
  if (kind_ != Kind::RatioLocked) throw NotApplicable("v_eq_sq: profile is not RatioLocked");
  return v_eq_sq_;
}

void CoefficientProfile::validate(double t_max) const {
  if (a_fn_.min_on(t_max) <= 0.0)
    throw ConfigError("coefficient a(t) must stay positive on [0, " +
                      std::to_string(t_max) + "]");
  if (kind_ == Kind::RatioLocked) {
    if (v_eq_sq_ <= 0.0) throw ConfigError("v_eq_sq must be positive");
    return;
  }
  if (b_fn_.min_on(t_max) < 0.0)
    throw ConfigError("coefficient b(t) must stay non-negative on [0, " +
                      std::to_string(t_max) + "]");
}

}

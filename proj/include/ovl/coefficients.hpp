#pragma once

#include <cmath>

namespace ovl {

// Scalar function of time used for the drift/noise coefficients. Kept as a
// small closed vocabulary so profiles stay copyable, comparable and
// serializable in experiment configs.
struct TimeFunction {
  enum class Kind { Constant, Ramp, Sine };

  Kind kind = Kind::Constant;
  double c0 = 0.0;     // constant term
  double c1 = 0.0;     // ramp slope or sine amplitude
  double omega = 0.0;  // sine angular frequency
  double phase = 0.0;

  static TimeFunction constant(double v) { return {Kind::Constant, v, 0.0, 0.0, 0.0}; }
  static TimeFunction ramp(double c0, double c1) { return {Kind::Ramp, c0, c1, 0.0, 0.0}; }
  static TimeFunction sine(double c0, double amp, double omega, double phase = 0.0) {
    return {Kind::Sine, c0, amp, omega, phase};
  }

  double operator()(double t) const {
    switch (kind) {
      case Kind::Constant: return c0;
      case Kind::Ramp: return c0 + c1 * t;
      case Kind::Sine: return c0 + c1 * std::sin(omega * t + phase);
    }
    return c0;
  }

  // Lower bound of the value over [0, t_max] (exact for constant/ramp,
  // conservative c0 - |amp| for sine).
  double min_on(double t_max) const;
};

class CoefficientProfile {
 public:
  enum class Kind { Constant, RatioLocked, General };

  static CoefficientProfile constant(double a, double b);
  // b^2(t) = v_eq_sq * a(t) by construction, so b^2/a stays v_eq_sq exactly
  // and the attracting sphere |v|^2 = v_eq_sq is time-independent.
  static CoefficientProfile ratio_locked(TimeFunction a_fn, double v_eq_sq);
  static CoefficientProfile general(TimeFunction a_fn, TimeFunction b_fn);

  Kind kind() const { return kind_; }

  double a(double t) const;
  double b(double t) const;
  double b_sq(double t) const;

  // Kind-restricted accessors.
  double const_a() const;
  double const_b() const;
  double v_eq_sq() const;
  const TimeFunction& a_fn() const { return a_fn_; }
  const TimeFunction& b_fn() const { return b_fn_; }

  // a(t) > 0 and b(t) >= 0 over [0, t_max]; throws ConfigError otherwise.
  void validate(double t_max) const;

 private:
  Kind kind_ = Kind::Constant;
  TimeFunction a_fn_;
  TimeFunction b_fn_;   // unused for RatioLocked
  double v_eq_sq_ = 0.0;
};

}

#include "ovl/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "ovl/errors.hpp"

namespace ovl {
namespace {

// 15-point Kronrod rule with embedded 7-point Gauss rule, positive half.
// Abscissae with even index are the Kronrod extensions; odd indices are the
// Gauss-7 nodes.
constexpr double kXgk[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
constexpr double kWgk[8] = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278};
constexpr double kWg[4] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694};

struct PanelResult {
  double kronrod;
  double err;
};

PanelResult gk15(const std::function<double(double)>& f, double lo, double hi) {
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  const double fc = f(c);
  double gauss = kWg[3] * fc;
  double kron = kWgk[7] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    const double fsum = f(c - dx) + f(c + dx);
    kron += kWgk[i] * fsum;
    if (i % 2 == 1) gauss += kWg[i / 2] * fsum;
  }
  kron *= h;
  gauss *= h;
  return {kron, std::abs(kron - gauss)};
}

void adapt(const std::function<double(double)>& f, double lo, double hi,
           double abs_tol, double rel_tol, int depth, int max_depth,
           double& total) {
  const PanelResult r = gk15(f, lo, hi);
  const double tol = std::max(abs_tol, rel_tol * std::abs(r.kronrod));
  if (r.err <= tol || (hi - lo) <= 1e-15 * std::max(1.0, std::abs(lo))) {
    total += r.kronrod;
    return;
  }
  if (depth >= max_depth) {
    throw QuadratureFailure("adaptive integration did not converge on [" +
                            std::to_string(lo) + ", " + std::to_string(hi) +
                            "], error estimate " + std::to_string(r.err));
  }
  const double mid = 0.5 * (lo + hi);
  adapt(f, lo, mid, 0.5 * abs_tol, rel_tol, depth + 1, max_depth, total);
  adapt(f, mid, hi, 0.5 * abs_tol, rel_tol, depth + 1, max_depth, total);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double lo, double hi,
                 const QuadratureOptions& opt) {
  if (lo == hi) return 0.0;
  double sign = 1.0;
  double a = lo, b = hi;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  double total = 0.0;
  adapt(f, a, b, opt.abs_tol, opt.rel_tol, 0, opt.max_depth, total);
  return sign * total;
}

CumulativeIntegral::CumulativeIntegral(std::function<double(double)> f,
                                       double t_max,
                                       const QuadratureOptions& opt)
    : f_(std::move(f)), t_max_(t_max), opt_(opt) {
  if (t_max_ < 0.0) throw QuadratureFailure("CumulativeIntegral: negative range");
  const int n_panels = 64;
  knots_.resize(n_panels + 1);
  cumulative_.resize(n_panels + 1);
  cumulative_[0] = 0.0;
  for (int i = 0; i <= n_panels; ++i)
    knots_[i] = t_max_ * static_cast<double>(i) / n_panels;
  for (int i = 0; i < n_panels; ++i)
    cumulative_[i + 1] =
        cumulative_[i] + integrate(f_, knots_[i], knots_[i + 1], opt_);
}

double CumulativeIntegral::operator()(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= t_max_) {
    double tail = (t > t_max_) ? integrate(f_, t_max_, t, opt_) : 0.0;
    return cumulative_.back() + tail;
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  const size_t idx = static_cast<size_t>(it - knots_.begin()) - 1;
  return cumulative_[idx] + integrate(f_, knots_[idx], t, opt_);
}

}

#pragma once

#include <functional>
#include <vector>

namespace ovl {

struct QuadratureOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_depth = 48;
};

// Adaptive Gauss-Kronrod (G7/K15) integration of f over [lo, hi].
// Throws QuadratureFailure if the local error estimate does not meet the
// tolerance before max_depth bisections.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 const QuadratureOptions& opt = {});

// Antiderivative F(t) = int_0^t f, for repeated evaluation on [0, t_max].
// Panel boundaries are precomputed; a query integrates adaptively from the
// nearest boundary below t, so accuracy matches `integrate` at every point.
class CumulativeIntegral {
 public:
  CumulativeIntegral(std::function<double(double)> f, double t_max,
                     const QuadratureOptions& opt = {});

  double operator()(double t) const;
  double t_max() const { return t_max_; }

 private:
  std::function<double(double)> f_;
  double t_max_;
  QuadratureOptions opt_;
  std::vector<double> knots_;
  std::vector<double> cumulative_;
};

}

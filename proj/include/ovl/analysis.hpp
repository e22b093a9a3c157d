#pragma once

#include <complex>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ovl/sim.hpp"
#include "ovl/vec3.hpp"

namespace ovl {

// Deterministic blocked summation; result is independent of how the caller
// parallelized the work that produced `data`.
double pairwise_sum(const double* data, size_t n);
inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

struct EmpiricalCF {
  Vec3 lambda;
  double t = 0.0;
  std::complex<double> estimate;
  double std_error = 0.0;  // sqrt(sum |z_k - mean|^2 / (n (n-1)))
  size_t n = 0;
};

// Monte Carlo estimate of E[exp(i (lambda, x(t)))] over the ensemble.
EmpiricalCF empirical_char_fn(const Ensemble& ens, Vec3 lambda, double t);

struct ComparisonReport {
  std::string experiment_id;
  std::string metric;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::map<std::string, double> metadata;
};

// Moment checks at one sampled time: per-axis velocity second moments against
// the deterministic speed law (equipartition |v|^2/3 per axis), the position
// mean against the damped-precession prediction, and for t > 0 the position
// variance ratio along/perpendicular to v0 against the kernel value 2.
// Velocity/mean entries report z-scores with threshold 3; the ratio entry
// reports the measured ratio with a 3-sigma band and carries the per-axis
// diffusivities in metadata.
std::vector<ComparisonReport> moment_report(const Ensemble& ens, double t);

struct BinningSpec {
  int bins_per_axis = 0;  // >= 8
  Vec3 lo;
  Vec3 hi;
};

// Histogram-vs-prediction comparison at one sampled time. The predicted bin
// mass integrates `predicted` with a 2x2x2 Gauss rule per cell; everything
// outside the box is one overflow cell. Value is the L1 distance between the
// two probability vectors. A chi-square statistic over Cochran-pooled cells
// (expected count < 10 merges into overflow) lands in metadata; fewer than 8
// pooled cells throws SparseHistogram.
ComparisonReport density_l1_compare(const Ensemble& ens, double t,
                                    const std::function<double(Vec3)>& predicted,
                                    const BinningSpec& bins, double threshold);

}

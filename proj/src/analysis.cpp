#include "ovl/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "ovl/errors.hpp"
#include "ovl/quadrature.hpp"

namespace ovl {

double pairwise_sum(const double* data, size_t n) {
  if (n <= 128) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

EmpiricalCF empirical_char_fn(const Ensemble& ens, Vec3 lambda, double t) {
  if (!is_finite(lambda)) throw ConfigError("empirical_char_fn: non-finite wavevector");
  const size_t ti = ens.time_index(t);
  const size_t n = ens.n_traj;
  if (n < 2) throw ConfigError("empirical_char_fn: need at least 2 trajectories");
  std::vector<double> re(n), im(n);
  for (size_t k = 0; k < n; ++k) {
    const double phase = dot(lambda, ens.at(k, ti).x);
    re[k] = std::cos(phase);
    im[k] = std::sin(phase);
  }
  const double mre = pairwise_sum(re) / static_cast<double>(n);
  const double mim = pairwise_sum(im) / static_cast<double>(n);
  std::vector<double> dev(n);
  for (size_t k = 0; k < n; ++k) {
    const double dr = re[k] - mre, di = im[k] - mim;
    dev[k] = dr * dr + di * di;
  }
  const double ss = pairwise_sum(dev);
  EmpiricalCF out;
  out.lambda = lambda;
  out.t = ens.sample_times[ti];
  out.estimate = {mre, mim};
  out.std_error = std::sqrt(ss / (static_cast<double>(n) * (n - 1.0)));
  out.n = n;
  return out;
}

namespace {

Vec3 rotate_about(Vec3 v, Vec3 axis_rate, double t) {
  const double w = norm(axis_rate);
  if (w == 0.0) return v;
  const Vec3 k = axis_rate / w;
  const double th = w * t;
  const double c = std::cos(th), s = std::sin(th);
  return c * v + s * cross(k, v) + (1.0 - c) * dot(k, v) * k;
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  double m4 = 0.0;   // central fourth moment (biased, /n)
};

MeanVar mean_var_m4(const std::vector<double>& x) {
  const size_t n = x.size();
  MeanVar r;
  r.mean = pairwise_sum(x) / static_cast<double>(n);
  std::vector<double> d2(n), d4(n);
  for (size_t k = 0; k < n; ++k) {
    const double d = x[k] - r.mean;
    d2[k] = d * d;
    d4[k] = d2[k] * d2[k];
  }
  r.var = pairwise_sum(d2) / (static_cast<double>(n) - 1.0);
  r.m4 = pairwise_sum(d4) / static_cast<double>(n);
  return r;
}

}  // namespace

std::vector<ComparisonReport> moment_report(const Ensemble& ens, double t) {
  const size_t ti = ens.time_index(t);
  const double ts = ens.sample_times[ti];
  const size_t n = ens.n_traj;
  if (n < 16) throw ConfigError("moment_report: need at least 16 trajectories");
  const double nd = static_cast<double>(n);

  std::vector<ComparisonReport> out;
  const SpeedLaw law{ens.params.coeffs, norm_sq(ens.params.v0)};
  const double pred_axis = speed_squared(ts, law) / 3.0;

  // Per-axis velocity second moments against the speed law.
  std::vector<double> comp(n);
  const char* axis_name[3] = {"x1", "x2", "x3"};
  for (int ax = 0; ax < 3; ++ax) {
    for (size_t k = 0; k < n; ++k) {
      const Vec3& v = ens.at(k, ti).v;
      const double c = ax == 0 ? v.x1 : (ax == 1 ? v.x2 : v.x3);
      comp[k] = c * c;
    }
    const MeanVar mv = mean_var_m4(comp);
    const double se = std::sqrt(mv.var / nd);
    const double z = se > 0.0 ? std::abs(mv.mean - pred_axis) / se : 0.0;
    ComparisonReport r;
    r.experiment_id = "moments";
    r.metric = std::string("velocity_second_moment_") + axis_name[ax];
    r.value = z;
    r.threshold = 3.0;
    r.pass = z <= r.threshold;
    r.metadata = {{"measured", mv.mean}, {"predicted", pred_axis}, {"se", se}};
    out.push_back(std::move(r));
  }

  // Position mean against x0 + int_0^t e^{-A(tau)} R_H(-tau) v0 dtau; the
  // drift v x H = -H x v precesses the mean clockwise about H.
  CumulativeIntegral A([&](double s) { return ens.params.coeffs.a(s); },
                       ts > 0.0 ? ts : 1.0);
  auto mean_v = [&](double tau) {
    return std::exp(-A(tau)) * rotate_about(ens.params.v0, ens.params.H, -tau);
  };
  Vec3 pred_x = ens.params.x0;
  if (ts > 0.0) {
    pred_x += Vec3{integrate([&](double s) { return mean_v(s).x1; }, 0.0, ts),
                   integrate([&](double s) { return mean_v(s).x2; }, 0.0, ts),
                   integrate([&](double s) { return mean_v(s).x3; }, 0.0, ts)};
  }
  Vec3 mean_x;
  {
    std::vector<double> cx(n), cy(n), cz(n);
    for (size_t k = 0; k < n; ++k) {
      const Vec3& x = ens.at(k, ti).x;
      cx[k] = x.x1;
      cy[k] = x.x2;
      cz[k] = x.x3;
    }
    mean_x = {pairwise_sum(cx) / nd, pairwise_sum(cy) / nd, pairwise_sum(cz) / nd};
  }
  double tr_cov = 0.0;
  {
    std::vector<double> d2(n);
    for (size_t k = 0; k < n; ++k) d2[k] = norm_sq(ens.at(k, ti).x - mean_x);
    tr_cov = pairwise_sum(d2) / (nd - 1.0);
  }
  {
    const double se = std::sqrt(tr_cov / nd);
    const double z = se > 0.0 ? norm(mean_x - pred_x) / se : 0.0;
    ComparisonReport r;
    r.experiment_id = "moments";
    r.metric = "position_mean";
    r.value = z;
    r.threshold = 3.0;
    r.pass = z <= r.threshold;
    r.metadata = {{"deviation_norm", norm(mean_x - pred_x)},
                  {"se", se},
                  {"predicted_x1", pred_x.x1},
                  {"predicted_x2", pred_x.x2},
                  {"predicted_x3", pred_x.x3}};
    out.push_back(std::move(r));
  }

  // Position variance along v0 vs transverse, against the kernel's ratio 2.
  if (ts > 0.0) {
    const Vec3 u = ens.params.v0 / norm(ens.params.v0);
    const Vec3 pick = std::abs(u.x1) <= std::abs(u.x2) &&
                              std::abs(u.x1) <= std::abs(u.x3)
                          ? Vec3{1, 0, 0}
                          : (std::abs(u.x2) <= std::abs(u.x3) ? Vec3{0, 1, 0}
                                                              : Vec3{0, 0, 1});
    Vec3 e2 = cross(u, pick);
    e2 = e2 / norm(e2);
    const Vec3 e3 = cross(u, e2);
    std::vector<double> cpar(n), cp2(n), cp3(n);
    for (size_t k = 0; k < n; ++k) {
      const Vec3 d = ens.at(k, ti).x - mean_x;
      cpar[k] = dot(d, u);
      cp2[k] = dot(d, e2);
      cp3[k] = dot(d, e3);
    }
    const MeanVar par = mean_var_m4(cpar);
    const MeanVar p2 = mean_var_m4(cp2);
    const MeanVar p3 = mean_var_m4(cp3);
    const double var_perp = 0.5 * (p2.var + p3.var);
    const double ratio = par.var / var_perp;
    // Delta method: Var(s^2) = (m4 - s^4)/n per direction, the two transverse
    // directions averaged, numerator and denominator treated as independent.
    const double var_spar = (par.m4 - par.var * par.var) / nd;
    const double var_sperp =
        0.25 * ((p2.m4 - p2.var * p2.var) / nd + (p3.m4 - p3.var * p3.var) / nd);
    const double se_ratio =
        ratio * std::sqrt(var_spar / (par.var * par.var) +
                          var_sperp / (var_perp * var_perp));
    ComparisonReport r;
    r.experiment_id = "moments";
    r.metric = "position_variance_ratio";
    r.value = ratio;
    r.threshold = 2.0;
    r.pass = std::abs(ratio - 2.0) <= 3.0 * se_ratio;
    r.metadata = {{"se", se_ratio},
                  {"z", se_ratio > 0.0 ? std::abs(ratio - 2.0) / se_ratio : 0.0},
                  {"var_parallel", par.var},
                  {"var_perpendicular", var_perp},
                  {"diffusivity_parallel", par.var / (2.0 * ts)},
                  {"diffusivity_perpendicular", var_perp / (2.0 * ts)}};
    out.push_back(std::move(r));
  }
  return out;
}

ComparisonReport density_l1_compare(const Ensemble& ens, double t,
                                    const std::function<double(Vec3)>& predicted,
                                    const BinningSpec& bins, double threshold) {
  if (bins.bins_per_axis < 8)
    throw ConfigError("density_l1_compare: need at least 8 bins per axis");
  if (!(bins.hi.x1 > bins.lo.x1) || !(bins.hi.x2 > bins.lo.x2) ||
      !(bins.hi.x3 > bins.lo.x3))
    throw ConfigError("density_l1_compare: box must have positive extent");
  const size_t ti = ens.time_index(t);
  const size_t n = ens.n_traj;
  if (n == 0) throw ConfigError("density_l1_compare: empty ensemble");

  const int nb = bins.bins_per_axis;
  const size_t n_cells = static_cast<size_t>(nb) * nb * nb;
  const Vec3 w{(bins.hi.x1 - bins.lo.x1) / nb, (bins.hi.x2 - bins.lo.x2) / nb,
               (bins.hi.x3 - bins.lo.x3) / nb};

  std::vector<double> counts(n_cells, 0.0);
  double overflow_count = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const Vec3& x = ens.at(k, ti).x;
    const int i1 = static_cast<int>(std::floor((x.x1 - bins.lo.x1) / w.x1));
    const int i2 = static_cast<int>(std::floor((x.x2 - bins.lo.x2) / w.x2));
    const int i3 = static_cast<int>(std::floor((x.x3 - bins.lo.x3) / w.x3));
    if (i1 < 0 || i1 >= nb || i2 < 0 || i2 >= nb || i3 < 0 || i3 >= nb)
      overflow_count += 1.0;
    else
      counts[(static_cast<size_t>(i1) * nb + i2) * nb + i3] += 1.0;
  }

  // Predicted mass per cell: 2x2x2 tensor Gauss-Legendre rule.
  const double g = 0.5 / std::sqrt(3.0);
  const double offs[2] = {0.5 - g, 0.5 + g};
  std::vector<double> pred(n_cells, 0.0);
  const double cell_vol = w.x1 * w.x2 * w.x3;
  for (int i1 = 0; i1 < nb; ++i1)
    for (int i2 = 0; i2 < nb; ++i2)
      for (int i3 = 0; i3 < nb; ++i3) {
        double acc = 0.0;
        for (double o1 : offs)
          for (double o2 : offs)
            for (double o3 : offs)
              acc += predicted(Vec3{bins.lo.x1 + (i1 + o1) * w.x1,
                                    bins.lo.x2 + (i2 + o2) * w.x2,
                                    bins.lo.x3 + (i3 + o3) * w.x3});
        pred[(static_cast<size_t>(i1) * nb + i2) * nb + i3] =
            acc / 8.0 * cell_vol;
      }
  double pred_in_box = pairwise_sum(pred);
  double pred_overflow = 1.0 - pred_in_box;
  if (pred_overflow < 0.0) pred_overflow = 0.0;  // quadrature round-off

  const double nd = static_cast<double>(n);
  std::vector<double> l1_terms(n_cells);
  for (size_t c = 0; c < n_cells; ++c)
    l1_terms[c] = std::abs(counts[c] / nd - pred[c]);
  const double l1 =
      pairwise_sum(l1_terms) + std::abs(overflow_count / nd - pred_overflow);

  // Chi-square over pooled cells: expected < 10 joins the overflow pool.
  double chi2 = 0.0;
  size_t pools = 0;
  double pool_obs = overflow_count, pool_exp = pred_overflow * nd;
  for (size_t c = 0; c < n_cells; ++c) {
    const double e = pred[c] * nd;
    if (e < 10.0) {
      pool_obs += counts[c];
      pool_exp += e;
    } else {
      const double d = counts[c] - e;
      chi2 += d * d / e;
      ++pools;
    }
  }
  if (pool_exp > 0.0) {
    const double d = pool_obs - pool_exp;
    chi2 += d * d / pool_exp;
    ++pools;
  }
  if (pools < 8)
    throw SparseHistogram("density_l1_compare: only " + std::to_string(pools) +
                          " pooled cells have expected count >= 10; refine the "
                          "box or add trajectories");
  const double df = static_cast<double>(pools) - 1.0;

  ComparisonReport r;
  r.experiment_id = "density_compare";
  r.metric = "density_l1";
  r.value = l1;
  r.threshold = threshold;
  r.pass = l1 <= threshold;
  r.metadata = {{"chi2", chi2},
                {"chi2_df", df},
                {"chi2_z", (chi2 - df) / std::sqrt(2.0 * df)},
                {"pools", static_cast<double>(pools)},
                {"overflow_fraction", overflow_count / nd},
                {"predicted_overflow", pred_overflow},
                {"n", nd}};
  return r;
}

}

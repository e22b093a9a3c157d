#include "ovl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "ovl/errors.hpp"
#include "ovl/fft3.hpp"

namespace ovl {

void SpectralGrid::validate() const {
  if (n_per_axis < 8 || (n_per_axis & (n_per_axis - 1)) != 0)
    throw ConfigError("grid n_per_axis must be a power of two >= 8");
  if (lambda_max <= 0.0 || x_extent <= 0.0)
    throw ConfigError("grid extents must be positive");
  const double expected = M_PI * n_per_axis;
  if (std::abs(lambda_max * x_extent - expected) > 1e-9 * expected)
    throw ConfigError("grid violates the transform closure lambda_max * x_extent = pi * n");
}

void RegimeParams::validate() const {
  if (epsilon <= 0.0) throw ConfigError("regime epsilon must be positive");
  if (base_a <= 0.0) throw ConfigError("regime base_a must be positive");
  if (base_b < 0.0) throw ConfigError("regime base_b must be non-negative");
}

CoefficientProfile RegimeParams::scaled_profile() const {
  validate();
  if (regime == Regime::Diffusion)
    return CoefficientProfile::constant(base_a / epsilon, base_b / epsilon);
  return CoefficientProfile::constant(epsilon * base_a, base_b * std::sqrt(epsilon));
}

namespace {

double max_on(const TimeFunction& f, double t_max) {
  switch (f.kind) {
    case TimeFunction::Kind::Constant: return f.c0;
    case TimeFunction::Kind::Ramp: return std::max(f.c0, f.c0 + f.c1 * t_max);
    case TimeFunction::Kind::Sine: return f.c0 + std::abs(f.c1);
  }
  return f.c0;
}

}  // namespace

struct ModeOdeContext::Schedule {
  std::vector<double> t0, h;
  std::vector<double> a0, am, a1;
  std::vector<double> f0, fm, f1;
  std::vector<int> emit;  // output slot written after this substep, else -1
  bool emit_initial = false;
};

ModeOdeContext::ModeOdeContext(const ModelParams& params, std::vector<double> t_out,
                               ModeOdeOptions opt)
    : params_(params), t_out_(std::move(t_out)), opt_(opt) {
  if (t_out_.empty()) throw ConfigError("mode solve: empty time grid");
  for (size_t i = 0; i < t_out_.size(); ++i) {
    if (t_out_[i] < 0.0) throw ConfigError("mode solve: negative output time");
    if (i > 0 && !(t_out_[i] > t_out_[i - 1]))
      throw ConfigError("mode solve: output times must be strictly increasing");
  }
  v0_sq_ = norm_sq(params_.v0);
  t_end_ = t_out_.back();
  params_.validate(t_end_);
  if (params_.coeffs.kind() == CoefficientProfile::Kind::RatioLocked)
    a_cum_ = std::make_unique<CumulativeIntegral>(
        [this](double s) { return params_.coeffs.a(s); }, t_end_);
  if (t_end_ == 0.0) return;

  a_max_ = max_on(params_.coeffs.a_fn(), t_end_);
  const double a_min = params_.coeffs.a_fn().min_on(t_end_);
  const double fast_rate = 3.0 * a_max_;
  if (fast_rate * t_end_ > 100.0) {
    // Stiff: resolve the relaxation boundary layer finely, then step at the
    // largest damping-stable size.
    layer_end_ = std::min(t_end_, 14.0 / (3.0 * a_min));
    h_fine_ = 0.1 / fast_rate;
    h_coarse_ = 0.75 / a_max_;
  } else {
    layer_end_ = t_end_;
    h_fine_ = h_coarse_ = t_end_;
  }
  double h_cap = t_end_ / 256.0;
  if (opt_.omega_hint > 0.0) h_cap = std::min(h_cap, 0.5 / opt_.omega_hint);
  h_fine_ = std::min(h_fine_, h_cap);
  h_coarse_ = std::min(h_coarse_, h_cap);
}

ModeOdeContext::~ModeOdeContext() = default;

double ModeOdeContext::f_closed(double t) const {
  switch (params_.coeffs.kind()) {
    case CoefficientProfile::Kind::Constant: {
      const double a = params_.coeffs.const_a();
      const double b = params_.coeffs.const_b();
      if (b == 0.0) return 0.0;
      return memory_kernel_closed(a * t, b * b / a, v0_sq_);
    }
    case CoefficientProfile::Kind::RatioLocked:
      return memory_kernel_closed((*a_cum_)(t), params_.coeffs.v_eq_sq(), v0_sq_);
    case CoefficientProfile::Kind::General:
      break;  // tabulated per level
  }
  return 0.0;
}

const ModeOdeContext::Schedule& ModeOdeContext::level(int lvl) {
  auto it = levels_.find(lvl);
  if (it != levels_.end()) return *it->second;

  auto sched = std::make_unique<Schedule>();
  sched->emit_initial = (t_out_.front() == 0.0);

  std::vector<double> bps;
  bps.push_back(0.0);
  for (double t : t_out_)
    if (t > 0.0) bps.push_back(t);
  if (layer_end_ > 0.0 && layer_end_ < t_end_) bps.push_back(layer_end_);
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  const int64_t mult = int64_t{1} << lvl;
  for (size_t seg = 0; seg + 1 < bps.size(); ++seg) {
    const double p = bps[seg], q = bps[seg + 1];
    const double h_target = (q <= layer_end_) ? h_fine_ : h_coarse_;
    const int64_t n =
        std::max<int64_t>(4, static_cast<int64_t>(std::ceil((q - p) / h_target))) * mult;
    const double h = (q - p) / static_cast<double>(n);
    int emit_idx = -1;
    const auto pos = std::lower_bound(t_out_.begin(), t_out_.end(), q);
    if (pos != t_out_.end() && *pos == q)
      emit_idx = static_cast<int>(pos - t_out_.begin());
    for (int64_t i = 0; i < n; ++i) {
      sched->t0.push_back(p + static_cast<double>(i) * h);
      sched->h.push_back(h);
      sched->emit.push_back(i + 1 == n ? emit_idx : -1);
    }
  }

  const size_t m = sched->t0.size();
  sched->a0.resize(m);
  sched->am.resize(m);
  sched->a1.resize(m);
  sched->f0.resize(m);
  sched->fm.resize(m);
  sched->f1.resize(m);
  for (size_t i = 0; i < m; ++i) {
    const double t0 = sched->t0[i], h = sched->h[i];
    sched->a0[i] = params_.coeffs.a(t0);
    sched->am[i] = params_.coeffs.a(t0 + 0.5 * h);
    sched->a1[i] = params_.coeffs.a(t0 + h);
  }
  if (params_.coeffs.kind() != CoefficientProfile::Kind::General) {
    for (size_t i = 0; i < m; ++i) {
      const double t0 = sched->t0[i], h = sched->h[i];
      sched->f0[i] = f_closed(t0);
      sched->fm[i] = f_closed(t0 + 0.5 * h);
      sched->f1[i] = f_closed(t0 + h);
    }
  } else {
    // The kernel/speed pair is wavevector-independent; integrate it once per
    // level with half-substeps so the stage samples carry RK4 accuracy.
    double f = 0.0, s = v0_sq_;
    auto rhs = [this](double t, double f_, double s_, double& df, double& ds) {
      const double a = params_.coeffs.a(t);
      const double b2 = params_.coeffs.b_sq(t);
      ds = -2.0 * a * s_ + 2.0 * b2;
      df = b2 - (2.0 * a + b2 / s_) * f_;
    };
    auto rk4_half = [&](double t, double hh) {
      double k1f, k1s, k2f, k2s, k3f, k3s, k4f, k4s;
      rhs(t, f, s, k1f, k1s);
      rhs(t + 0.5 * hh, f + 0.5 * hh * k1f, s + 0.5 * hh * k1s, k2f, k2s);
      rhs(t + 0.5 * hh, f + 0.5 * hh * k2f, s + 0.5 * hh * k2s, k3f, k3s);
      rhs(t + hh, f + hh * k3f, s + hh * k3s, k4f, k4s);
      f += hh / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
      s += hh / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
    };
    for (size_t i = 0; i < m; ++i) {
      const double t0 = sched->t0[i], hh = 0.5 * sched->h[i];
      sched->f0[i] = f;
      rk4_half(t0, hh);
      sched->fm[i] = f;
      rk4_half(t0 + hh, hh);
      sched->f1[i] = f;
    }
  }

  const Schedule& ref = *sched;
  levels_.emplace(lvl, std::move(sched));
  return ref;
}

void ModeOdeContext::integrate(Vec3 lambda, const Schedule& sched,
                               std::vector<ModeState>& out) const {
  const double lam_sq = norm_sq(lambda);
  const double lv = dot(lambda, params_.v0);
  const double lx = dot(lambda, params_.x0);
  double yr = std::cos(lx), yi = std::sin(lx);
  double pr = -lv * yi, pim = lv * yr;
  out.assign(t_out_.size(), ModeState{lambda, {0.0, 0.0}, {0.0, 0.0}});
  if (sched.emit_initial) out[0] = {lambda, {yr, yi}, {pr, pim}};
  const size_t m = sched.t0.size();
  for (size_t i = 0; i < m; ++i) {
    const double h = sched.h[i];
    const double lvsq = lv * lv;
    const double q0 = lam_sq * sched.f0[i] + lvsq;
    const double qm = lam_sq * sched.fm[i] + lvsq;
    const double q1 = lam_sq * sched.f1[i] + lvsq;
    const double a0 = sched.a0[i], am = sched.am[i], a1 = sched.a1[i];

    const double k1yr = pr, k1yi = pim;
    const double k1pr = -a0 * pr - q0 * yr, k1pi = -a0 * pim - q0 * yi;
    const double y2r = yr + 0.5 * h * k1yr, y2i = yi + 0.5 * h * k1yi;
    const double p2r = pr + 0.5 * h * k1pr, p2i = pim + 0.5 * h * k1pi;
    const double k2yr = p2r, k2yi = p2i;
    const double k2pr = -am * p2r - qm * y2r, k2pi = -am * p2i - qm * y2i;
    const double y3r = yr + 0.5 * h * k2yr, y3i = yi + 0.5 * h * k2yi;
    const double p3r = pr + 0.5 * h * k2pr, p3i = pim + 0.5 * h * k2pi;
    const double k3yr = p3r, k3yi = p3i;
    const double k3pr = -am * p3r - qm * y3r, k3pi = -am * p3i - qm * y3i;
    const double y4r = yr + h * k3yr, y4i = yi + h * k3yi;
    const double p4r = pr + h * k3pr, p4i = pim + h * k3pi;
    const double k4yr = p4r, k4yi = p4i;
    const double k4pr = -a1 * p4r - q1 * y4r, k4pi = -a1 * p4i - q1 * y4i;

    yr += h / 6.0 * (k1yr + 2.0 * k2yr + 2.0 * k3yr + k4yr);
    yi += h / 6.0 * (k1yi + 2.0 * k2yi + 2.0 * k3yi + k4yi);
    pr += h / 6.0 * (k1pr + 2.0 * k2pr + 2.0 * k3pr + k4pr);
    pim += h / 6.0 * (k1pi + 2.0 * k2pi + 2.0 * k3pi + k4pi);

    const int e = sched.emit[i];
    if (e >= 0) out[e] = {lambda, {yr, yi}, {pr, pim}};
  }
}

std::vector<ModeState> ModeOdeContext::solve(Vec3 lambda) {
  if (!is_finite(lambda)) throw ConfigError("mode solve: non-finite wavevector");
  if (t_end_ == 0.0) {
    const double lx = dot(lambda, params_.x0);
    const double lv = dot(lambda, params_.v0);
    const std::complex<double> psi0{std::cos(lx), std::sin(lx)};
    return {ModeState{lambda, psi0, std::complex<double>(0.0, 1.0) * lv * psi0}};
  }
  std::vector<ModeState> prev, cur;
  integrate(lambda, level(0), prev);
  for (int lvl = 1; lvl <= opt_.max_levels; ++lvl) {
    integrate(lambda, level(lvl), cur);
    double delta = 0.0;
    for (size_t i = 0; i < t_out_.size(); ++i)
      delta = std::max(delta, std::abs(cur[i].psi - prev[i].psi));
    if (delta < opt_.tol) return cur;
    prev.swap(cur);
  }
  throw StepSizeFailure("mode solve did not converge to " + std::to_string(opt_.tol) +
                        " within " + std::to_string(opt_.max_levels) +
                        " step-halving levels");
}

std::vector<ModeState> mode_ode_solve(Vec3 lambda, const ModelParams& params,
                                      const std::vector<double>& t_grid) {
  ModeOdeOptions opt;
  const double t_end = t_grid.empty() ? 0.0 : t_grid.back();
  if (t_end > 0.0) {
    double f_cap = 1e-12;
    for (double frac : {0.25, 0.5, 1.0})
      f_cap = std::max(f_cap, memory_kernel_f(frac * t_end, params.coeffs,
                                              norm_sq(params.v0)));
    opt.omega_hint =
        std::sqrt(norm_sq(lambda) * (1.5 * f_cap + norm_sq(params.v0)));
  }
  ModeOdeContext ctx(params, t_grid, opt);
  return ctx.solve(lambda);
}

namespace {

void check_spectral_mass(const SpectralGrid& grid,
                         const std::vector<std::complex<double>>& hat) {
  const int n = grid.n_per_axis;
  const double cut = 0.8 * grid.lambda_max;
  double total = 0.0, outer = 0.0;
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int i3 = 0; i3 < n; ++i3) {
        const double w = std::abs(hat[grid.index(i1, i2, i3)]);
        total += w;
        const Vec3 lam{grid.lambda(i1), grid.lambda(i2), grid.lambda(i3)};
        if (norm(lam) > cut) outer += w;
      }
  if (outer > 1e-3 * total)
    throw GridTooCoarse("spectral mass beyond 0.8*lambda_max is " +
                        std::to_string(outer / total) +
                        " of total (limit 1e-3); refine the grid");
}

// f(t) stays below max(equilibrium, initial-speed) / 3 scales; a cheap bound
// for the oscillation-rate hint.
double f_cap_estimate(const ModelParams& params, double t_end, double v0_sq) {
  double cap = 1e-12;
  for (double frac : {0.25, 0.5, 1.0}) {
    const double t = frac * t_end;
    if (t > 0.0) cap = std::max(cap, memory_kernel_f(t, params.coeffs, v0_sq));
  }
  return 1.5 * cap;
}

}  // namespace

std::vector<DensityResult> evolve_density(const SpectralGrid& grid,
                                          const ModelParams& params,
                                          const std::vector<double>& times,
                                          const std::vector<double>& initial_density) {
  grid.validate();
  if (times.empty()) throw ConfigError("evolve_density: no output times");
  if (initial_density.size() != grid.size())
    throw ConfigError("evolve_density: field size does not match grid");
  const double dv = grid.dx() * grid.dx() * grid.dx();
  double mass0 = 0.0;
  for (double v : initial_density) {
    if (!(v >= 0.0)) throw ConfigError("evolve_density: initial density must be >= 0");
    mass0 += v;
  }
  mass0 *= dv;
  if (std::abs(mass0 - 1.0) > 1e-6)
    throw ConfigError("evolve_density: initial density integrates to " +
                      std::to_string(mass0) + ", expected 1");

  const int n = grid.n_per_axis;
  std::vector<std::complex<double>> hat(initial_density.begin(), initial_density.end());
  Fft3 fft(n);
  fft.forward(hat);
  for (auto& z : hat) z *= dv;
  check_spectral_mass(grid, hat);

  // The lambda = -lambda_max planes have no +lambda_max partner on the grid,
  // so their (complex) mode factors would break the Hermitian symmetry that
  // keeps the inverse transform real. They carry only content the resolution
  // check already bounded; drop them. Mass is the lambda = 0 coefficient and
  // is untouched.
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int i3 = 0; i3 < n; ++i3)
        if (i1 == 0 || i2 == 0 || i3 == 0) hat[grid.index(i1, i2, i3)] = 0.0;

  ModelParams point = params;
  point.x0 = Vec3{};  // per-mode point source; x0 lives in the initial field
  const double v0_sq = norm_sq(params.v0);
  const double t_end = times.back();
  ModeOdeOptions opt;
  opt.tol = 1e-10;  // negatives clipped from the output stay below 1e-9 mass
  const double lam_corner = std::sqrt(3.0) * grid.lambda_max;
  opt.omega_hint =
      lam_corner * std::sqrt(f_cap_estimate(point, t_end, v0_sq) + v0_sq);
  ModeOdeContext ctx(point, times, opt);

  const size_t n_t = times.size();
  std::vector<std::vector<std::complex<double>>> psi_t(
      n_t, std::vector<std::complex<double>>(grid.size()));
  std::vector<uint8_t> visited(grid.size(), 0);
  for (int i1 = 1; i1 < n; ++i1)
    for (int i2 = 1; i2 < n; ++i2)
      for (int i3 = 1; i3 < n; ++i3) {
        const size_t idx = grid.index(i1, i2, i3);
        if (visited[idx]) continue;
        const Vec3 lam{grid.lambda(i1), grid.lambda(i2), grid.lambda(i3)};
        const auto modes = ctx.solve(lam);
        for (size_t ti = 0; ti < n_t; ++ti) psi_t[ti][idx] = modes[ti].psi;
        visited[idx] = 1;
        // Mirror index carries -lambda; the solution there is the conjugate.
        const int m1 = (n - i1) % n, m2 = (n - i2) % n, m3 = (n - i3) % n;
        const size_t midx = grid.index(m1, m2, m3);
        if (!visited[midx]) {
          for (size_t ti = 0; ti < n_t; ++ti)
            psi_t[ti][midx] = std::conj(modes[ti].psi);
          visited[midx] = 1;
        }
      }

  std::vector<DensityResult> results(n_t);
  std::vector<std::complex<double>> work(grid.size());
  for (size_t ti = 0; ti < n_t; ++ti) {
    for (size_t k = 0; k < grid.size(); ++k) work[k] = hat[k] * psi_t[ti][k];
    check_spectral_mass(grid, work);
    fft.inverse(work);
    DensityResult& r = results[ti];
    r.grid = grid;
    r.t = times[ti];
    r.values.resize(grid.size());
    double peak = 0.0, max_im = 0.0;
    for (size_t k = 0; k < grid.size(); ++k) {
      const double re = work[k].real() / dv;
      r.values[k] = re;
      peak = std::max(peak, std::abs(re));
      max_im = std::max(max_im, std::abs(work[k].imag() / dv));
    }
    r.imag_residue_rel = peak > 0.0 ? max_im / peak : 0.0;
    double clipped = 0.0, mass = 0.0;
    for (auto& v : r.values) {
      if (v < 0.0) {
        clipped -= v;
        v = 0.0;
      }
      mass += v;
    }
    r.clipped_mass = clipped * dv;
    r.mass = mass * dv;
  }
  return results;
}

DensityResult density_from_modes(const SpectralGrid& grid, const ModelParams& params,
                                 double t, const std::vector<double>& initial_density) {
  auto res = evolve_density(grid, params, {t}, initial_density);
  return std::move(res.front());
}

double diffusion_kernel(double t, Vec3 x, Vec3 x0, Vec3 v0_dir, double v_eq_sq,
                        double a) {
  if (t <= 0.0) throw ConfigError("diffusion_kernel: t must be positive");
  if (a <= 0.0 || v_eq_sq <= 0.0)
    throw ConfigError("diffusion_kernel: a and v_eq_sq must be positive");
  const double dn = norm(v0_dir);
  if (dn == 0.0) throw ConfigError("diffusion_kernel: v0_dir must be nonzero");
  const double var_par = 2.0 * (2.0 * v_eq_sq / (3.0 * a)) * t;
  const double var_perp = 2.0 * (v_eq_sq / (3.0 * a)) * t;
  const Vec3 d = x - x0;
  const double d_par = dot(d, v0_dir) / dn;
  const double d_perp_sq = std::max(0.0, norm_sq(d) - d_par * d_par);
  const double norm_c =
      1.0 / (std::pow(2.0 * M_PI, 1.5) * std::sqrt(var_par) * var_perp);
  return norm_c *
         std::exp(-0.5 * d_par * d_par / var_par - 0.5 * d_perp_sq / var_perp);
}

double wave_solution(double t, Vec3 x, const std::function<double(Vec3)>& initial_density,
                     Vec3 v0) {
  if (t < 0.0) throw ConfigError("wave_solution: t must be >= 0");
  if (norm_sq(v0) == 0.0) throw ConfigError("wave_solution: |v0| must be positive");
  return initial_density(x - t * v0);
}

std::vector<double> averaged_density_equation_rhs(double t, const SpectralGrid& grid,
                                                  const std::vector<double>& field,
                                                  const RegimeParams& regime) {
  grid.validate();
  regime.validate();
  if (regime.regime != Regime::Diffusion)
    throw NotApplicable("averaged density equation applies to the diffusion regime");
  if (field.size() != grid.size())
    throw ConfigError("averaged_density_equation_rhs: field size mismatch");
  const double veq = regime.base_b * regime.base_b / regime.base_a;
  const double coeff =
      (veq / 3.0) * (1.0 - std::exp(-3.0 * regime.base_a * t / regime.epsilon)) +
      veq / 3.0;
  std::vector<std::complex<double>> hat(field.begin(), field.end());
  Fft3 fft(grid.n_per_axis);
  fft.forward(hat);
  check_spectral_mass(grid, hat);
  const int n = grid.n_per_axis;
  for (int k1 = 0; k1 < n; ++k1)
    for (int k2 = 0; k2 < n; ++k2)
      for (int k3 = 0; k3 < n; ++k3) {
        const Vec3 lam{grid.lambda(k1), grid.lambda(k2), grid.lambda(k3)};
        hat[grid.index(k1, k2, k3)] *= -norm_sq(lam) * coeff;
      }
  fft.inverse(hat);
  std::vector<double> out(grid.size());
  for (size_t k = 0; k < grid.size(); ++k) out[k] = hat[k].real();
  return out;
}

std::vector<double> sample_density(const SpectralGrid& grid,
                                   const std::function<double(Vec3)>& rho,
                                   bool normalize) {
  grid.validate();
  const int n = grid.n_per_axis;
  std::vector<double> out(grid.size());
  double total = 0.0;
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int i3 = 0; i3 < n; ++i3) {
        const double v = rho(Vec3{grid.x(i1), grid.x(i2), grid.x(i3)});
        out[grid.index(i1, i2, i3)] = v;
        total += v;
      }
  if (normalize) {
    const double dv = grid.dx() * grid.dx() * grid.dx();
    if (total <= 0.0) throw ConfigError("sample_density: field has no mass");
    const double scale = 1.0 / (total * dv);
    for (auto& v : out) v *= scale;
  }
  return out;
}

}

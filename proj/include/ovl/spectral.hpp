#pragma once

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "ovl/model.hpp"
#include "ovl/quadrature.hpp"
#include "ovl/vec3.hpp"

namespace ovl {

struct ModeState {
  Vec3 lambda;
  std::complex<double> psi;
  std::complex<double> dpsi_dt;
};

struct SpectralGrid {
  int n_per_axis = 0;     // power of two >= 8
  double lambda_max = 0;  // wavevector half-extent
  double x_extent = 0;    // spatial box edge length

  // Transform-pair closure lambda_max * x_extent = pi * n_per_axis.
  void validate() const;

  double dx() const { return x_extent / n_per_axis; }
  double dlambda() const { return 2.0 * lambda_max / n_per_axis; }
  double x(int i) const { return (i - n_per_axis / 2) * dx(); }
  double lambda(int i) const { return (i - n_per_axis / 2) * dlambda(); }
  size_t size() const {
    return static_cast<size_t>(n_per_axis) * n_per_axis * n_per_axis;
  }
  size_t index(int i1, int i2, int i3) const {
    return (static_cast<size_t>(i1) * n_per_axis + i2) * n_per_axis + i3;
  }
};

enum class Regime { Diffusion, Wave };

struct RegimeParams {
  Regime regime = Regime::Diffusion;
  double epsilon = 0.0;
  double base_a = 0.0;  // a-tilde (diffusion) or a0 (wave)
  double base_b = 0.0;  // b-tilde (diffusion) or b0 (wave)

  void validate() const;
  // Diffusion: (a, b) = (base_a/eps, base_b/eps).
  // Wave: (a, b) = (eps*base_a, base_b*sqrt(eps)).
  CoefficientProfile scaled_profile() const;
};

struct ModeOdeOptions {
  double tol = 1e-8;        // Richardson target: max |delta psi| at outputs
  int max_levels = 12;      // step-halving levels before StepSizeFailure
  double omega_hint = 0.0;  // known oscillation rate bound, seeds the base step
};

// Shared stepping context for the second-order mode equation
//   psi'' + a(t) psi' = -(|lambda|^2 f(t) + (lambda, v0)^2) psi,
//   psi(0) = exp(i(lambda, x0)), psi'(0) = i(lambda, v0) psi(0).
// The coefficient tables (a, f at every stage time) are lambda-independent
// and cached per refinement level, so batch solves over a wavevector grid
// pay the f(t) evaluation cost once. Step plan is two-phase when a is stiff:
// fine steps across the relaxation boundary layer, coarser after, all halved
// together by the Richardson check.
class ModeOdeContext {
 public:
  ModeOdeContext(const ModelParams& params, std::vector<double> t_out,
                 ModeOdeOptions opt = {});
  ~ModeOdeContext();

  // Solves one wavevector, refining until the step-halving change at every
  // output time is below tol; throws StepSizeFailure past max_levels.
  std::vector<ModeState> solve(Vec3 lambda);
  const std::vector<double>& t_out() const { return t_out_; }

 private:
  struct Schedule;
  const Schedule& level(int lvl);
  void integrate(Vec3 lambda, const Schedule& sched, std::vector<ModeState>& out) const;
  double f_closed(double t) const;

  ModelParams params_;
  std::vector<double> t_out_;
  ModeOdeOptions opt_;
  double v0_sq_ = 0.0;
  double t_end_ = 0.0;
  double a_max_ = 0.0;
  double layer_end_ = 0.0;  // two-phase boundary (== t_end_ when not stiff)
  double h_fine_ = 0.0;
  double h_coarse_ = 0.0;
  std::unique_ptr<CumulativeIntegral> a_cum_;  // RatioLocked profiles
  std::map<int, std::unique_ptr<Schedule>> levels_;
};

// Single-mode convenience wrapper over ModeOdeContext.
std::vector<ModeState> mode_ode_solve(Vec3 lambda, const ModelParams& params,
                                      const std::vector<double>& t_grid);

struct DensityResult {
  SpectralGrid grid;
  double t = 0.0;
  std::vector<double> values;     // non-negative; negatives clipped, reported
  double mass = 0.0;              // sum * dx^3 after clipping
  double clipped_mass = 0.0;      // total negative mass removed by clipping
  double imag_residue_rel = 0.0;  // max |Im| / peak |Re| before clipping
};

// Evolves a sampled initial density through the per-mode ODE: forward
// transform, multiply by the point-source mode solution (psi0 = 1), inverse
// transform. One context solves all requested times. Throws GridTooCoarse if
// more than 0.1% of spectral mass sits beyond 0.8 * lambda_max.
std::vector<DensityResult> evolve_density(const SpectralGrid& grid,
                                          const ModelParams& params,
                                          const std::vector<double>& times,
                                          const std::vector<double>& initial_density);

DensityResult density_from_modes(const SpectralGrid& grid, const ModelParams& params,
                                 double t, const std::vector<double>& initial_density);

// Anisotropic Gaussian with diffusivity 2*v_eq_sq/(3a) along v0_dir and
// v_eq_sq/(3a) transverse, centered at x0.
double diffusion_kernel(double t, Vec3 x, Vec3 x0, Vec3 v0_dir, double v_eq_sq,
                        double a);

// Rigid translation of the initial profile: initial_density(x - v0 * t).
double wave_solution(double t, Vec3 x, const std::function<double(Vec3)>& initial_density,
                     Vec3 v0);

// Right-hand side of the velocity-averaged density equation, evaluated
// spectrally: each mode is multiplied by -|lambda|^2 c(t) with
// c(t) = (|v~|^2/3) [1 - exp(-3 a~ t / eps)] + |v~|^2/3. Diffusion regime only.
std::vector<double> averaged_density_equation_rhs(double t, const SpectralGrid& grid,
                                                  const std::vector<double>& field,
                                                  const RegimeParams& regime);

// Samples a callable density on the grid; optionally rescales to unit mass.
std::vector<double> sample_density(const SpectralGrid& grid,
                                   const std::function<double(Vec3)>& rho,
                                   bool normalize = true);

}

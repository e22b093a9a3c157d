#include "ovl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ovl/errors.hpp"
#include "ovl/io.hpp"
#include "ovl/quadrature.hpp"

namespace ovl {

bool ExperimentOutput::all_pass() const {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return true;
}

namespace {

ComparisonReport make_report(std::string id, std::string metric, double value,
                             double threshold, bool pass) {
  ComparisonReport r;
  r.experiment_id = std::move(id);
  r.metric = std::move(metric);
  r.value = value;
  r.threshold = threshold;
  r.pass = pass;
  return r;
}

std::vector<double> gaussian_field(const SpectralGrid& grid, double sigma,
                                   Vec3 center) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  return sample_density(
      grid, [&](Vec3 x) { return std::exp(-norm_sq(x - center) * inv); }, true);
}

struct Hist {
  std::vector<double> p;
  double overflow = 0.0;
};

Hist histogram_probs(const Ensemble& ens, size_t ti, const BinningSpec& b) {
  const int nb = b.bins_per_axis;
  Hist h;
  h.p.assign(static_cast<size_t>(nb) * nb * nb, 0.0);
  const Vec3 w{(b.hi.x1 - b.lo.x1) / nb, (b.hi.x2 - b.lo.x2) / nb,
               (b.hi.x3 - b.lo.x3) / nb};
  const double inc = 1.0 / static_cast<double>(ens.n_traj);
  for (size_t k = 0; k < ens.n_traj; ++k) {
    const Vec3& x = ens.at(k, ti).x;
    const int i1 = static_cast<int>(std::floor((x.x1 - b.lo.x1) / w.x1));
    const int i2 = static_cast<int>(std::floor((x.x2 - b.lo.x2) / w.x2));
    const int i3 = static_cast<int>(std::floor((x.x3 - b.lo.x3) / w.x3));
    if (i1 < 0 || i1 >= nb || i2 < 0 || i2 >= nb || i3 < 0 || i3 >= nb)
      h.overflow += inc;
    else
      h.p[(static_cast<size_t>(i1) * nb + i2) * nb + i3] += inc;
  }
  return h;
}

double hist_l1(const Hist& a, const Hist& b) {
  double s = std::abs(a.overflow - b.overflow);
  for (size_t c = 0; c < a.p.size(); ++c) s += std::abs(a.p[c] - b.p[c]);
  return s;
}

// Trilinear interpolation of a density grid; zero outside the box.
std::function<double(Vec3)> density_interpolant(DensityResult d) {
  return [d = std::move(d)](Vec3 x) {
    const SpectralGrid& g = d.grid;
    const int n = g.n_per_axis;
    const double dx = g.dx();
    const double f1 = (x.x1 - g.x(0)) / dx;
    const double f2 = (x.x2 - g.x(0)) / dx;
    const double f3 = (x.x3 - g.x(0)) / dx;
    const int i1 = static_cast<int>(std::floor(f1));
    const int i2 = static_cast<int>(std::floor(f2));
    const int i3 = static_cast<int>(std::floor(f3));
    if (i1 < 0 || i1 + 1 >= n || i2 < 0 || i2 + 1 >= n || i3 < 0 || i3 + 1 >= n)
      return 0.0;
    const double u = f1 - i1, v = f2 - i2, w = f3 - i3;
    double acc = 0.0;
    for (int d1 = 0; d1 <= 1; ++d1)
      for (int d2 = 0; d2 <= 1; ++d2)
        for (int d3 = 0; d3 <= 1; ++d3) {
          const double wt = (d1 ? u : 1.0 - u) * (d2 ? v : 1.0 - v) *
                            (d3 ? w : 1.0 - w);
          acc += wt * d.values[g.index(i1 + d1, i2 + d2, i3 + d3)];
        }
    return acc;
  };
}

double mode_hint(const ModelParams& params, const std::vector<Vec3>& lambdas,
                 double t_end) {
  double lam_max = 0.0;
  for (const Vec3& l : lambdas) lam_max = std::max(lam_max, norm(l));
  const double v0_sq = norm_sq(params.v0);
  double f_cap = 1e-12;
  for (double frac : {0.25, 0.5, 1.0})
    f_cap = std::max(f_cap,
                     memory_kernel_f(frac * t_end, params.coeffs, v0_sq));
  return lam_max * std::sqrt(1.5 * f_cap + v0_sq);
}

// Per-(lambda, t) agreement between the MC characteristic function and the
// mode solution, plus a cell-count summary. The standard error is the
// leave-one-out jackknife of the complex mean.
std::vector<ComparisonReport> cf_cell_reports(const std::string& id,
                                              const Ensemble& ens,
                                              const ModelParams& params,
                                              const std::vector<Vec3>& lambdas,
                                              const std::vector<double>& times,
                                              double sigma, double min_cells,
                                              std::string* table_csv) {
  if (lambdas.empty()) throw ConfigError("cf comparison: no wavevectors");
  if (times.empty()) throw ConfigError("cf comparison: no positive sample times");
  ModeOdeOptions opt;
  opt.omega_hint = mode_hint(params, lambdas, times.back());
  ModeOdeContext ctx(params, times, opt);

  std::vector<ComparisonReport> out;
  std::ostringstream tab;
  tab << "lambda1,lambda2,lambda3,t,re_mc,im_mc,se,re_mode,im_mode,abs_diff,within\n";
  int within = 0;
  for (size_t li = 0; li < lambdas.size(); ++li) {
    const auto modes = ctx.solve(lambdas[li]);
    for (size_t tj = 0; tj < times.size(); ++tj) {
      const EmpiricalCF ecf = empirical_char_fn(ens, lambdas[li], times[tj]);
      const std::complex<double> psi = modes[tj].psi;
      const double diff = std::abs(ecf.estimate - psi);
      const double thr = sigma * ecf.std_error;
      const bool ok = diff <= thr;
      within += ok ? 1 : 0;
      ComparisonReport r = make_report(
          id, "cf_l" + std::to_string(li) + "_t" + std::to_string(tj), diff, thr, ok);
      r.metadata = {{"lambda1", lambdas[li].x1}, {"lambda2", lambdas[li].x2},
                    {"lambda3", lambdas[li].x3}, {"t", times[tj]},
                    {"re_mc", ecf.estimate.real()}, {"im_mc", ecf.estimate.imag()},
                    {"re_mode", psi.real()},        {"im_mode", psi.imag()},
                    {"se", ecf.std_error}};
      out.push_back(std::move(r));
      tab << format_double(lambdas[li].x1) << ',' << format_double(lambdas[li].x2)
          << ',' << format_double(lambdas[li].x3) << ',' << format_double(times[tj])
          << ',' << format_double(ecf.estimate.real()) << ','
          << format_double(ecf.estimate.imag()) << ',' << format_double(ecf.std_error)
          << ',' << format_double(psi.real()) << ',' << format_double(psi.imag())
          << ',' << format_double(diff) << ',' << (ok ? 1 : 0) << '\n';
    }
  }
  out.push_back(make_report(id, "cf_cells_within_tolerance", within, min_cells,
                            within >= min_cells));
  if (table_csv) *table_csv = tab.str();
  return out;
}

std::vector<double> positive_times(const std::vector<double>& ts) {
  std::vector<double> out;
  for (double t : ts)
    if (t > 0.0) out.push_back(t);
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"speed-relaxation", "cf-crosscheck", "diffusion-limit", "wave-limit",
          "v0-symmetry"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.scheme.kind = SchemeKind::SpeedProjected;
  if (name == "speed-relaxation") {
    c.experiment = "speed_relaxation";
    c.model.coeffs = CoefficientProfile::constant(1.0, 1.0);
    c.model.v0 = {2.0, 0.0, 0.0};
    c.scheme.dt = 1e-3;
    c.n_traj = 200;
    c.sample_times = {0.0, 0.5, 1.0, 2.0, 5.0};
    c.master_seed = 90101;
    c.output_formats = {"csv", "binary"};
    c.thresholds = {{"speed_rel_err", 1e-12}};
  } else if (name == "cf-crosscheck") {
    c.experiment = "cf_crosscheck";
    c.model.coeffs = CoefficientProfile::constant(1.0, 1.0);
    const double r = 1.0 / std::sqrt(2.0);
    c.model.v0 = {0.0, r, -r};
    c.scheme.dt = 1e-3;
    c.n_traj = 100000;
    c.sample_times = {0.0, 0.5, 1.0, 2.0};
    c.lambdas = {{0.5, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 1.0}, {2.0, 2.0, 0.0}};
    c.master_seed = 90202;
    c.output_formats = {"binary"};
    c.thresholds = {{"cf_sigma", 3.0}, {"cf_min_cells", 11.0}};
  } else if (name == "diffusion-limit") {
    c.experiment = "diffusion_limit";
    RegimeParams rp;
    rp.regime = Regime::Diffusion;
    rp.epsilon = 1e-3;
    rp.base_a = 1.0;
    rp.base_b = 1.0;
    c.regime = rp;
    c.model.coeffs = rp.scaled_profile();
    c.model.v0 = {1.0, 0.0, 0.0};
    c.scheme.dt = 1e-4;
    c.n_traj = 30000;
    c.sample_times = {0.0, 0.5};
    c.sweep_epsilons = {1e-1, 1e-2, 1e-3};
    c.master_seed = 90404;
    c.output_formats = {"binary"};
  } else if (name == "wave-limit") {
    c.experiment = "wave_limit";
    RegimeParams rp;
    rp.regime = Regime::Wave;
    rp.epsilon = 1e-4;
    rp.base_a = 1.0;
    rp.base_b = 1.0;
    c.regime = rp;
    c.model.coeffs = rp.scaled_profile();
    c.model.v0 = {1.0, 0.0, 0.0};
    c.scheme.dt = 1e-3;
    c.n_traj = 20000;
    c.sample_times = {0.0, 1.0};
    c.sweep_epsilons = {1e-2, 1e-3, 1e-4};
    c.master_seed = 90505;
    c.output_formats = {"binary"};
  } else if (name == "v0-symmetry") {
    c.experiment = "v0_symmetry";
    RegimeParams rp;
    rp.regime = Regime::Diffusion;
    rp.epsilon = 1e-3;
    rp.base_a = 1.0;
    rp.base_b = 1.0;
    c.regime = rp;
    c.model.coeffs = rp.scaled_profile();
    c.model.v0 = {1.0, 0.0, 0.0};
    c.scheme.dt = 1e-4;
    c.n_traj = 8000;
    c.sample_times = {0.0, 0.5};
    SpectralGrid g;
    g.n_per_axis = 32;
    g.x_extent = 12.0;
    g.lambda_max = M_PI * g.n_per_axis / g.x_extent;
    c.grid = g;
    c.initial_density = ExperimentConfig::InitialDensity{1.0, Vec3{}};
    c.master_seed = 90303;
    c.output_formats = {"binary"};
    c.thresholds = {{"pointwise_abs", 1e-9}, {"null_pairs", 4.0}};
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return c;
}

ExperimentOutput run_simulate_workflow(const ExperimentConfig& cfg, int threads) {
  ExperimentOutput out;
  const std::string id =
      cfg.experiment == "speed_relaxation" ? "speed-relaxation" : "simulate";
  Ensemble ens = simulate_ensemble(cfg.model, cfg.scheme, cfg.n_traj,
                                   cfg.sample_times, cfg.master_seed, threads);
  const SpeedLaw law{cfg.model.coeffs, norm_sq(cfg.model.v0)};
  std::ostringstream tab;
  tab << "t,mean_speed_sq,predicted,rel_err\n";
  double max_rel = 0.0;
  std::vector<double> sq(ens.n_traj);
  for (size_t ti = 0; ti < ens.n_times(); ++ti) {
    for (size_t k = 0; k < ens.n_traj; ++k) sq[k] = norm_sq(ens.at(k, ti).v);
    const double mean = pairwise_sum(sq) / static_cast<double>(ens.n_traj);
    const double pred = speed_squared(ens.sample_times[ti], law);
    const double rel = std::abs(mean - pred) / pred;
    max_rel = std::max(max_rel, rel);
    tab << format_double(ens.sample_times[ti]) << ',' << format_double(mean) << ','
        << format_double(pred) << ',' << format_double(rel) << '\n';
  }
  const double def =
      cfg.scheme.kind == SchemeKind::SpeedProjected ? 1e-12 : 5e-3;
  const double thr = cfg.threshold_or("speed_rel_err", def);
  ComparisonReport r =
      make_report(id, "speed_curve_max_rel_err", max_rel, thr, max_rel <= thr);
  r.metadata = {{"n_traj", static_cast<double>(ens.n_traj)},
                {"dt", cfg.scheme.dt}};
  out.reports.push_back(std::move(r));
  out.tables.emplace_back("speed_curve.csv", tab.str());
  out.ensembles.emplace_back("ensemble", std::move(ens));
  return out;
}

ExperimentOutput run_spectral_workflow(const ExperimentConfig& cfg, int threads) {
  (void)threads;  // mode solves are deliberately single-threaded
  if (!cfg.grid || !cfg.initial_density)
    throw ConfigError("spectral workflow requires grid and initial_density");
  ExperimentOutput out;
  const std::string id = "spectral";
  const auto init =
      gaussian_field(*cfg.grid, cfg.initial_density->sigma, cfg.initial_density->center);
  auto results = evolve_density(*cfg.grid, cfg.model, cfg.sample_times, init);
  const double mass_thr = cfg.threshold_or("mass_abs", 1e-9);
  const double imag_thr = cfg.threshold_or("imag_residue_rel", 1e-10);
  for (size_t j = 0; j < results.size(); ++j) {
    const DensityResult& d = results[j];
    ComparisonReport rm =
        make_report(id, "mass_err_t" + std::to_string(j), std::abs(d.mass - 1.0),
                    mass_thr, std::abs(d.mass - 1.0) <= mass_thr);
    rm.metadata = {{"t", d.t}, {"clipped_mass", d.clipped_mass}};
    out.reports.push_back(std::move(rm));
    out.reports.push_back(make_report(id, "imag_residue_t" + std::to_string(j),
                                      d.imag_residue_rel, imag_thr,
                                      d.imag_residue_rel <= imag_thr));
    out.densities.emplace_back("density_t" + std::to_string(j), std::move(results[j]));
  }
  if (!cfg.lambdas.empty()) {
    const auto times = positive_times(cfg.sample_times);
    if (!times.empty()) {
      ModeOdeOptions opt;
      opt.omega_hint = mode_hint(cfg.model, cfg.lambdas, times.back());
      ModeOdeContext ctx(cfg.model, times, opt);
      std::ostringstream tab;
      tab << "lambda1,lambda2,lambda3,t,re,im\n";
      for (const Vec3& lam : cfg.lambdas) {
        const auto modes = ctx.solve(lam);
        for (size_t tj = 0; tj < times.size(); ++tj)
          tab << format_double(lam.x1) << ',' << format_double(lam.x2) << ','
              << format_double(lam.x3) << ',' << format_double(times[tj]) << ','
              << format_double(modes[tj].psi.real()) << ','
              << format_double(modes[tj].psi.imag()) << '\n';
      }
      out.tables.emplace_back("cf_curves.csv", tab.str());
    }
  }
  return out;
}

ExperimentOutput run_compare_workflow(const ExperimentConfig& cfg, int threads,
                                      const std::string& ensemble_path,
                                      const std::string& prediction_path) {
  ExperimentOutput out;
  const std::string id = "compare";
  Ensemble ens;
  if (ensemble_path.empty()) {
    ens = simulate_ensemble(cfg.model, cfg.scheme, cfg.n_traj, cfg.sample_times,
                            cfg.master_seed, threads);
  } else {
    ens = read_ensemble_any(ensemble_path);
    ens.params = cfg.model;  // file carries states; physics comes from config
  }
  const double t_cmp = ens.sample_times.back();

  if (!cfg.lambdas.empty()) {
    std::string table;
    auto reps = cf_cell_reports(id, ens, cfg.model, cfg.lambdas,
                                positive_times(ens.sample_times),
                                cfg.threshold_or("cf_sigma", 3.0),
                                cfg.threshold_or("cf_min_cells", 11.0), &table);
    for (auto& r : reps) out.reports.push_back(std::move(r));
    out.tables.emplace_back("cf_table.csv", table);
  }

  if (!prediction_path.empty()) {
    const FileKind kind = sniff_file_kind(prediction_path);
    if (kind == FileKind::EnsembleBinary || kind == FileKind::EnsembleCsv) {
      Ensemble other = read_ensemble_any(prediction_path);
      size_t oti = other.n_times();
      double t_two = 0.0;
      bool found = false;
      for (size_t a = ens.n_times(); a-- > 0 && !found;)
        for (size_t b = other.n_times(); b-- > 0;)
          if (std::abs(ens.sample_times[a] - other.sample_times[b]) <= 1e-9) {
            t_two = ens.sample_times[a];
            oti = b;
            found = true;
            break;
          }
      if (!found)
        throw ConfigError("compare: the two ensembles share no sample time");
      const size_t eti = ens.time_index(t_two);
      // Data-driven box: mean +/- 3 max-axis SD, floored at half-width 0.5.
      Vec3 mean{};
      for (size_t k = 0; k < ens.n_traj; ++k) mean += ens.at(k, eti).x;
      mean = mean / static_cast<double>(ens.n_traj);
      double var = 0.0;
      for (size_t k = 0; k < ens.n_traj; ++k) {
        const Vec3 d = ens.at(k, eti).x - mean;
        var = std::max({var, d.x1 * d.x1, d.x2 * d.x2, d.x3 * d.x3});
      }
      const double half = std::max(0.5, 3.0 * std::sqrt(var));
      BinningSpec bins{8, mean - Vec3{half, half, half}, mean + Vec3{half, half, half}};
      const Hist ha = histogram_probs(ens, eti, bins);
      const Hist hb = histogram_probs(other, oti, bins);
      const double l1 = hist_l1(ha, hb);
      const double thr = cfg.threshold_or("two_sample_l1", 0.5);
      ComparisonReport r = make_report(id, "two_sample_l1", l1, thr, l1 <= thr);
      r.metadata = {{"t", t_two}, {"n_a", static_cast<double>(ens.n_traj)},
                    {"n_b", static_cast<double>(other.n_traj)}};
      out.reports.push_back(std::move(r));
    } else {
      DensityResult pd = read_density_any(prediction_path);
      const SpectralGrid g = pd.grid;
      const double hw = 0.375 * g.x_extent;
      BinningSpec bins{8, Vec3{-hw, -hw, -hw}, Vec3{hw, hw, hw}};
      ComparisonReport r =
          density_l1_compare(ens, t_cmp, density_interpolant(std::move(pd)), bins,
                             cfg.threshold_or("density_l1", 0.5));
      r.experiment_id = id;
      r.metadata["t"] = t_cmp;
      out.reports.push_back(std::move(r));
    }
  } else if (cfg.grid && cfg.initial_density) {
    const auto init = gaussian_field(*cfg.grid, cfg.initial_density->sigma,
                                     cfg.initial_density->center);
    DensityResult pd = density_from_modes(*cfg.grid, cfg.model, t_cmp, init);
    const double hw = 0.375 * cfg.grid->x_extent;
    BinningSpec bins{8, Vec3{-hw, -hw, -hw}, Vec3{hw, hw, hw}};
    ComparisonReport r =
        density_l1_compare(ens, t_cmp, density_interpolant(std::move(pd)), bins,
                           cfg.threshold_or("density_l1", 0.5));
    r.experiment_id = id;
    r.metadata["t"] = t_cmp;
    out.reports.push_back(std::move(r));
  }

  if (out.reports.empty())
    throw ConfigError(
        "compare: nothing to compare (need lambdas, a prediction path, or "
        "grid + initial_density)");
  if (ensemble_path.empty())
    out.ensembles.emplace_back("ensemble", std::move(ens));
  return out;
}

ExperimentOutput run_speed_relaxation(const ExperimentConfig& cfg, int threads) {
  return run_simulate_workflow(cfg, threads);
}

ExperimentOutput run_cf_crosscheck(const ExperimentConfig& cfg, int threads) {
  if (cfg.lambdas.empty())
    throw ConfigError("cf_crosscheck requires a lambdas list");
  ExperimentOutput out;
  Ensemble ens = simulate_ensemble(cfg.model, cfg.scheme, cfg.n_traj,
                                   cfg.sample_times, cfg.master_seed, threads);
  std::string table;
  out.reports = cf_cell_reports("cf-crosscheck", ens, cfg.model, cfg.lambdas,
                                positive_times(cfg.sample_times),
                                cfg.threshold_or("cf_sigma", 3.0),
                                cfg.threshold_or("cf_min_cells", 11.0), &table);
  out.tables.emplace_back("cf_table.csv", table);
  out.ensembles.emplace_back("ensemble", std::move(ens));
  return out;
}

ExperimentOutput run_v0_symmetry(const ExperimentConfig& cfg, int threads) {
  if (!cfg.grid || !cfg.initial_density)
    throw ConfigError("v0_symmetry requires grid and initial_density");
  ExperimentOutput out;
  const std::string id = "v0-symmetry";
  const double T = cfg.sample_times.back();

  ModelParams plus = cfg.model;
  ModelParams minus = cfg.model;
  minus.v0 = -minus.v0;

  // Spectral clause: evolve the same even initial profile under +v0 and -v0.
  const auto init = gaussian_field(*cfg.grid, cfg.initial_density->sigma,
                                   cfg.initial_density->center);
  DensityResult dp = density_from_modes(*cfg.grid, plus, T, init);
  DensityResult dm = density_from_modes(*cfg.grid, minus, T, init);
  double peak = 0.0, max_abs = 0.0;
  for (size_t k = 0; k < dp.values.size(); ++k) {
    peak = std::max(peak, dp.values[k]);
    max_abs = std::max(max_abs, std::abs(dp.values[k] - dm.values[k]));
  }
  {
    const double thr = cfg.threshold_or("pointwise_abs", 1e-9);
    ComparisonReport r =
        make_report(id, "spectral_pointwise_max_abs", max_abs, thr, max_abs <= thr);
    r.metadata = {{"peak", peak}, {"relative", peak > 0 ? max_abs / peak : 0.0},
                  {"t", T}};
    out.reports.push_back(std::move(r));
  }

  // What flipping v0 provably does to the density is reflect it through x0:
  // rho_{-v0}(x) = rho_{+v0}(2 x0 - x). On an origin-centered grid the mirror
  // of node i is n - i (the i = 0 plane has no mirror node and is skipped).
  if (norm_sq(cfg.model.x0) == 0.0 &&
      norm_sq(cfg.initial_density->center) == 0.0) {
    const int n = cfg.grid->n_per_axis;
    double refl = 0.0;
    for (int i1 = 1; i1 < n; ++i1)
      for (int i2 = 1; i2 < n; ++i2)
        for (int i3 = 1; i3 < n; ++i3)
          refl = std::max(refl,
                          std::abs(dm.values[cfg.grid->index(i1, i2, i3)] -
                                   dp.values[cfg.grid->index(n - i1, n - i2, n - i3)]));
    const double thr = cfg.threshold_or("pointwise_abs", 1e-9);
    out.reports.push_back(
        make_report(id, "reflection_identity_max_abs", refl, thr, refl <= thr));
  }

  // MC clause: L1 between +v0 and -v0 histograms, judged against a null floor
  // calibrated from same-v0 seed pairs.
  const double v_eq = equilibrium_speed_sq(cfg.model.coeffs);
  const double a_eff = cfg.model.coeffs.const_a();
  const double sig_par = std::sqrt(2.0 * (2.0 * v_eq / (3.0 * a_eff)) * T);
  const double half = 2.5 * sig_par;
  const Vec3 c0 = cfg.model.x0;
  BinningSpec bins{8, c0 - Vec3{half, half, half}, c0 + Vec3{half, half, half}};

  Ensemble ens_p = simulate_ensemble(plus, cfg.scheme, cfg.n_traj, cfg.sample_times,
                                     cfg.master_seed, threads);
  Ensemble ens_m = simulate_ensemble(minus, cfg.scheme, cfg.n_traj, cfg.sample_times,
                                     cfg.master_seed + 1, threads);
  const size_t ti = ens_p.time_index(T);
  const double l1_pm = hist_l1(histogram_probs(ens_p, ti, bins),
                               histogram_probs(ens_m, ti, bins));

  const int n_pairs = static_cast<int>(cfg.threshold_or("null_pairs", 4.0));
  std::vector<double> nulls;
  for (int k = 0; k < n_pairs; ++k) {
    Ensemble na = simulate_ensemble(plus, cfg.scheme, cfg.n_traj, cfg.sample_times,
                                    cfg.master_seed + 2 + 2 * k, threads);
    Ensemble nb = simulate_ensemble(plus, cfg.scheme, cfg.n_traj, cfg.sample_times,
                                    cfg.master_seed + 3 + 2 * k, threads);
    nulls.push_back(hist_l1(histogram_probs(na, ti, bins),
                            histogram_probs(nb, ti, bins)));
  }
  double null_mean = pairwise_sum(nulls) / nulls.size();
  double null_var = 0.0;
  for (double v : nulls) null_var += (v - null_mean) * (v - null_mean);
  null_var /= (nulls.size() - 1.0);
  const double floor = null_mean + 3.0 * std::sqrt(null_var);
  {
    ComparisonReport r =
        make_report(id, "mc_l1_below_null_floor", l1_pm, floor, l1_pm <= floor);
    r.metadata = {{"null_mean", null_mean},
                  {"null_sd", std::sqrt(null_var)},
                  {"n_pairs", static_cast<double>(n_pairs)},
                  {"t", T}};
    out.reports.push_back(std::move(r));
  }

  std::ostringstream tab;
  tab << "pair,l1\n";
  tab << "plus_vs_minus," << format_double(l1_pm) << '\n';
  for (size_t k = 0; k < nulls.size(); ++k)
    tab << "null_" << k << ',' << format_double(nulls[k]) << '\n';
  out.tables.emplace_back("symmetry_l1.csv", tab.str());
  out.densities.emplace_back("density_plus", std::move(dp));
  out.densities.emplace_back("density_minus", std::move(dm));
  out.ensembles.emplace_back("ensemble_plus", std::move(ens_p));
  out.ensembles.emplace_back("ensemble_minus", std::move(ens_m));
  return out;
}

ExperimentOutput run_diffusion_limit(const ExperimentConfig& cfg, int threads) {
  if (!cfg.regime || cfg.regime->regime != Regime::Diffusion)
    throw ConfigError("diffusion_limit requires a diffusion regime");
  ExperimentOutput out;
  const std::string id = "diffusion-limit";
  const double T = cfg.sample_times.back();
  const std::vector<double> eps_list =
      cfg.sweep_epsilons.empty() ? std::vector<double>{cfg.regime->epsilon}
                                 : cfg.sweep_epsilons;

  // The kernel's diffusivities are epsilon-independent under this scaling;
  // one fixed box keeps the L1 values comparable across the sweep.
  const double base_a = cfg.regime->base_a, base_b = cfg.regime->base_b;
  const double d_par = 2.0 * base_b * base_b / (3.0 * base_a * base_a);
  const double sig_par = std::sqrt(2.0 * d_par * T);
  const double half = 2.5 * sig_par;
  const Vec3 c0 = cfg.model.x0;
  BinningSpec bins{8, c0 - Vec3{half, half, half}, c0 + Vec3{half, half, half}};

  std::ostringstream tab;
  tab << "epsilon,dt,l1,chi2_z\n";
  std::vector<double> l1s;
  for (size_t k = 0; k < eps_list.size(); ++k) {
    RegimeParams rp = *cfg.regime;
    rp.epsilon = eps_list[k];
    ModelParams params = cfg.model;
    params.coeffs = rp.scaled_profile();
    const double dt_raw = std::min(cfg.scheme.dt, 0.1 * eps_list[k] / base_a);
    const auto n_steps = static_cast<long long>(std::ceil(T / dt_raw - 1e-9));
    IntegratorScheme scheme{cfg.scheme.kind, T / static_cast<double>(n_steps)};
    Ensemble ens = simulate_ensemble(params, scheme, cfg.n_traj, {0.0, T},
                                     cfg.master_seed + k, threads);
    const double v_eq = equilibrium_speed_sq(params.coeffs);
    const double a_eff = params.coeffs.const_a();
    const Vec3 v0 = cfg.model.v0;
    auto kernel = [&](Vec3 x) {
      return diffusion_kernel(T, x, c0, v0, v_eq, a_eff);
    };
    ComparisonReport r = density_l1_compare(ens, T, kernel, bins,
                                            cfg.threshold_or("density_l1", 1.0));
    r.experiment_id = id;
    r.metric = "l1_vs_kernel_eps" + std::to_string(k);
    r.metadata["epsilon"] = eps_list[k];
    r.metadata["dt"] = scheme.dt;
    tab << format_double(eps_list[k]) << ',' << format_double(scheme.dt) << ','
        << format_double(r.value) << ',' << format_double(r.metadata["chi2_z"])
        << '\n';
    l1s.push_back(r.value);
    out.reports.push_back(std::move(r));

    if (k + 1 == eps_list.size()) {
      for (auto& m : moment_report(ens, T))
        if (m.metric == "position_variance_ratio") {
          m.experiment_id = id;
          m.metadata["epsilon"] = eps_list[k];
          out.reports.push_back(std::move(m));
        }
    }
    out.ensembles.emplace_back("ensemble_eps" + std::to_string(k), std::move(ens));
  }

  double worst_rise = -1e300;
  for (size_t k = 0; k + 1 < l1s.size(); ++k)
    worst_rise = std::max(worst_rise, l1s[k + 1] - l1s[k]);
  if (l1s.size() > 1)
    out.reports.push_back(make_report(id, "l1_monotone_decrease_worst_rise",
                                      worst_rise, 0.0, worst_rise < 0.0));
  out.tables.emplace_back("l1_vs_epsilon.csv", tab.str());
  return out;
}

ExperimentOutput run_wave_limit(const ExperimentConfig& cfg, int threads) {
  if (!cfg.regime || cfg.regime->regime != Regime::Wave)
    throw ConfigError("wave_limit requires a wave regime");
  ExperimentOutput out;
  const std::string id = "wave-limit";
  const double T = cfg.sample_times.back();
  const std::vector<double> eps_list =
      cfg.sweep_epsilons.empty() ? std::vector<double>{cfg.regime->epsilon}
                                 : cfg.sweep_epsilons;
  const Vec3 target = cfg.model.x0 + T * cfg.model.v0;
  const double v0n = norm(cfg.model.v0);

  // 8 bins of width 1/8 with the translated point at a cell center, so the
  // concentrating mass is not split across a grid plane.
  const int nb = 8;
  const double half = cfg.threshold_or("wave_box_half", 0.5);
  const double w = 2.0 * half / nb;
  BinningSpec bins{nb, target - Vec3{half + 0.5 * w, half + 0.5 * w, half + 0.5 * w},
                   target + Vec3{half - 0.5 * w, half - 0.5 * w, half - 0.5 * w}};
  std::vector<double> point(static_cast<size_t>(nb) * nb * nb, 0.0);
  point[(static_cast<size_t>(nb / 2) * nb + nb / 2) * nb + nb / 2] = 1.0;

  std::ostringstream tab;
  tab << "epsilon,l1,mean_x1,mean_x2,mean_x3,sd_total\n";
  std::vector<double> l1s;
  for (size_t k = 0; k < eps_list.size(); ++k) {
    RegimeParams rp = *cfg.regime;
    rp.epsilon = eps_list[k];
    ModelParams params = cfg.model;
    params.coeffs = rp.scaled_profile();
    Ensemble ens = simulate_ensemble(params, cfg.scheme, cfg.n_traj,
                                     {0.0, T}, cfg.master_seed + k, threads);
    const size_t ti = ens.time_index(T);
    const Hist h = histogram_probs(ens, ti, bins);
    double l1 = std::abs(h.overflow);
    for (size_t c = 0; c < h.p.size(); ++c) l1 += std::abs(h.p[c] - point[c]);
    l1s.push_back(l1);

    const double nd = static_cast<double>(ens.n_traj);
    std::vector<double> cx(ens.n_traj), cy(ens.n_traj), cz(ens.n_traj);
    for (size_t j = 0; j < ens.n_traj; ++j) {
      const Vec3& x = ens.at(j, ti).x;
      cx[j] = x.x1;
      cy[j] = x.x2;
      cz[j] = x.x3;
    }
    const Vec3 mean{pairwise_sum(cx) / nd, pairwise_sum(cy) / nd,
                    pairwise_sum(cz) / nd};
    std::vector<double> d2(ens.n_traj);
    for (size_t j = 0; j < ens.n_traj; ++j)
      d2[j] = norm_sq(ens.at(j, ti).x - mean);
    const double tr_cov = pairwise_sum(d2) / (nd - 1.0);
    const double sd_total = std::sqrt(tr_cov);

    ComparisonReport rl = make_report(id, "l1_vs_translate_eps" + std::to_string(k),
                                      l1, cfg.threshold_or("density_l1", 2.0),
                                      l1 <= cfg.threshold_or("density_l1", 2.0));
    rl.metadata = {{"epsilon", eps_list[k]}, {"overflow", h.overflow}};
    out.reports.push_back(std::move(rl));

    if (k + 1 == eps_list.size()) {
      const double z = norm(mean - target) / std::sqrt(tr_cov / nd);
      ComparisonReport rm = make_report(id, "mean_position_z", z, 3.0, z <= 3.0);
      rm.metadata = {{"mean_x1", mean.x1},     {"mean_x2", mean.x2},
                     {"mean_x3", mean.x3},     {"target_x1", target.x1},
                     {"target_x2", target.x2}, {"target_x3", target.x3},
                     {"epsilon", eps_list[k]}};
      out.reports.push_back(std::move(rm));
      const double sd_thr = 0.15 * v0n * T;
      out.reports.push_back(
          make_report(id, "position_sd_total", sd_total, sd_thr, sd_total <= sd_thr));
      // Transport direction: displacement projected on v0, normalized by
      // |v0|^2 T; +1 means the density rode along +v0.
      const double sign_proj = dot(mean - cfg.model.x0, cfg.model.v0) /
                               (norm_sq(cfg.model.v0) * T);
      out.reports.push_back(make_report(id, "transport_direction_projection",
                                        sign_proj, 0.5, sign_proj > 0.5));
    }
    tab << format_double(eps_list[k]) << ',' << format_double(l1) << ','
        << format_double(mean.x1) << ',' << format_double(mean.x2) << ','
        << format_double(mean.x3) << ',' << format_double(sd_total) << '\n';
    out.ensembles.emplace_back("ensemble_eps" + std::to_string(k), std::move(ens));
  }

  double worst_rise = -1e300;
  for (size_t k = 0; k + 1 < l1s.size(); ++k)
    worst_rise = std::max(worst_rise, l1s[k + 1] - l1s[k]);
  if (l1s.size() > 1)
    out.reports.push_back(make_report(id, "l1_monotone_decrease_worst_rise",
                                      worst_rise, 0.0, worst_rise < 0.0));
  out.tables.emplace_back("l1_vs_epsilon.csv", tab.str());
  return out;
}

ExperimentOutput run_sweep_workflow(const ExperimentConfig& cfg, int threads) {
  if (!cfg.regime) throw ConfigError("sweep requires a regime");
  return cfg.regime->regime == Regime::Diffusion ? run_diffusion_limit(cfg, threads)
                                                 : run_wave_limit(cfg, threads);
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, int threads,
                                const std::string& ensemble_path,
                                const std::string& prediction_path) {
  if (cfg.experiment == "speed_relaxation") return run_speed_relaxation(cfg, threads);
  if (cfg.experiment == "cf_crosscheck") return run_cf_crosscheck(cfg, threads);
  if (cfg.experiment == "v0_symmetry") return run_v0_symmetry(cfg, threads);
  if (cfg.experiment == "diffusion_limit") return run_diffusion_limit(cfg, threads);
  if (cfg.experiment == "wave_limit") return run_wave_limit(cfg, threads);
  if (!cfg.sweep_epsilons.empty()) return run_sweep_workflow(cfg, threads);
  return run_compare_workflow(cfg, threads, ensemble_path, prediction_path);
}

double em_mean_speed_sq(double a, double b, double v0_sq, double dt,
                        long long steps) {
  const double g = 1.0 - a * dt;
  const double g2 = g * g;
  const double add = 2.0 * b * b * dt;
  double m = v0_sq;
  for (long long k = 0; k < steps; ++k) m = m * g2 + add;
  return m;
}

}

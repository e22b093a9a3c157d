#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovl/config.hpp"
#include "ovl/errors.hpp"
#include "ovl/experiments.hpp"
#include "ovl/io.hpp"
#include "ovl/version.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out_dir = ".";
  int threads = 1;
  uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config,
                  "config file path, or preset:<name> for a built-in preset")
      ->required();
  sub->add_option("--out", o.out_dir, "output directory (created if missing)");
  sub->add_option("--threads", o.threads, "worker threads for ensemble generation")
      ->check(CLI::Range(1, 256));
  sub->add_option("--seed", o.seed, "override the config's master seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
}

ovl::ExperimentConfig load(const CommonOpts& o) {
  constexpr const char* kPrefix = "preset:";
  ovl::ExperimentConfig cfg;
  if (o.config.rfind(kPrefix, 0) == 0) {
    cfg = ovl::preset_config(o.config.substr(std::string(kPrefix).size()));
  } else {
    try {
      cfg = ovl::load_config_file(o.config);
    } catch (const ovl::IoError& e) {
      // an unreadable config is the user's configuration problem, not a
      // failure of the run itself
      throw ovl::ConfigError(e.what());
    }
  }
  if (o.seed_set) cfg.master_seed = o.seed;
  return cfg;
}

// Writes every produced piece into out_dir and the manifest describing them.
// Returns 0 if all report rows passed, 1 otherwise.
int emit(const ovl::ExperimentConfig& cfg, const ovl::ExperimentOutput& result,
         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  auto path_of = [&](const std::string& name) { return out_dir + "/" + name; };

  for (const auto& [name, ens] : result.ensembles) {
    if (cfg.wants_format("csv")) {
      ovl::write_ensemble_csv(path_of(name + ".csv"), ens);
      files.push_back(path_of(name + ".csv"));
    }
    if (cfg.wants_format("binary")) {
      ovl::write_ensemble_binary(path_of(name + ".bin"), ens);
      files.push_back(path_of(name + ".bin"));
    }
  }
  for (const auto& [name, dens] : result.densities) {
    if (cfg.wants_format("csv")) {
      ovl::write_density_csv(path_of(name + ".csv"), dens);
      files.push_back(path_of(name + ".csv"));
    }
    if (cfg.wants_format("binary")) {
      ovl::write_density_binary(path_of(name + ".bin"), dens);
      files.push_back(path_of(name + ".bin"));
    }
  }
  for (const auto& [name, text] : result.tables) {
    ovl::write_text_file(path_of(name), text);
    files.push_back(path_of(name));
  }
  ovl::write_report_jsonl(path_of("report.jsonl"), result.reports);
  files.push_back(path_of("report.jsonl"));
  const std::string table = ovl::render_report_table(result.reports);
  ovl::write_text_file(path_of("report.txt"), table);
  files.push_back(path_of("report.txt"));
  ovl::write_manifest(path_of("manifest.json"), cfg, files);

  std::fputs(table.c_str(), stdout);
  std::printf("wrote %zu files to %s\n", files.size() + 1, out_dir.c_str());
  return result.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orthogonal-velocity Langevin toolkit"};
  app.set_version_flag("--version", std::string(ovl::tool_version));
  app.require_subcommand(1);

  CommonOpts sim_o, spec_o, cmp_o, sweep_o;
  std::string cmp_ensemble, cmp_prediction;

  CLI::App* sim = app.add_subcommand(
      "simulate", "generate an SDE ensemble and check the speed relaxation law");
  add_common(sim, sim_o);
  CLI::App* spec = app.add_subcommand(
      "spectral", "evolve a density by the mode equation and check conservation");
  add_common(spec, spec_o);
  CLI::App* cmp = app.add_subcommand(
      "compare", "cross-validate an ensemble against mode solutions or a prediction");
  add_common(cmp, cmp_o);
  cmp->add_option("--ensemble", cmp_ensemble,
                  "existing ensemble file instead of a fresh simulation");
  cmp->add_option("--prediction", cmp_prediction,
                  "density or ensemble file to compare against");
  CLI::App* sweep = app.add_subcommand(
      "sweep", "run the config's regime across its epsilon list");
  add_common(sweep, sweep_o);
  CLI::App* plist =
      app.add_subcommand("preset-list", "list built-in experiment presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are config errors
  }

  try {
    if (plist->parsed()) {
      for (const auto& name : ovl::preset_names()) std::printf("%s\n", name.c_str());
      return 0;
    }
    const CommonOpts& o = sim->parsed()    ? sim_o
                          : spec->parsed() ? spec_o
                          : cmp->parsed()  ? cmp_o
                                           : sweep_o;
    const ovl::ExperimentConfig cfg = load(o);
    ovl::ExperimentOutput result;
    if (!cfg.experiment.empty()) {
      result = ovl::run_experiment(cfg, o.threads, cmp_ensemble, cmp_prediction);
    } else if (sim->parsed()) {
      result = ovl::run_simulate_workflow(cfg, o.threads);
    } else if (spec->parsed()) {
      result = ovl::run_spectral_workflow(cfg, o.threads);
    } else if (cmp->parsed()) {
      result = ovl::run_compare_workflow(cfg, o.threads, cmp_ensemble, cmp_prediction);
    } else {
      result = ovl::run_sweep_workflow(cfg, o.threads);
    }
    return emit(cfg, result, o.out_dir);
  } catch (const ovl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ovl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

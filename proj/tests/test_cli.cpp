#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

// Runs the installed binary with `args`, captures combined output, returns the
// exit code (or -1 if the child did not exit normally).
int run_cli(const std::string& args, std::string* output = nullptr) {
  static int counter = 0;
  const fs::path cap = fs::temp_directory_path() /
                       ("ovl_cli_out_" + std::to_string(counter++) + ".txt");
  const std::string cmd =
      std::string(OVL_BIN_PATH) + " " + args + " > " + cap.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(cap);
    std::ostringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  fs::remove(cap);
  if (raw == -1 || !WIFEXITED(raw)) return -1;
  return WEXITSTATUS(raw);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "ovl_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tiny_sim_config(const std::string& v0 = "[2, 0, 0]") {
  return std::string(R"({
  "model": {"coefficients": {"kind": "constant", "a": 1.0, "b": 1.0}, "v0": )") +
         v0 + R"(},
  "scheme": {"kind": "speed_projected", "dt": 0.01},
  "n_traj": 200,
  "sample_times": [0, 0.5],
  "seeds": {"master": 7},
  "outputs": {"formats": ["csv", "binary"]}
})";
}

}  // namespace

TEST_CASE("version and preset listing") {
  std::string out;
  CHECK(run_cli("--version", &out) == 0);
  CHECK(out.find("0.1.0") != std::string::npos);

  CHECK(run_cli("preset-list", &out) == 0);
  for (const char* name : {"speed-relaxation", "cf-crosscheck", "diffusion-limit",
                           "wave-limit", "v0-symmetry"})
    CHECK(out.find(name) != std::string::npos);
}

TEST_CASE("simulate produces a complete, reproducible output directory") {
  const fs::path dir = fresh_dir("sim");
  const fs::path cfg = dir / "run.json";
  write_file(cfg, tiny_sim_config());

  const fs::path out1 = dir / "out1";
  std::string text;
  const int code =
      run_cli("simulate --config " + cfg.string() + " --out " + out1.string(), &text);
  INFO(text);
  CHECK(code == 0);
  for (const char* f : {"ensemble.csv", "ensemble.bin", "speed_curve.csv",
                        "report.jsonl", "report.txt", "manifest.json"})
    CHECK(fs::exists(out1 / f));
  CHECK(text.find("speed_curve_max_rel_err") != std::string::npos);
  CHECK(text.find("pass") != std::string::npos);

  SUBCASE("a second run is byte-identical") {
    const fs::path out2 = dir / "out2";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out2.string()) == 0);
    for (const char* f : {"ensemble.bin", "ensemble.csv", "speed_curve.csv",
                          "report.jsonl", "manifest.json"})
      CHECK(slurp(out1 / f) == slurp(out2 / f));
  }

  SUBCASE("thread count does not change the bytes") {
    const fs::path out4 = dir / "out4";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --threads 4 --out " +
                    out4.string()) == 0);
    CHECK(slurp(out1 / "ensemble.bin") == slurp(out4 / "ensemble.bin"));
    CHECK(slurp(out1 / "manifest.json") == slurp(out4 / "manifest.json"));
  }

  SUBCASE("overriding the seed changes the ensemble") {
    const fs::path out3 = dir / "out3";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --seed 8 --out " +
                    out3.string()) == 0);
    CHECK(slurp(out1 / "ensemble.bin") != slurp(out3 / "ensemble.bin"));
  }
}

TEST_CASE("compare judges ensembles against predictions") {
  const fs::path dir = fresh_dir("cmp");
  const fs::path cfg = dir / "run.json";
  write_file(cfg, tiny_sim_config());
  const fs::path out1 = dir / "gen";
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + out1.string()) == 0);
  const std::string ens = (out1 / "ensemble.bin").string();

  SUBCASE("an ensemble matches itself") {
    std::string text;
    const int code = run_cli("compare --config " + cfg.string() + " --ensemble " +
                                 ens + " --prediction " + ens + " --out " +
                                 (dir / "self").string(),
                             &text);
    INFO(text);
    CHECK(code == 0);
    CHECK(text.find("two_sample_l1") != std::string::npos);
  }

  SUBCASE("ensembles with different launch directions disagree") {
    const fs::path cfg2 = dir / "run2.json";
    write_file(cfg2, tiny_sim_config("[0, 0, 2]"));
    const fs::path out2 = dir / "gen2";
    REQUIRE(run_cli("simulate --config " + cfg2.string() + " --out " +
                    out2.string()) == 0);
    std::string text;
    const int code = run_cli("compare --config " + cfg.string() + " --ensemble " +
                                 ens + " --prediction " +
                                 (out2 / "ensemble.bin").string() + " --out " +
                                 (dir / "cross").string(),
                             &text);
    INFO(text);
    CHECK(code == 1);
    CHECK(text.find("FAIL") != std::string::npos);
  }

  SUBCASE("compare with nothing to compare is a config error") {
    std::string text;
    const int code = run_cli("compare --config " + cfg.string() + " --out " +
                                 (dir / "none").string(),
                             &text);
    CHECK(code == 2);
    CHECK(text.find("nothing to compare") != std::string::npos);
  }
}

TEST_CASE("config and input problems map to distinct exit codes") {
  const fs::path dir = fresh_dir("errs");

  SUBCASE("missing config file") {
    std::string text;
    CHECK(run_cli("simulate --config " + (dir / "nope.json").string(), &text) == 2);
    CHECK(text.find("config error") != std::string::npos);
  }

  SUBCASE("malformed JSON") {
    const fs::path cfg = dir / "bad.json";
    write_file(cfg, "{\n  \"model\": oops\n}");
    std::string text;
    CHECK(run_cli("simulate --config " + cfg.string(), &text) == 2);
    CHECK(text.find("line 2") != std::string::npos);
  }

  SUBCASE("unknown preset") {
    CHECK(run_cli("simulate --config preset:warp-drive") == 2);
  }

  SUBCASE("missing required option") {
    CHECK(run_cli("simulate") == 2);
  }

  SUBCASE("thread count outside the accepted range") {
    const fs::path cfg = dir / "ok.json";
    write_file(cfg, tiny_sim_config());
    CHECK(run_cli("simulate --config " + cfg.string() + " --threads 0") == 2);
  }

  SUBCASE("corrupt ensemble input") {
    const fs::path cfg = dir / "ok2.json";
    write_file(cfg, tiny_sim_config());
    const fs::path junk = dir / "junk.bin";
    write_file(junk, "this is not an ensemble");
    std::string text;
    const int code = run_cli("compare --config " + cfg.string() + " --ensemble " +
                                 junk.string() + " --prediction " + junk.string(),
                             &text);
    CHECK(code == 3);
    CHECK(text.find("error") != std::string::npos);
  }

  SUBCASE("truncated binary ensemble") {
    const fs::path cfg = dir / "ok3.json";
    write_file(cfg, tiny_sim_config());
    const fs::path gen = dir / "gen";
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + gen.string()) ==
            0);
    const std::string whole = slurp(gen / "ensemble.bin");
    const fs::path cut = dir / "cut.bin";
    write_file(cut, whole.substr(0, whole.size() / 2));
    CHECK(run_cli("compare --config " + cfg.string() + " --ensemble " + cut.string() +
                  " --prediction " + cut.string()) == 3);
  }
}

#include "doctest.h"

#include "capstruct/csv.hpp"
#include "capstruct/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace capstruct;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("capstruct_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> bundle(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

/// Simulated inputs in `dir`, returning a config that reads them.
RunConfig simulated_inputs(const fs::path& dir, int firms = 40, int years = 8) {
  RunConfig sim;
  sim.out = (dir / "sim").string();
  sim.sim.n_firms = firms;
  sim.sim.t_max = years;
  REQUIRE(run_simulate(sim).ok);
  RunConfig c;
  c.input = (dir / "sim" / "firm_year.csv").string();
  c.macro = (dir / "sim" / "macro.csv").string();
  c.tax = (dir / "sim" / "tax.csv").string();
  c.bootstrap = 4;
  return c;
}

}  // namespace

TEST_CASE("config parsing, defaults and echo round trip") {
  RunConfig c;
  std::istringstream in(
      "# comment\n"
      "\n"
      "input = panel.csv\n"
      "thetas = 0.25, 0.5\n"
      "leverage = market\n"
      "bootstrap = 0\n"
      "seed = 42\n"
      "format = delimited\n"
      "sim.delta_recession = 0.3\n");
  apply_config(c, in, "test");
  CHECK(c.input == "panel.csv");
  CHECK(c.thetas == std::vector<double>{0.25, 0.5});
  CHECK(c.leverage == std::vector<LeverageKind>{LeverageKind::Market});
  CHECK(c.bootstrap == 0);
  CHECK(c.seed == 42);
  CHECK_FALSE(c.text);
  CHECK(c.delimited);
  CHECK(c.sim.delta_recession == 0.3);
  CHECK(c.tax_rate == 0.21);
  CHECK(c.winsorize == false);

  RunConfig d;
  std::istringstream echo(c.render());
  apply_config(d, echo, "echo");
  CHECK(d.render() == c.render());
}

TEST_CASE("config errors name the key and line") {
  RunConfig c;
  std::istringstream unknown("seed = 1\nspeeed = 2\n");
  try {
    apply_config(c, unknown, "cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("speeed") != std::string::npos);
  }
  CHECK_THROWS_AS(c.set("bootstrap", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("thetas", "0.5,1.0"), ConfigError);
  CHECK_THROWS_AS(c.set("leverage", "both-ish"), ConfigError);
  CHECK_THROWS_AS(c.set("seed", "x"), ConfigError);
  std::istringstream no_eq("seed 1\n");
  CHECK_THROWS_AS(apply_config(c, no_eq, "cfg"), ConfigError);
}

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("replicate writes the bundle in order and reruns byte-identically") {
  const fs::path dir = scratch("replicate");
  RunConfig c = simulated_inputs(dir);
  c.out = (dir / "out").string();
  const RunResult a = run_pipeline(c, all_stages(), "replicate");
  REQUIRE(a.ok);
  const std::vector<std::string> expected{
      "00_config.txt",         "01_validation.txt",   "01_validation.csv", "02_yearly_means.txt",
      "02_yearly_means.csv",   "03_correlation.txt",  "03_correlation.csv", "04_hausman.txt",
      "04_hausman.csv",        "05_qreg_book.txt",    "05_qreg_book.csv",  "06_qreg_market.txt",
      "06_qreg_market.csv",    "07_speed.txt",        "07_speed.csv",      "08_speed_by_regime.txt",
      "08_speed_by_regime.csv", "manifest.txt"};
  CHECK(a.files == expected);
  const auto first = bundle(c.out);

  RunOptions threaded;
  threaded.threads = 3;
  const RunResult b = run_pipeline(c, all_stages(), "replicate", threaded);
  REQUIRE(b.ok);
  CHECK(bundle(c.out) == first);

  const std::string manifest = first.at("manifest.txt");
  CHECK(manifest.find("status: complete") != std::string::npos);
  CHECK(manifest.find("config_sha256: " + sha256_hex(first.at("00_config.txt"))) != std::string::npos);
  CHECK(manifest.find(sha256_hex(first.at("07_speed.csv")) + "  07_speed.csv") != std::string::npos);
  CHECK(manifest.find("bootstrap book theta=0.15") != std::string::npos);
}

TEST_CASE("each subcommand reproduces its slice of the replicate bundle") {
  const fs::path dir = scratch("slices");
  RunConfig c = simulated_inputs(dir);
  c.out = (dir / "out").string();
  REQUIRE(run_pipeline(c, all_stages(), "replicate").ok);
  const auto full = bundle(c.out);
  fs::remove_all(c.out);
  for (Stage s : all_stages()) {
    const RunResult r = run_pipeline(c, {s}, std::string(stage_name(s)));
    REQUIRE(r.ok);
    const auto part = bundle(c.out);
    for (const auto& [name, content] : part) {
      if (name == "manifest.txt") continue;
      CHECK_MESSAGE(full.at(name) == content, name);
    }
    fs::remove_all(c.out);
  }
}

TEST_CASE("empty input fails at ingest with no estimation outputs") {
  const fs::path dir = scratch("empty");
  std::ofstream(dir / "empty.csv").close();
  RunConfig c;
  c.input = (dir / "empty.csv").string();
  c.macro = (dir / "missing_macro.csv").string();
  c.out = (dir / "out").string();
  const RunResult r = run_pipeline(c, all_stages(), "replicate");
  CHECK_FALSE(r.ok);
  CHECK(r.failed_stage == "ingest");
  const auto b = bundle(c.out);
  CHECK(b.count("INCOMPLETE") == 1);
  CHECK(b.count("manifest.txt") == 1);
  for (const auto& [name, _] : b)
    CHECK((name == "00_config.txt" || name == "INCOMPLETE" || name == "manifest.txt"));
  CHECK(b.at("manifest.txt").find("status: INCOMPLETE") != std::string::npos);
}

TEST_CASE("a later stage failure keeps earlier outputs and names the stage") {
  const fs::path dir = scratch("late");
  RunConfig c = simulated_inputs(dir, 12, 6);
  c.out = (dir / "out").string();
  c.max_groups = 5;  // dummy-mode quantile effects refuse twelve firms
  const RunResult r = run_pipeline(c, all_stages(), "replicate");
  CHECK_FALSE(r.ok);
  CHECK(r.failed_stage == "qreg");
  const auto b = bundle(c.out);
  CHECK(b.count("04_hausman.txt") == 1);
  CHECK(b.count("05_qreg_book.txt") == 0);
  CHECK(b.at("INCOMPLETE").find("qreg") != std::string::npos);
}

TEST_CASE("a constant tax rate is used with a warning") {
  const fs::path dir = scratch("tax");
  RunConfig c = simulated_inputs(dir);
  c.tax.clear();
  c.out = (dir / "out").string();
  const RunResult r = run_pipeline(c, {Stage::Ingest}, "ingest");
  REQUIRE(r.ok);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("constant rate") != std::string::npos);
  CHECK(slurp(dir / "out" / "manifest.txt").find("warnings:") != std::string::npos);
}

TEST_CASE("a rerun after a failure clears the incomplete marker") {
  const fs::path dir = scratch("recover");
  RunConfig c = simulated_inputs(dir);
  c.out = (dir / "out").string();
  const std::string input = c.input;
  c.input = (dir / "nope.csv").string();
  CHECK_FALSE(run_pipeline(c, {Stage::Ingest}, "ingest").ok);
  CHECK(fs::exists(dir / "out" / "INCOMPLETE"));
  c.input = input;
  CHECK(run_pipeline(c, {Stage::Ingest}, "ingest").ok);
  CHECK_FALSE(fs::exists(dir / "out" / "INCOMPLETE"));
}

TEST_CASE("simulate with replications writes a recovery report") {
  const fs::path dir = scratch("simrec");
  RunConfig c;
  c.out = (dir / "sim").string();
  c.sim.n_firms = 30;
  c.sim.t_max = 6;
  c.sim_replications = 2;
  c.thetas = {0.5};
  const RunResult r = run_simulate(c);
  REQUIRE(r.ok);
  CHECK(fs::exists(dir / "sim" / "recovery.txt"));
  CHECK(fs::exists(dir / "sim" / "ground_truth.json"));
}

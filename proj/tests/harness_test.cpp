#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mlpath/harness.hpp"

using namespace mlpath;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("mlpath_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json evaluate_config() {
  return json::parse(R"({
    "kind": "evaluate",
    "model": {"preset": "ou", "theta": 1.0},
    "grid": {"horizon": 1.0, "intervals": 4000},
    "eps": 0.5,
    "path": {"shape": "linear", "slope": 1.0}
  })");
}

}  // namespace

TEST_CASE("config validation errors carry field paths") {
  auto good = evaluate_config();

  auto bad_eps = good;
  bad_eps["eps"] = -0.5;
  try {
    parse_config(bad_eps);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "eps");
  }

  auto unknown = good;
  unknown["mystery_knob"] = 3;
  try {
    parse_config(unknown);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "mystery_knob");
  }

  auto nested_unknown = good;
  nested_unknown["model"]["gamma"] = 1;
  try {
    parse_config(nested_unknown);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "model.gamma");
  }

  auto bad_kind = good;
  bad_kind["kind"] = "interpolate";
  CHECK_THROWS_AS(parse_config(bad_kind), ConfigError);

  // Small-ball grids are capped at 8 intervals.
  auto ball = json::parse(R"({
    "kind": "mc_smallball",
    "model": {"preset": "zero"},
    "grid": {"horizon": 1.0, "intervals": 9},
    "eps": 1.0,
    "z1": {"shape": "linear", "slope": 1.0},
    "z2": {"shape": "zero"},
    "mc": {"count": 1000, "seed": 1}
  })");
  try {
    parse_config(ball);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "grid.intervals");
  }

  // theta is an ou-only knob.
  auto theta = good;
  theta["model"] = json::parse(R"({"preset": "zero", "theta": 2.0})");
  try {
    parse_config(theta);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "model.theta");
  }
}

TEST_CASE("config round-trip through the canonical echo") {
  for (const char* text : {
           R"({"kind":"evaluate","model":{"preset":"double_well"},
               "grid":{"horizon":2.0,"intervals":100},"eps":0.3,
               "path":{"shape":"values","values":[0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1,0.5,0,
                                                  0.5,1,0.5,0,0.5,1,0.5,0,0.5,1]}})",
           R"({"kind":"eps_sweep","model":{"preset":"ou","theta":1.0},
               "grid":{"horizon":1.0,"intervals":64},"eps_list":[1.0,0.5],
               "pin_end":1.0})",
           R"({"kind":"mc_ldp","model":{"preset":"zero"},
               "grid":{"horizon":1.0,"intervals":8},
               "event":{"type":"terminal","level":1.0},
               "eps_list":[1.0,0.5],"mc":{"count":100,"seed":7}})",
           R"({"kind":"algebraic","weights":{"preset":"harmonic","n":50},
               "map":{"preset":"linear","kappa":0.5},"phi":{"preset":"ones"},
               "solve":{"eps":0.5,"seed":3}})",
       }) {
    const json original = json::parse(text);
    const ExperimentConfig cfg = parse_config(original);
    const json echo = canonical_config(cfg);
    const ExperimentConfig cfg2 = parse_config(echo);
    CHECK(canonical_config(cfg2) == echo);
  }
}

TEST_CASE("evaluate experiment reproduces the closed forms") {
  auto dir = fresh_dir("evaluate");
  auto out = run_experiment(parse_config(evaluate_config()), dir.string());
  const json& res = out.record["results"];
  CHECK(res["om"]["value"].get<double>() == doctest::Approx(25.0 / 6.0).epsilon(1e-6));
  CHECK(res["fw"]["value"].get<double>() == doctest::Approx(7.0 / 6.0).epsilon(1e-6));
  CHECK(res["gap"].get<double>() == doctest::Approx(-0.125).epsilon(1e-9));
  CHECK(res["om_correction"].get<double>() == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fs::exists(dir / "evaluate.csv"));
  CHECK(fs::exists(dir / "record.json"));
  CHECK(out.record["config"] == canonical_config(parse_config(evaluate_config())));
}

TEST_CASE("eps_sweep experiment: argmin-invariance column") {
  auto cfg = parse_config(json::parse(R"({
    "kind": "eps_sweep",
    "model": {"preset": "ou", "theta": 1.0},
    "grid": {"horizon": 1.0, "intervals": 200},
    "eps_list": [1.0, 0.5, 0.25],
    "pin_end": 1.0
  })"));
  auto dir = fresh_dir("sweep");
  auto out = run_experiment(cfg, dir.string());
  for (const auto& e : out.record["results"]["entries"])
    CHECK(e["dist_to_fw_mode"].get<double>() <= 1e-8);

  const std::string csv = slurp(dir / "eps_sweep.csv");
  CHECK(csv.rfind("eps,om_value,grad_norm,iterations,dist_to_fw_mode\n", 0) == 0);

  // Determinism: identical config, identical CSV bytes; records differ only
  // in the wall clock.
  auto dir2 = fresh_dir("sweep2");
  auto out2 = run_experiment(cfg, dir2.string());
  CHECK(slurp(dir / "eps_sweep.csv") == slurp(dir2 / "eps_sweep.csv"));
  json a = out.record, b = out2.record;
  a.erase("wall_clock_seconds");
  b.erase("wall_clock_seconds");
  CHECK(a == b);
}

TEST_CASE("minimize experiment with multistart") {
  auto cfg = parse_config(json::parse(R"({
    "kind": "minimize",
    "model": {"preset": "double_well"},
    "grid": {"horizon": 5.0, "intervals": 200},
    "objective": "fw",
    "pin_start": -1.0,
    "pin_end": 1.0,
    "multistart": true
  })"));
  auto dir = fresh_dir("minimize");
  auto out = run_experiment(cfg, dir.string());
  const json& res = out.record["results"];
  REQUIRE(res["minima"].size() >= 1);
  CHECK(res["minima"][0]["converged"].get<bool>());
  CHECK(res["el_residual"].get<double>() <= 1e-7);
  CHECK(fs::exists(dir / "mode.csv"));
}

TEST_CASE("mc_ldp experiment") {
  auto cfg = parse_config(json::parse(R"({
    "kind": "mc_ldp",
    "model": {"preset": "zero"},
    "grid": {"horizon": 1.0, "intervals": 8},
    "event": {"type": "terminal", "level": 1.0},
    "eps_list": [1.0, 0.7, 0.5],
    "mc": {"count": 50000, "seed": 5}
  })"));
  auto dir = fresh_dir("ldp");
  auto out = run_experiment(cfg, dir.string());
  const json& res = out.record["results"];
  CHECK(res["fw_infimum"].get<double>() == doctest::Approx(0.5).epsilon(1e-3));
  for (const auto& e : res["entries"]) CHECK(e["defined"].get<bool>());
  CHECK(out.record["seed"].get<std::uint64_t>() == 5);
}

TEST_CASE("mc_smallball experiment and gamma experiment") {
  auto ball = parse_config(json::parse(R"({
    "kind": "mc_smallball",
    "model": {"preset": "zero"},
    "grid": {"horizon": 1.0, "intervals": 1},
    "eps": 1.0,
    "z1": {"shape": "linear", "slope": 1.0},
    "z2": {"shape": "zero"},
    "mc": {"count": 50000, "seed": 11}
  })"));
  auto dir = fresh_dir("ball");
  auto out = run_experiment(ball, dir.string());
  CHECK(out.record["results"]["estimates"].size() == 4);  // default ladder
  CHECK(out.record["results"]["om_log_ratio_prediction"].get<double>() ==
        doctest::Approx(-0.5).epsilon(1e-9));

  auto gamma = parse_config(json::parse(R"({
    "kind": "gamma",
    "model": {"preset": "ou", "theta": 1.0},
    "grid": {"horizon": 1.0, "intervals": 100},
    "eps_list": [0.01, 0.001, 0.0001],
    "radii": [0.1, 0.01],
    "probes": 32,
    "pin_end": 1.0
  })"));
  auto gdir = fresh_dir("gamma");
  auto gout = run_experiment(gamma, gdir.string());
  CHECK(gout.record["results"]["recovery_gap"].get<double>() <= 1e-7);
  CHECK(fs::exists(gdir / "gamma.csv"));
}

TEST_CASE("algebraic experiment") {
  auto cfg = parse_config(json::parse(R"({
    "kind": "algebraic",
    "weights": {"preset": "harmonic", "n": 1000},
    "map": {"preset": "zero"},
    "phi": {"preset": "ones"},
    "solve": {"eps": 0.5, "seed": 3}
  })"));
  auto dir = fresh_dir("algebraic");
  auto out = run_experiment(cfg, dir.string());
  long double ref = 0.0L;
  for (std::size_t i = 1000; i-- > 0;) {
    const long double ai = 1.0L / static_cast<long double>(i + 1);
    ref += 0.5L * ai * ai;
  }
  CHECK(out.record["results"]["fw_value"].get<double>() ==
        doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
  CHECK(out.record["results"]["solve_all_converged"].get<bool>());
  CHECK(out.record["results"]["solve_max_residual"].get<double>() <= 1e-12);
}

TEST_CASE("plotdata emission") {
  auto cfg = parse_config(json::parse(R"({
    "kind": "eps_sweep",
    "model": {"preset": "zero"},
    "grid": {"horizon": 1.0, "intervals": 32},
    "eps_list": [1.0, 0.5],
    "pin_end": 1.0
  })"));
  auto dir = fresh_dir("plot");
  auto out = run_experiment(cfg, dir.string());
  CHECK(emit_plotdata(out.record, dir.string()) == PlotdataStatus::written);
  const std::string csv = slurp(dir / "plotdata.csv");
  CHECK(csv.rfind("series,x,y,y_err\n", 0) == 0);
  CHECK(csv.find("dist_to_fw_mode") != std::string::npos);
  CHECK(csv.find("eps2_om_at_mode") != std::string::npos);

  // Non-plottable kinds are a notice, not an error.
  auto edir = fresh_dir("plot_eval");
  auto eout = run_experiment(parse_config(evaluate_config()), edir.string());
  CHECK(emit_plotdata(eout.record, edir.string()) == PlotdataStatus::not_plottable);

  CHECK_THROWS_AS(emit_plotdata(json::object(), dir.string()), ConfigError);
}

#ifdef MLPATH_CLI_BINARY
TEST_CASE("cli exit codes") {
  auto dir = fresh_dir("cli");
  const std::string bin = MLPATH_CLI_BINARY;

  // Valid run: exit 0 and files appear.
  {
    std::ofstream cfg(dir / "config.json");
    cfg << evaluate_config().dump();
  }
  std::string cmd = bin + " run " + (dir / "config.json").string() + " --out " +
                    (dir / "out").string() + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 0);
  CHECK(fs::exists(dir / "out" / "record.json"));

  // plotdata on the produced record: evaluate is not plottable but exits 0.
  cmd = bin + " plotdata " + (dir / "out" / "record.json").string() + " --out " +
        (dir / "out").string() + " > /dev/null 2>&1";
  rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 0);

  // Invalid config: exit 2 with a machine-readable error record on stderr.
  {
    std::ofstream cfg(dir / "bad.json");
    auto j = evaluate_config();
    j["eps"] = -1.0;
    cfg << j.dump();
  }
  cmd = bin + " run " + (dir / "bad.json").string() + " --out " + (dir / "out2").string() +
        " 2> " + (dir / "err.json").string() + " > /dev/null";
  rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
  const json err = json::parse(slurp(dir / "err.json"));
  CHECK(err["error"]["exit_code"].get<int>() == 2);
  CHECK(err["error"]["field"].get<std::string>() == "eps");

  // Missing file: exit 2.
  cmd = bin + " run " + (dir / "nope.json").string() + " > /dev/null 2>&1";
  rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}
#endif

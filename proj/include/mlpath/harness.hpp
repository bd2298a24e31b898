#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlpath/mc.hpp"
#include "mlpath/measure.hpp"
#include "mlpath/models.hpp"
#include "mlpath/tilt.hpp"
#include "mlpath/variational.hpp"
#include "mlpath/version.hpp"

namespace mlpath {

using json = nlohmann::ordered_json;

// Configuration failure with the offending field path; the CLI maps this to
// exit code 2 and a machine-readable error record.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string f, const std::string& message)
      : std::runtime_error(f + ": " + message), field(std::move(f)) {}
};

namespace detail {

// Strict object reader: every key must be consumed, unknown keys are errors.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) throw ConfigError(at(key), "missing required field");
    return *it;
  }

  double number(const std::string& key, double lo, double hi) {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError(at(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi)
      throw ConfigError(at(key), "out of range [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "]");
    return x;
  }

  double number_or(const std::string& key, double fallback, double lo, double hi) {
    return has(key) ? number(key, lo, hi) : fallback;
  }

  std::int64_t integer(const std::string& key, std::int64_t lo, std::int64_t hi) {
    const json& v = get(key);
    if (!v.is_number_integer()) throw ConfigError(at(key), "expected an integer");
    const std::int64_t x = v.get<std::int64_t>();
    if (x < lo || x > hi)
      throw ConfigError(at(key), "out of range [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "]");
    return x;
  }

  std::int64_t integer_or(const std::string& key, std::int64_t fallback, std::int64_t lo,
                          std::int64_t hi) {
    return has(key) ? integer(key, lo, hi) : fallback;
  }

  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) throw ConfigError(at(key), "expected a boolean");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::set<std::string>& allowed = {}) {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(at(key), "expected a string");
    const std::string s = v.get<std::string>();
    if (!allowed.empty() && allowed.find(s) == allowed.end()) {
      std::string opts;
      for (const auto& o : allowed) opts += (opts.empty() ? "" : ", ") + o;
      throw ConfigError(at(key), "must be one of {" + opts + "}");
    }
    return s;
  }

  std::vector<double> number_list(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array() || v.empty()) throw ConfigError(at(key), "expected a nonempty array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(at(key), "expected numbers");
      const double x = e.get<double>();
      if (!std::isfinite(x)) throw ConfigError(at(key), "non-finite entry");
      out.push_back(x);
    }
    return out;
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (seen_.find(item.key()) == seen_.end())
        throw ConfigError(at(item.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string fmt(double x) { return format_double(x); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Config model. One struct covers all experiment kinds; parsing only accepts
// the fields the requested kind defines, and the canonical echo emits exactly
// those fields with defaults filled in.
// ---------------------------------------------------------------------------

struct ModelConfig {
  std::string preset = "zero";
  double theta = 1.0;
};

struct GridConfig {
  double horizon = 1.0;
  int intervals = 100;
};

struct PathSpecConfig {
  std::string shape = "zero";  // zero | linear | values
  double slope = 1.0;
  std::vector<double> values;
};

struct McParams {
  std::int64_t count = 10000;
  std::uint64_t seed = 1;
  std::vector<double> delta_ladder;  // empty = default ladder
};

struct EventConfig {
  std::string type = "terminal";  // terminal | sup | whole_space
  double level = 1.0;
};

struct WeightsConfig {
  std::string preset = "harmonic";  // harmonic | values
  std::int64_t n = 100;
  std::vector<double> values;
};

struct MapConfig {
  std::string preset = "zero";  // zero | linear | tanh09
  double kappa = 0.5;
};

struct PhiConfig {
  std::string preset = "ones";  // ones | values
  std::vector<double> values;
};

struct SolveConfig {
  double eps = 1.0;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  std::string kind;
  ModelConfig model;
  GridConfig grid;
  double eps = 1.0;
  std::vector<double> eps_list;
  double pin_start = 0.0;
  std::optional<double> pin_end;
  double tol = 1e-8;
  std::int64_t max_iter = 100000;
  std::string objective = "fw";
  bool multistart = false;
  PathSpecConfig path;
  PathSpecConfig path2;
  McParams mc;
  EventConfig event;
  std::vector<double> radii;
  int probes = 256;
  WeightsConfig weights;
  MapConfig map;
  PhiConfig phi;
  std::optional<SolveConfig> solve;
};

namespace detail {

inline ModelConfig parse_model(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  ModelConfig m;
  m.preset = r.text("preset", {"zero", "ou", "double_well"});
  if (m.preset == "ou")
    m.theta = r.number_or("theta", 1.0, -1e3, 1e3);
  else if (r.has("theta"))
    throw ConfigError(path + ".theta", "only valid for the ou preset");
  r.finish();
  return m;
}

inline GridConfig parse_grid(const json& j, const std::string& path, int max_intervals) {
  ObjectReader r(j, path);
  GridConfig g;
  g.horizon = r.number("horizon", 1e-9, 1e6);
  g.intervals = static_cast<int>(r.integer("intervals", 1, max_intervals));
  r.finish();
  return g;
}

inline PathSpecConfig parse_path_spec(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  PathSpecConfig p;
  p.shape = r.text("shape", {"zero", "linear", "values"});
  if (p.shape == "linear")
    p.slope = r.number("slope", -1e6, 1e6);
  else if (r.has("slope"))
    throw ConfigError(path + ".slope", "only valid for the linear shape");
  if (p.shape == "values")
    p.values = r.number_list("values");
  else if (r.has("values"))
    throw ConfigError(path + ".values", "only valid for the values shape");
  r.finish();
  return p;
}

inline McParams parse_mc(const json& j, const std::string& path, bool with_ladder) {
  ObjectReader r(j, path);
  McParams m;
  m.count = r.integer("count", 1, 1000000000);
  m.seed = static_cast<std::uint64_t>(r.integer("seed", 0, 4611686018427387903LL));
  if (with_ladder && r.has("delta_ladder")) {
    m.delta_ladder = r.number_list("delta_ladder");
    double prev = kInf;
    for (double d : m.delta_ladder) {
      if (!(d > 0.0) || !(d < prev))
        throw ConfigError(path + ".delta_ladder",
                          "must be strictly decreasing and positive");
      prev = d;
    }
  } else if (!with_ladder && r.has("delta_ladder")) {
    throw ConfigError(path + ".delta_ladder", "unknown key");
  }
  r.finish();
  return m;
}

inline std::vector<double> parse_eps_list(ObjectReader& r, const std::string& field) {
  std::vector<double> eps = r.number_list(field);
  double prev = kInf;
  for (double e : eps) {
    if (!(e > 0.0) || !(e < prev))
      throw ConfigError(r.at(field), "must be strictly decreasing and positive");
    prev = e;
  }
  return eps;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  detail::ObjectReader r(j, "");
  ExperimentConfig cfg;
  cfg.kind = r.text("kind", {"evaluate", "minimize", "eps_sweep", "gamma", "mc_smallball",
                             "mc_ldp", "algebraic"});

  if (cfg.kind == "evaluate") {
    cfg.model = detail::parse_model(r.get("model"), "model");
    cfg.grid = detail::parse_grid(r.get("grid"), "grid", 1000000);
    cfg.eps = r.number("eps", 1e-9, 1e3);
    cfg.path = detail::parse_path_spec(r.get("path"), "path");
  } else if (cfg.kind == "minimize") {
    cfg.model = detail::parse_model(r.get("model"), "model");
    cfg.grid = detail::parse_grid(r.get("grid"), "grid", 1000000);
    cfg.objective = r.text("objective", {"fw", "om"});
    if (cfg.objective == "om")
      cfg.eps = r.number("eps", 1e-9, 1e3);
    else if (r.has("eps"))
      throw ConfigError("eps", "only valid for the om objective");
    cfg.pin_start = r.number_or("pin_start", 0.0, -1e6, 1e6);
    if (r.has("pin_end")) cfg.pin_end = r.number("pin_end", -1e6, 1e6);
    cfg.tol = r.number_or("tol", 1e-8, 1e-15, 1.0);
    cfg.max_iter = r.integer_or("max_iter", 100000, 1, 1000000000);
    cfg.multistart = r.boolean_or("multistart", false);
  } else if (cfg.kind == "eps_sweep") {
    cfg.model = detail::parse_model(r.get("model"), "model");
    cfg.grid = detail::parse_grid(r.get("grid"), "grid", 1000000);
    cfg.eps_list = detail::parse_eps_list(r, "eps_list");
    cfg.pin_start = r.number_or("pin_start", 0.0, -1e6, 1e6);
    if (r.has("pin_end")) cfg.pin_end = r.number("pin_end", -1e6, 1e6);
    cfg.tol = r.number_or("tol", 1e-8, 1e-15, 1.0);
    cfg.max_iter = r.integer_or("max_iter", 100000, 1, 1000000000);
  } else if (cfg.kind == "gamma") {
    cfg.model = detail::parse_model(r.get("model"), "model");
    cfg.grid = detail::parse_grid(r.get("grid"), "grid", 100000);
    cfg.eps_list = detail::parse_eps_list(r, "eps_list");
    cfg.radii = r.number_list("radii");
    double prev = kInf;
    for (double x : cfg.radii) {
      if (!(x > 0.0) || !(x < prev))
        throw ConfigError("radii", "must be strictly decreasing and positive");
      prev = x;
    }
    cfg.probes = static_cast<int>(r.integer_or("probes", 256, 1, 100000));
    cfg.pin_start = r.number_or("pin_start", 0.0, -1e6, 1e6);
    if (r.has("pin_end")) cfg.pin_end = r.number("pin_end", -1e6, 1e6);
    cfg.tol = r.number_or("tol", 1e-8, 1e-15, 1.0);
    cfg.max_iter = r.integer_or("max_iter", 100000, 1, 1000000000);
  } else if (cfg.kind == "mc_smallball") {
    cfg.model = detail::parse_model(r.get("model"), "model");
    // Ball probabilities decay exponentially with the node count; the grid is
    // capped at 8 intervals so direct MC stays estimable.
    cfg.grid = detail::parse_grid(r.get("grid"), "grid", 8);
    cfg.eps = r.number("eps", 1e-9, 1e3);
    cfg.path = detail::parse_path_spec(r.get("z1"), "z1");
    cfg.path2 = detail::parse_path_spec(r.get("z2"), "z2");
    cfg.mc = detail::parse_mc(r.get("mc"), "mc", true);
  } else if (cfg.kind == "mc_ldp") {
    cfg.model = detail::parse_model(r.get("model"), "model");
    cfg.grid = detail::parse_grid(r.get("grid"), "grid", 100000);
    {
      detail::ObjectReader er(r.get("event"), "event");
      cfg.event.type = er.text("type", {"terminal", "sup", "whole_space"});
      if (cfg.event.type != "whole_space")
        cfg.event.level = er.number("level", -1e6, 1e6);
      else if (er.has("level"))
        throw ConfigError("event.level", "not valid for whole_space");
      er.finish();
    }
    cfg.eps_list = detail::parse_eps_list(r, "eps_list");
    cfg.mc = detail::parse_mc(r.get("mc"), "mc", false);
  } else if (cfg.kind == "algebraic") {
    {
      detail::ObjectReader wr(r.get("weights"), "weights");
      cfg.weights.preset = wr.text("preset", {"harmonic", "values"});
      if (cfg.weights.preset == "harmonic")
        cfg.weights.n = wr.integer("n", 1, 10000000);
      else {
        cfg.weights.values = wr.number_list("values");
        for (double a : cfg.weights.values)
          if (a == 0.0) throw ConfigError("weights.values", "weights must be nonzero");
        cfg.weights.n = static_cast<std::int64_t>(cfg.weights.values.size());
      }
      wr.finish();
    }
    {
      detail::ObjectReader mr(r.get("map"), "map");
      cfg.map.preset = mr.text("preset", {"zero", "linear", "tanh09"});
      if (cfg.map.preset == "linear")
        cfg.map.kappa = mr.number("kappa", -0.9, 0.9);
      else if (mr.has("kappa"))
        throw ConfigError("map.kappa", "only valid for the linear preset");
      mr.finish();
    }
    {
      detail::ObjectReader pr(r.get("phi"), "phi");
      cfg.phi.preset = pr.text("preset", {"ones", "values"});
      if (cfg.phi.preset == "values") {
        cfg.phi.values = pr.number_list("values");
        if (cfg.phi.values.size() != static_cast<std::size_t>(cfg.weights.n))
          throw ConfigError("phi.values", "length must match the weight count");
      }
      pr.finish();
    }
    if (r.has("solve")) {
      detail::ObjectReader sr(r.get("solve"), "solve");
      SolveConfig s;
      s.eps = sr.number("eps", 1e-9, 1e3);
      s.seed = static_cast<std::uint64_t>(sr.integer("seed", 0, 4611686018427387903LL));
      sr.finish();
      cfg.solve = s;
    }
  }
  r.finish();
  return cfg;
}

inline json canonical_config(const ExperimentConfig& cfg) {
  json j;
  j["kind"] = cfg.kind;
  auto model_json = [&] {
    json m;
    m["preset"] = cfg.model.preset;
    if (cfg.model.preset == "ou") m["theta"] = cfg.model.theta;
    return m;
  };
  auto grid_json = [&] {
    json g;
    g["horizon"] = cfg.grid.horizon;
    g["intervals"] = cfg.grid.intervals;
    return g;
  };
  auto path_json = [](const PathSpecConfig& p) {
    json o;
    o["shape"] = p.shape;
    if (p.shape == "linear") o["slope"] = p.slope;
    if (p.shape == "values") o["values"] = p.values;
    return o;
  };
  auto mc_json = [](const McParams& m, bool with_ladder) {
    json o;
    o["count"] = m.count;
    o["seed"] = m.seed;
    if (with_ladder && !m.delta_ladder.empty()) o["delta_ladder"] = m.delta_ladder;
    return o;
  };

  if (cfg.kind == "evaluate") {
    j["model"] = model_json();
    j["grid"] = grid_json();
    j["eps"] = cfg.eps;
    j["path"] = path_json(cfg.path);
  } else if (cfg.kind == "minimize") {
    j["model"] = model_json();
    j["grid"] = grid_json();
    j["objective"] = cfg.objective;
    if (cfg.objective == "om") j["eps"] = cfg.eps;
    j["pin_start"] = cfg.pin_start;
    if (cfg.pin_end) j["pin_end"] = *cfg.pin_end;
    j["tol"] = cfg.tol;
    j["max_iter"] = cfg.max_iter;
    j["multistart"] = cfg.multistart;
  } else if (cfg.kind == "eps_sweep") {
    j["model"] = model_json();
    j["grid"] = grid_json();
    j["eps_list"] = cfg.eps_list;
    j["pin_start"] = cfg.pin_start;
    if (cfg.pin_end) j["pin_end"] = *cfg.pin_end;
    j["tol"] = cfg.tol;
    j["max_iter"] = cfg.max_iter;
  } else if (cfg.kind == "gamma") {
    j["model"] = model_json();
    j["grid"] = grid_json();
    j["eps_list"] = cfg.eps_list;
    j["radii"] = cfg.radii;
    j["probes"] = cfg.probes;
    j["pin_start"] = cfg.pin_start;
    if (cfg.pin_end) j["pin_end"] = *cfg.pin_end;
    j["tol"] = cfg.tol;
    j["max_iter"] = cfg.max_iter;
  } else if (cfg.kind == "mc_smallball") {
    j["model"] = model_json();
    j["grid"] = grid_json();
    j["eps"] = cfg.eps;
    j["z1"] = path_json(cfg.path);
    j["z2"] = path_json(cfg.path2);
    j["mc"] = mc_json(cfg.mc, true);
  } else if (cfg.kind == "mc_ldp") {
    j["model"] = model_json();
    j["grid"] = grid_json();
    json ev;
    ev["type"] = cfg.event.type;
    if (cfg.event.type != "whole_space") ev["level"] = cfg.event.level;
    j["event"] = ev;
    j["eps_list"] = cfg.eps_list;
    j["mc"] = mc_json(cfg.mc, false);
  } else if (cfg.kind == "algebraic") {
    json w;
    w["preset"] = cfg.weights.preset;
    if (cfg.weights.preset == "harmonic")
      w["n"] = cfg.weights.n;
    else
      w["values"] = cfg.weights.values;
    j["weights"] = w;
    json m;
    m["preset"] = cfg.map.preset;
    if (cfg.map.preset == "linear") m["kappa"] = cfg.map.kappa;
    j["map"] = m;
    json p;
    p["preset"] = cfg.phi.preset;
    if (cfg.phi.preset == "values") p["values"] = cfg.phi.values;
    j["phi"] = p;
    if (cfg.solve) {
      json s;
      s["eps"] = cfg.solve->eps;
      s["seed"] = cfg.solve->seed;
      j["solve"] = s;
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// Experiment execution.
// ---------------------------------------------------------------------------

struct RunOutput {
  json record;
  std::vector<std::string> files_written;
};

namespace detail {

inline DiscretePath build_path(const TimeGrid& g, const PathSpecConfig& p,
                               const std::string& field) {
  if (p.shape == "zero") return constant_path(g, 0.0);
  if (p.shape == "linear") return linear_path(g, 0.0, p.slope * g.horizon());
  if (p.values.size() != static_cast<std::size_t>(g.n_nodes()))
    throw ConfigError(field + ".values", "length must equal intervals + 1");
  return DiscretePath(g, p.values);
}

inline DriftModel build_drift(const ModelConfig& m) {
  return m.preset == "ou" ? preset_drift("ou", m.theta) : preset_drift(m.preset);
}

inline json functional_json(const FunctionalValue& v) {
  json o;
  o["value"] = std::isinf(v.value) ? json("inf") : json(v.value);
  json comps;
  for (const auto& [name, x] : v.components)
    comps[name] = std::isinf(x) ? json("inf") : json(x);
  o["components"] = comps;
  return o;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& file, const std::string& header) {
    os_.open(file, std::ios::binary | std::ios::trunc);
    if (!os_) throw std::runtime_error("cannot open " + file.string());
    os_ << header << '\n';
  }
  template <class... Parts>
  void row(const Parts&... parts) {
    bool first = true;
    ((os_ << (first ? "" : ","), first = false, write_one(parts)), ...);
    os_ << '\n';
  }

 private:
  void write_one(double x) { os_ << fmt(x); }
  void write_one(std::int64_t x) { os_ << x; }
  void write_one(int x) { os_ << x; }
  void write_one(bool x) { os_ << (x ? 1 : 0); }
  void write_one(const std::string& s) { os_ << s; }
  std::ofstream os_;
};

}  // namespace detail

inline RunOutput run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  RunOutput out;
  json results;
  std::optional<std::uint64_t> seed;

  const TimeGrid grid(cfg.grid.horizon, cfg.grid.intervals);
  auto csv_path = [&](const std::string& name) { return fs::path(out_dir) / name; };
  auto note_file = [&](const std::string& name) {
    out.files_written.push_back((fs::path(out_dir) / name).string());
  };

  if (cfg.kind == "evaluate") {
    const DriftModel drift = detail::build_drift(cfg.model);
    const DiscretePath z = detail::build_path(grid, cfg.path, "path");
    const FunctionalValue om = om_sde(drift, z, cfg.eps, z.values.front());
    const FunctionalValue fw = fw_sde(drift, z, z.values.front());
    const double gap = pointwise_gap(drift, z, cfg.eps);
    const double corr = om_correction(drift, z);
    results["om"] = detail::functional_json(om);
    results["fw"] = detail::functional_json(fw);
    results["gap"] = gap;
    results["om_correction"] = corr;
    detail::CsvWriter csv(csv_path("evaluate.csv"), "om_value,fw_value,gap,om_correction");
    csv.row(om.value, fw.value, gap, corr);
    note_file("evaluate.csv");
  } else if (cfg.kind == "minimize") {
    const DriftModel drift = detail::build_drift(cfg.model);
    Constraints pins;
    pins.pin_start = cfg.pin_start;
    pins.pin_end = cfg.pin_end;
    MinimizeOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    const PathObjective obj = cfg.objective == "fw"
                                  ? fw_path_objective(drift, cfg.pin_start)
                                  : om_path_objective(drift, cfg.eps, cfg.pin_start);
    const DiscretePath line =
        linear_path(grid, cfg.pin_start, cfg.pin_end.value_or(cfg.pin_start));
    std::vector<MinimizeResult> minima;
    if (cfg.multistart) {
      std::vector<DiscretePath> starts = {line, constant_path(grid, cfg.pin_start)};
      if (cfg.pin_end) {
        DiscretePath reflected = line;
        const double mid = 0.5 * (cfg.pin_start + *cfg.pin_end);
        for (auto& v : reflected.values) v = 2.0 * mid - v;
        reflected.values.front() = cfg.pin_start;
        reflected.values.back() = *cfg.pin_end;
        starts.push_back(reflected);
      }
      // Drop starts that violate the pins (the constant start when pinned).
      std::vector<DiscretePath> valid;
      for (auto& s : starts)
        if ((!pins.pin_start || s.values.front() == *pins.pin_start) &&
            (!pins.pin_end || s.values.back() == *pins.pin_end))
          valid.push_back(std::move(s));
      minima = multi_start(obj, valid, pins, opts);
    } else {
      minima.push_back(minimize(obj, line, pins, opts, "line"));
    }
    const MinimizeResult& best = minima.front();
    const double el = euler_lagrange_residual(
        drift, best.path, cfg.objective == "fw" ? ObjectiveKind::fw : ObjectiveKind::om,
        cfg.eps);
    json list = json::array();
    for (const auto& m : minima) {
      json e;
      e["value"] = m.value;
      e["grad_norm"] = m.grad_norm;
      e["iterations"] = m.iterations;
      e["converged"] = m.converged;
      e["start_label"] = m.start_label;
      list.push_back(e);
    }
    results["minima"] = list;
    results["el_residual"] = el;
    detail::CsvWriter csv(csv_path("mode.csv"), "t,z");
    for (int i = 0; i < grid.n_nodes(); ++i)
      csv.row(grid.node(i), best.path.values[static_cast<std::size_t>(i)]);
    note_file("mode.csv");
  } else if (cfg.kind == "eps_sweep") {
    const DriftModel drift = detail::build_drift(cfg.model);
    Constraints pins;
    pins.pin_start = cfg.pin_start;
    pins.pin_end = cfg.pin_end;
    MinimizeOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    const EpsSweepResult sweep = eps_sweep(drift, grid, pins, cfg.eps_list, opts);
    results["fw_value"] = sweep.fw_mode.value;
    results["fw_converged"] = sweep.fw_mode.converged;
    json entries = json::array();
    detail::CsvWriter csv(csv_path("eps_sweep.csv"),
                          "eps,om_value,grad_norm,iterations,dist_to_fw_mode");
    for (std::size_t i = 0; i < sweep.entries.size(); ++i) {
      const auto& e = sweep.entries[i];
      json o;
      o["eps"] = e.eps;
      o["om_value"] = e.result.value;
      o["grad_norm"] = e.result.grad_norm;
      o["iterations"] = e.result.iterations;
      o["converged"] = e.result.converged;
      o["dist_to_fw_mode"] = sweep.distances[i];
      entries.push_back(o);
      csv.row(e.eps, e.result.value, e.result.grad_norm, e.result.iterations,
              sweep.distances[i]);
    }
    results["entries"] = entries;
    note_file("eps_sweep.csv");
  } else if (cfg.kind == "gamma") {
    const DriftModel drift = detail::build_drift(cfg.model);
    Constraints pins;
    pins.pin_start = cfg.pin_start;
    pins.pin_end = cfg.pin_end;
    MinimizeOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    const MinimizeResult mode =
        minimize(fw_path_objective(drift, cfg.pin_start),
                 linear_path(grid, cfg.pin_start, cfg.pin_end.value_or(cfg.pin_start)),
                 pins, opts, "line");
    const GammaReport report =
        gamma_diagnostic(om_family(drift, cfg.pin_start), mode.path, cfg.radii,
                         cfg.eps_list, cfg.probes, mode.value);
    results["fw_value"] = mode.value;
    results["recovery_gap"] = report.recovery_gap;
    json radii = json::array();
    detail::CsvWriter csv(csv_path("gamma.csv"), "radius,liminf,limsup,slack");
    for (const auto& r : report.radii) {
      json o;
      o["radius"] = r.radius;
      o["liminf"] = r.liminf_estimate;
      o["limsup"] = r.limsup_estimate;
      o["slack"] = r.slack;
      radii.push_back(o);
      csv.row(r.radius, r.liminf_estimate, r.limsup_estimate, r.slack);
    }
    results["radii"] = radii;
    note_file("gamma.csv");
  } else if (cfg.kind == "mc_smallball") {
    const DriftModel drift = detail::build_drift(cfg.model);
    const DiscretePath z1 = detail::build_path(grid, cfg.path, "z1");
    const DiscretePath z2 = detail::build_path(grid, cfg.path2, "z2");
    seed = cfg.mc.seed;
    const Ensemble ens = simulate(drift, cfg.eps, grid, cfg.mc.count, cfg.mc.seed);
    const std::vector<double> ladder = cfg.mc.delta_ladder.empty()
                                           ? default_delta_ladder(z1, z2, cfg.eps)
                                           : cfg.mc.delta_ladder;
    const auto estimates = small_ball_ladder(ens, z1, z2, ladder);
    const FunctionalValue om1 = om_sde(drift, z1, cfg.eps, z1.values.front());
    const FunctionalValue om2 = om_sde(drift, z2, cfg.eps, z2.values.front());
    if (!om1.is_infinite() && !om2.is_infinite())
      results["om_log_ratio_prediction"] = om2.value - om1.value;
    else
      results["om_log_ratio_prediction"] = nullptr;
    json rows = json::array();
    detail::CsvWriter csv(
        csv_path("smallball.csv"),
        "delta,ratio,ci_low,ci_high,hits1,hits2,hits_both,count,flag_low_hits,flag_undefined");
    for (const auto& e : estimates) {
      json o;
      o["delta"] = e.delta;
      o["ratio"] = std::isinf(e.point_estimate) ? json("inf") : json(e.point_estimate);
      o["ci_low"] = e.ci_low;
      o["ci_high"] = std::isinf(e.ci_high) ? json("inf") : json(e.ci_high);
      o["hits1"] = e.hits1;
      o["hits2"] = e.hits2;
      o["hits_both"] = e.hits_both;
      o["count"] = e.count;
      o["flag_low_hits"] = e.flag_low_hits;
      o["flag_undefined"] = e.flag_undefined;
      rows.push_back(o);
      csv.row(e.delta, e.point_estimate, e.ci_low, e.ci_high, e.hits1, e.hits2,
              e.hits_both, e.count, e.flag_low_hits, e.flag_undefined);
    }
    results["estimates"] = rows;
    note_file("smallball.csv");
  } else if (cfg.kind == "mc_ldp") {
    const DriftModel drift = detail::build_drift(cfg.model);
    seed = cfg.mc.seed;
    PathEvent event;
    double fw_inf = 0.0;
    if (cfg.event.type == "terminal") {
      event = event_terminal_at_least(cfg.event.level);
      fw_inf = fw_infimum_over_event(drift, EventShape::terminal_at_least,
                                     cfg.event.level, grid);
    } else if (cfg.event.type == "sup") {
      event = event_sup_at_least(cfg.event.level);
      fw_inf =
          fw_infimum_over_event(drift, EventShape::sup_at_least, cfg.event.level, grid);
    } else {
      event = event_whole_space();
    }
    const RateEstimate rate =
        ldp_rate(drift, event, cfg.eps_list, cfg.mc.count, cfg.mc.seed, grid);
    results["fw_infimum"] = fw_inf;
    results["extrapolated"] = rate.extrapolation_defined ? json(rate.extrapolated) : json();
    results["extrapolated_se"] =
        rate.extrapolation_defined ? json(rate.extrapolated_se) : json();
    json entries = json::array();
    detail::CsvWriter csv(csv_path("ldp.csv"), "eps,p_hat,eps2_log_p,se,defined");
    for (const auto& e : rate.entries) {
      json o;
      o["eps"] = e.eps;
      o["p_hat"] = e.p_hat;
      o["eps2_log_p"] = e.defined ? json(e.scaled_log) : json();
      o["se"] = e.defined ? json(e.se) : json();
      o["defined"] = e.defined;
      entries.push_back(o);
      csv.row(e.eps, e.p_hat, e.defined ? detail::fmt(e.scaled_log) : std::string("nan"),
              e.defined ? detail::fmt(e.se) : std::string("nan"), e.defined);
    }
    results["entries"] = entries;
    note_file("ldp.csv");
  } else if (cfg.kind == "algebraic") {
    const std::vector<double> weights =
        cfg.weights.preset == "harmonic"
            ? harmonic_weights(static_cast<std::size_t>(cfg.weights.n))
            : cfg.weights.values;
    const AlgebraicSystem system =
        algebraic_system_preset(weights, cfg.map.preset, cfg.map.kappa);
    const std::vector<double> phi =
        cfg.phi.preset == "ones" ? std::vector<double>(weights.size(), 1.0)
                                 : cfg.phi.values;
    const AlgebraicFwResult fw = algebraic_fw(system, phi);
    results["fw_value"] = fw.value;
    std::optional<AlgebraicSolveResult> solved;
    if (cfg.solve) {
      seed = cfg.solve->seed;
      const GaussianMeasureSpec unit = diagonal_spec(weights, 1.0);
      const WeightedSequence noise = sample_sequences(unit, cfg.solve->seed, 1).front();
      solved = algebraic_solve(system, noise, cfg.solve->eps);
      double max_res = 0.0;
      for (double rr : solved->residuals) max_res = std::max(max_res, rr);
      results["solve_all_converged"] = solved->all_converged;
      results["solve_max_residual"] = max_res;
    }
    const std::size_t rows = std::min<std::size_t>(weights.size(), 10000);
    results["csv_rows"] = rows;
    detail::CsvWriter csv(csv_path("algebraic.csv"),
                          solved ? "n,a,phi,z,solution,residual" : "n,a,phi,z");
    for (std::size_t i = 0; i < rows; ++i) {
      if (solved)
        csv.row(static_cast<std::int64_t>(i + 1), weights[i], phi[i], fw.z[i],
                solved->solution.values[i], solved->residuals[i]);
      else
        csv.row(static_cast<std::int64_t>(i + 1), weights[i], phi[i], fw.z[i]);
    }
    note_file("algebraic.csv");
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.record["mlpath_version"] = kVersion;
  out.record["kind"] = cfg.kind;
  out.record["config"] = canonical_config(cfg);
  out.record["seed"] = seed ? json(*seed) : json();
  out.record["wall_clock_seconds"] = wall;
  out.record["results"] = results;

  std::ofstream rec(fs::path(out_dir) / "record.json", std::ios::binary | std::ios::trunc);
  rec << out.record.dump(2) << '\n';
  note_file("record.json");
  return out;
}

// ---------------------------------------------------------------------------
// Plot data emission: long-format (series, x, y, y_err) from a run record.
// ---------------------------------------------------------------------------

enum class PlotdataStatus { written, not_plottable };

inline PlotdataStatus emit_plotdata(const json& record, const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (!record.contains("kind") || !record.contains("results"))
    throw ConfigError("record", "not a run record (missing kind/results)");
  const std::string kind = record["kind"].get<std::string>();
  const json& res = record["results"];
  fs::create_directories(out_dir);

  auto num = [](const json& v) { return v.is_number() ? v.get<double>() : 0.0; };

  if (kind == "eps_sweep") {
    detail::CsvWriter csv(fs::path(out_dir) / "plotdata.csv", "series,x,y,y_err");
    for (const auto& e : res["entries"]) {
      const double eps = num(e["eps"]);
      csv.row(std::string("dist_to_fw_mode"), eps, num(e["dist_to_fw_mode"]), 0.0);
    }
    for (const auto& e : res["entries"]) {
      const double eps = num(e["eps"]);
      csv.row(std::string("eps2_om_at_mode"), eps, eps * eps * num(e["om_value"]), 0.0);
    }
    return PlotdataStatus::written;
  }
  if (kind == "mc_ldp") {
    detail::CsvWriter csv(fs::path(out_dir) / "plotdata.csv", "series,x,y,y_err");
    for (const auto& e : res["entries"])
      if (e["defined"].get<bool>())
        csv.row(std::string("eps2_log_phat"), num(e["eps"]), num(e["eps2_log_p"]),
                num(e["se"]));
    const double ref = -num(res["fw_infimum"]);
    for (const auto& e : res["entries"])
      csv.row(std::string("neg_inf_fw"), num(e["eps"]), ref, 0.0);
    return PlotdataStatus::written;
  }
  if (kind == "mc_smallball") {
    detail::CsvWriter csv(fs::path(out_dir) / "plotdata.csv", "series,x,y,y_err");
    for (const auto& e : res["estimates"]) {
      if (e["flag_undefined"].get<bool>()) continue;
      const double lo = num(e["ci_low"]);
      const double hi = e["ci_high"].is_number() ? e["ci_high"].get<double>() : 0.0;
      csv.row(std::string("ratio"), num(e["delta"]), num(e["ratio"]),
              0.5 * std::max(0.0, hi - lo));
    }
    if (res["om_log_ratio_prediction"].is_number()) {
      const double pred = std::exp(num(res["om_log_ratio_prediction"]));
      for (const auto& e : res["estimates"])
        csv.row(std::string("om_prediction"), num(e["delta"]), pred, 0.0);
    }
    return PlotdataStatus::written;
  }
  if (kind == "gamma") {
    detail::CsvWriter csv(fs::path(out_dir) / "plotdata.csv", "series,x,y,y_err");
    for (const auto& r : res["radii"])
      csv.row(std::string("liminf"), num(r["radius"]), num(r["liminf"]), 0.0);
    for (const auto& r : res["radii"])
      csv.row(std::string("limsup"), num(r["radius"]), num(r["limsup"]), 0.0);
    return PlotdataStatus::written;
  }
  return PlotdataStatus::not_plottable;
}

}  // namespace mlpath

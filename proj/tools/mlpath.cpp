#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlpath/harness.hpp"

namespace {

// Machine-readable error record on stderr.
void emit_error(int code, const std::string& field, const std::string& message) {
  nlohmann::ordered_json err;
  err["error"]["exit_code"] = code;
  err["error"]["field"] = field;
  err["error"]["message"] = message;
  std::cerr << err.dump() << std::endl;
}

nlohmann::ordered_json load_json(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw mlpath::ConfigError(file, "cannot open file");
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw mlpath::ConfigError(file, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlpath: Onsager-Machlup / Freidlin-Wentzell functional toolkit"};
  app.require_subcommand(1);

  std::string config_file;
  std::string record_file;
  std::string out_dir = ".";

  CLI::App* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("config", config_file, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (default: current)");

  CLI::App* plot = app.add_subcommand("plotdata", "emit plot data from a run record");
  plot->add_option("record", record_file, "run record (record.json)")->required();
  plot->add_option("--out", out_dir, "output directory (default: current)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto cfg = mlpath::parse_config(load_json(config_file));
      const auto output = mlpath::run_experiment(cfg, out_dir);
      for (const auto& f : output.files_written) std::cout << "wrote " << f << '\n';
      return 0;
    }
    const auto record = load_json(record_file);
    const auto status = mlpath::emit_plotdata(record, out_dir);
    if (status == mlpath::PlotdataStatus::written)
      std::cout << "wrote " << out_dir << "/plotdata.csv" << '\n';
    else
      std::cout << "notice: kind '" << record.value("kind", std::string("?"))
                << "' has no plottable payload; nothing written" << '\n';
    return 0;
  } catch (const mlpath::ConfigError& e) {
    emit_error(2, e.field, e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error(3, "", e.what());
    return 3;
  }
}

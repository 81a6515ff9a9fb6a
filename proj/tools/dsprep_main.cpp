// dsprep: run one state-preparation protocol from a JSON config.
//
//   dsprep run config.json --out results/ [--threads N] [--verbose]
//
// Writes series.csv, report.json and (with an asp block) asp_series.csv.

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "dsp/errors.hpp"
#include "dsp/runner.hpp"

namespace {

enum Exit { kOk = 0, kGeneric = 1, kConfig = 2, kParse = 3, kCapacity = 4, kNumerical = 5 };

int execute(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, bool verbose) {
  const auto config = dsp::load_config(config_path);
  const auto result = dsp::run(config);

  std::filesystem::create_directories(out_dir);
  dsp::emit_series(result.series, out_dir / "series.csv");
  if (result.asp_series) dsp::emit_series(*result.asp_series, out_dir / "asp_series.csv");
  std::ofstream report(out_dir / "report.json");
  report << result.report.dump(2) << '\n';
  if (!report) throw dsp::Error("cannot write report.json");

  const auto& fin = result.report.at("final");
  std::cout << "final energy " << fin.at("energy").get<double>() << "  infidelity "
            << fin.at("infidelity").get<double>() << "  multiplicity " << fin.at("multiplicity").get<double>()
            << '\n';
  if (verbose)
    for (const auto& w : result.report.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dissipative state preparation by engineered Lindblad dynamics"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  int threads = 0;
  bool verbose = false;

  auto* run_cmd = app.add_subcommand("run", "Execute one protocol run");
  run_cmd->add_option("config", config_path, "JSON run configuration")->required();
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--threads", threads, "OpenMP worker count (0 = runtime default)")->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("--verbose", verbose, "Print warnings collected during the run");
  app.add_flag_callback("--version", [] {
    std::cout << "dsprep " << dsp::version() << '\n';
    std::exit(0);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    return execute(config_path, out_dir, verbose);
  } catch (const dsp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const dsp::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const dsp::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kCapacity;
  } catch (const dsp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const dsp::ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kGeneric;
  }
}

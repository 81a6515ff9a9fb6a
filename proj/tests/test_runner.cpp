#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "dsp/diagnostics.hpp"
#include "dsp/errors.hpp"
#include "dsp/runner.hpp"
#include "support.hpp"

using namespace dsp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dsprep_runner_tests";
  fs::create_directories(dir);
  return dir / name;
}

json dimer_config() {
  return json::parse(R"({
    "system": {"hubbard": {"sites": 2, "t": 1.0, "U": 4.0}},
    "sector": {"n_alpha": 1, "n_beta": 1},
    "protocol": {"mode": "plain"},
    "coupling": {"base": "S_II", "extra": [{"label": "staggered spin density", "terms": [
        {"coeff": 1, "ops": "1a^ 1a"}, {"coeff": -1, "ops": "1b^ 1b"},
        {"coeff": -1, "ops": "2a^ 2a"}, {"coeff": 1, "ops": "2b^ 2b"}]}]},
    "schedule": {"T": 30, "dt": 0.1},
    "initial_state": {"kind": "maximally_mixed"}
  })");
}

RunResult run_doc(const json& doc) {
  ScopedWarningCapture quiet;
  return run(parse_config(doc));
}

}  // namespace

TEST_CASE("config validation") {
  auto bad = [](auto edit) {
    json d = dimer_config();
    edit(d);
    return d;
  };
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["colour"] = 1; })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d.erase("system"); })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["system"]["fcidump"] = "x"; })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["protocol"] = {{"mode", "folded"}}; })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["protocol"] = {{"mode", "sideways"}}; })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["schedule"]["dt"] = -1; })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["sector"]["n_alpha"] = "one"; })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["engine"] = {{"kind", "trajectories"}}; })), ConfigError);
  CHECK_THROWS_AS(parse_config(bad([](json& d) { d["coupling"]["quartic_preset"] = "argon"; })), ConfigError);
  CHECK_NOTHROW(parse_config(bad([](json& d) { d["protocol"] = {{"mode", "folded"}, {"target_level", 1}}; })));
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("plain dimer run report") {
  const auto r = run_doc(dimer_config());
  const auto& rep = r.report;
  CHECK(rep.at("final").at("infidelity").get<double>() < 1e-6);
  CHECK(std::abs(rep.at("final").at("energy").get<double>() - dsp::testing::kE0) < 1.6e-3);
  for (const char* k : {"a", "b", "da", "db", "S", "M", "hard_threshold", "construction"})
    CHECK(rep.at("filter").contains(k));
  CHECK(rep.at("filter").at("a").get<double>() == doctest::Approx(10.485281).epsilon(1e-7));
  CHECK(rep.at("coupling").at("count").get<int>() == 3);
  CHECK(rep.at("coupling").at("kind") == "augmented");
  CHECK(rep.at("sector").at("dim").get<int>() == 4);
  CHECK(rep.at("version") == version());
  CHECK(rep.at("config_hash").get<std::string>().size() == 16);
  CHECK(rep.at("t_chemical_accuracy").is_number());
  CHECK(rep.at("resource_estimate").at("available").get<bool>());
  CHECK(rep.at("resource_estimate").at("C_K").get<double>() == doctest::Approx(5.828).epsilon(1e-4));
  CHECK(rep.at("sanity").at("max_pos_err").get<double>() < 1e-9);
  CHECK(rep.at("connectivity").at("states").size() == 3);
  CHECK(r.series.size() == 301);
  CHECK(r.final_rho.rows() == 4);
}

TEST_CASE("runs are reproducible from the same config") {
  auto doc = dimer_config();
  doc["schedule"] = {{"T", 2.0}, {"dt", 0.1}};
  const auto a = run_doc(doc), b = run_doc(doc);
  CHECK(a.report.dump() == b.report.dump());
  CHECK(series_csv(a.series) == series_csv(b.series));
  doc["schedule"]["T"] = 3.0;
  CHECK(run_doc(doc).report.at("config_hash") != a.report.at("config_hash"));
}

TEST_CASE("folded run resolves mu from the target level and prepares the triplet") {
  auto doc = dimer_config();
  doc["protocol"] = {{"mode", "folded"}, {"target_level", 1}};
  doc["initial_state"] = {{"kind", "hf_aufbau"}};
  const auto r = run_doc(doc);
  const auto& p = r.report.at("protocol");
  CHECK(p.at("mu").get<double>() == doctest::Approx(0.5 * (1.0 - dsp::testing::kSqrt2 + 2.0)));
  CHECK(p.at("mu_window").at("valid").get<bool>());
  CHECK(r.report.contains("filter_unfolded"));
  CHECK(r.report.at("final").at("multiplicity").get<double>() == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(r.report.at("final").at("infidelity").get<double>() < 1e-6);
}

TEST_CASE("an invalid explicit mu is reported as a warning") {
  auto doc = dimer_config();
  doc["protocol"] = {{"mode", "folded"}, {"mu", 2.0}, {"target_level", 1}};
  doc["schedule"] = {{"T", 1.0}, {"dt", 0.5}};
  const auto r = run_doc(doc);
  CHECK_FALSE(r.report.at("protocol").at("mu_window").at("valid").get<bool>());
  CHECK(r.report.at("warnings").size() >= 1);
}

TEST_CASE("projected run from the projected aufbau state") {
  auto doc = dimer_config();
  doc["protocol"] = {{"mode", "projected"}, {"mu", -0.4}};
  doc["initial_state"] = {{"kind", "hf_aufbau"}};
  const auto r = run_doc(doc);
  CHECK(r.report.at("target").at("level").get<int>() == 1);
  CHECK(r.report.at("initial_state").at("projected").get<bool>());
  CHECK(r.report.at("final").at("infidelity").get<double>() < 1e-6);
  CHECK(r.report.at("final").at("multiplicity").get<double>() == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("symmetry protocol on a one-dimensional sector") {
  auto doc = dimer_config();
  doc["sector"] = {{"n_alpha", 2}, {"n_beta", 0}};
  doc["protocol"] = {{"mode", "symmetry"}};
  doc["coupling"] = {{"base", "S_II"}};
  doc["initial_state"] = {{"kind", "hf_aufbau"}};
  const auto r = run_doc(doc);
  CHECK(r.report.at("final").at("energy").get<double>() == 0.0);
  CHECK(r.report.at("final").at("multiplicity").get<double>() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.report.at("filter").is_null());
  CHECK(r.report.at("resource_estimate").at("trivial_sector").get<bool>());
}

TEST_CASE("series CSV output and round trip") {
  ObservableSeries s;
  for (int i = 0; i < 3; ++i) {
    s.times.push_back(0.1 * i);
    s.energy.push_back(-1.0 / 3.0 + i);
    s.infidelity.push_back(std::exp(-i));
    s.s2.push_back(2.0);
    s.multiplicity.push_back(3.0);
    s.trace_err.push_back(1e-17 * i);
  }
  const auto csv = series_csv(s);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("time,energy,infidelity,s2,multiplicity,trace_err\n", 0) == 0);
  const auto path = scratch("series.csv");
  emit_series(s, path);
  const auto back = read_series(path);
  CHECK(back.times == s.times);
  CHECK(back.energy == s.energy);
  CHECK(back.infidelity == s.infidelity);
  CHECK(back.trace_err == s.trace_err);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("a (10e,7o) integral file runs through the trajectory pipeline") {
  std::mt19937_64 rng(99);
  auto ints = dsp::testing::random_integrals(7, rng, 0.2);
  ints.nelec = 10;
  const auto path = scratch("FCIDUMP_10e7o");
  {
    std::ofstream out(path);
    out << write_fcidump(ints);
  }
  json doc = {{"system", {{"fcidump", path.string()}}},
              {"sector", {{"n_alpha", 5}, {"n_beta", 5}}},
              {"protocol", {{"mode", "plain"}}},
              {"coupling", {{"base", "S_II_reduced"}}},
              {"engine", {{"kind", "trajectories"}, {"n_traj", 16}, {"seed", 3}, {"substeps", 4}}},
              {"schedule", {{"T", 0.2}, {"dt", 0.1}}},
              {"initial_state", {{"kind", "hf_aufbau"}}}};
  const auto r = run_doc(doc);
  CHECK(r.report.at("sector").at("dim").get<int>() == 441);
  CHECK(r.report.at("coupling").at("count").get<int>() == 22);
  CHECK(r.series.size() == 3);
  CHECK(std::isfinite(r.report.at("final").at("energy").get<double>()));
}

TEST_CASE("stage failures keep their error type") {
  json doc = dimer_config();
  doc["system"] = {{"fcidump", scratch("broken_FCIDUMP").string()}};
  {
    std::ofstream out(scratch("broken_FCIDUMP"));
    out << "&FCI NORB=2 &END\n 1.0 1 1 0\n";
  }
  try {
    run_doc(doc);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("integrals") != std::string::npos);
  }
  json big = dimer_config();
  big["system"] = {{"hubbard", {{"sites", 21}, {"U", 4.0}}}};
  big.erase("coupling");
  CHECK_THROWS_AS(run_doc(big), CapacityError);
}

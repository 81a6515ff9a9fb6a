#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "dsprep_cli_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const std::string& name, const json& doc) {
  const auto path = workdir() / name;
  std::ofstream(path) << doc.dump(2);
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DSPREP_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json dimer() {
  return {{"system", {{"hubbard", {{"sites", 2}, {"t", 1.0}, {"U", 4.0}}}}},
          {"sector", {{"n_alpha", 1}, {"n_beta", 1}}},
          {"schedule", {{"T", 2.0}, {"dt", 0.1}}}};
}

}  // namespace

TEST_CASE("successful run writes the series and the report") {
  auto doc = dimer();
  doc["asp"] = {{"T", 5.0}, {"steps", 50}};
  const auto cfg = write_config("ok.json", doc);
  const auto out = workdir() / "ok_out";
  fs::remove_all(out);
  CHECK(run_cli("run " + cfg.string() + " --out " + out.string() + " --threads 2") == 0);
  CHECK(fs::exists(out / "series.csv"));
  CHECK(fs::exists(out / "asp_series.csv"));
  REQUIRE(fs::exists(out / "report.json"));
  const auto rep = json::parse(std::ifstream(out / "report.json"));
  CHECK(rep.at("schedule").at("T").get<double>() == 2.0);
  CHECK(rep.contains("filter"));
  CHECK(run_cli("--version") == 0);
}

TEST_CASE("configuration errors exit with 2") {
  auto doc = dimer();
  doc["bogus"] = true;
  CHECK(run_cli("run " + write_config("bad_key.json", doc).string()) == 2);
  std::ofstream(workdir() / "not_json.json") << "{ nope";
  CHECK(run_cli("run " + (workdir() / "not_json.json").string()) == 2);
  CHECK(run_cli("run") == 2);
  CHECK(run_cli("frobnicate") == 2);
}

TEST_CASE("malformed integral files exit with 3") {
  std::ofstream(workdir() / "FCIDUMP_bad") << "&FCI NORB=2 &END\n 1.0 1 1 0\n";
  json doc = dimer();
  doc["system"] = {{"fcidump", (workdir() / "FCIDUMP_bad").string()}};
  CHECK(run_cli("run " + write_config("bad_dump.json", doc).string()) == 3);
}

TEST_CASE("oversized problems exit with 4") {
  json doc = dimer();
  doc["system"] = {{"hubbard", {{"sites", 21}, {"U", 4.0}}}};
  CHECK(run_cli("run " + write_config("too_big.json", doc).string()) == 4);
}

TEST_CASE("numerical failures exit with 5") {
  // The M_s = 0 triplet has no weight above mu = 3, where only singlets live.
  json doc = dimer();
  doc["protocol"] = {{"mode", "projected"}, {"mu", 3.0}};
  doc["initial_state"] = {{"kind", "determinants"},
                          {"determinants", json::array({{{"alpha", {1}}, {"beta", {2}}, {"coeff", 1.0}},
                                                        {{"alpha", {2}}, {"beta", {1}}, {"coeff", -1.0}}})}};
  CHECK(run_cli("run " + write_config("zero_norm.json", doc).string()) == 5);
}

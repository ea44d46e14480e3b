#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "stocc/csv.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "stocc_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(STOCC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Replaces the first data value of the second column of a CSV.
void poison_first_value(const fs::path& p, const std::string& value) {
  std::istringstream in(slurp(p));
  std::ostringstream out;
  std::string line;
  bool header = true, done = false;
  while (std::getline(in, line)) {
    if (!header && !done) {
      auto fields = stocc::csv::split_line(line);
      fields.back() = value;
      line.clear();
      for (std::size_t k = 0; k < fields.size(); ++k) line += (k ? "," : "") + fields[k];
      done = true;
    }
    header = false;
    out << line << "\n";
  }
  std::ofstream(p) << out.str();
}

}  // namespace

TEST_CASE("simulate is deterministic") {
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);
  const std::string a = (kRoot / "a").string(), b = (kRoot / "b").string();
  REQUIRE(run("simulate --scenario 2-1 --sub 3 --sites 50 --years 3 --seed 11 --out " + a) == 0);
  REQUIRE(run("simulate --scenario 2-1 --sub 3 --sites 50 --years 3 --seed 11 --out " + b) == 0);
  for (const char* f : {"encounter.csv", "coords.csv", "occ_covariates.csv", "det_covariates.csv",
                        "truth.json", "manifest.json"}) {
    CAPTURE(f);
    CHECK(slurp(kRoot / "a" / f) == slurp(kRoot / "b" / f));
  }
}

TEST_CASE("fit, diagnose and predict") {
  const fs::path d = kRoot / "pipe";
  fs::remove_all(d);
  REQUIRE(run("simulate --scenario 1-0 --sites 40 --years 3 --seed 2 --out " + (d / "data").string()) == 0);
  REQUIRE(run("fit --data " + (d / "data").string() + " --chains 2 --iter 200 --burn 100 --thin 2 --seed 3 --out " +
              (d / "fit").string()) == 0);
  CHECK(fs::exists(d / "fit" / "draws.csv"));
  CHECK(fs::exists(d / "fit" / "summary.csv"));
  REQUIRE(run("diagnose --samples " + (d / "fit").string() + " --out " + (d / "diag").string()) == 0);
  CHECK(fs::exists(d / "diag" / "diagnostics.json"));
  CHECK(stocc::csv::read(d / "diag" / "occupancy_sites.csv").rows.size() == 40);
  CHECK(stocc::csv::read(d / "diag" / "occupancy_years.csv").rows.size() == 3);
  std::ofstream(d / "sites.csv") << "site_id,lat,lon,X\n1,0.5,0.5,0.2\n2,3.0,3.0,-1.0\n";
  REQUIRE(run("predict --samples " + (d / "fit").string() + " --sites " + (d / "sites.csv").string() +
              " --out " + (d / "pred.csv").string()) == 0);
  CHECK(stocc::csv::read(d / "pred.csv").rows.size() == 6);
}

TEST_CASE("exit codes") {
  const fs::path d = kRoot / "codes";
  fs::remove_all(d);
  fs::create_directories(d / "empty");
  CHECK(run("fit --data " + (d / "empty").string() + " --out " + (d / "x").string()) == 3);
  CHECK(run("fit --out " + (d / "x").string()) == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("simulate --scenario 9-9 --out " + (d / "y").string()) == 2);

  REQUIRE(run("simulate --scenario 1-0 --sites 20 --years 2 --seed 1 --out " + (d / "nan").string()) == 0);
  poison_first_value(d / "nan" / "occ_covariates.csv", "nan");
  CHECK(run("fit --data " + (d / "nan").string() + " --chains 1 --iter 20 --burn 10 --thin 1 --out " +
            (d / "z").string()) == 4);
}

TEST_CASE("desk-scale study grid") {
  const fs::path d = kRoot / "grid";
  fs::remove_all(d);
  fs::create_directories(d);
  std::ofstream(d / "study.json") << R"({
  "output_dir": ")" << (d / "out").string() << R"(",
  "base_seed": 7,
  "grid_n": 16,
  "defaults": {"replicates": 3, "I": 100, "T": 4,
               "mcmc": {"n_chains": 2, "n_iter": 60, "n_burn": 30, "thin": 3}},
  "scenarios": "all"
})";
  REQUIRE(run("study --config " + (d / "study.json").string() + " --out " + (d / "out").string()) == 0);
  const auto summary = stocc::csv::read(d / "out" / "summary.csv");
  CHECK(summary.rows.size() == 8 * 16 * 3);
  const auto status = summary.column("status");
  for (const auto& r : summary.rows) CHECK(r[status] == "ok");
}

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stocc/csv.hpp"
#include "stocc/error.hpp"
#include "stocc/experiment.hpp"
#include "stocc/simulator.hpp"

using namespace stocc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_study(const fs::path& out, int threads) {
  const Json j = {
      {"output_dir", out.string()},
      {"base_seed", 42},
      {"threads", threads},
      {"grid_n", 16},
      {"defaults",
       {{"replicates", 2},
        {"I", 30},
        {"T", 3},
        {"mcmc", {{"n_chains", 2}, {"n_iter", 120}, {"n_burn", 60}, {"thin", 2}}}}},
      {"scenarios", Json::array({"1-0", Json{{"id", "2-2"}, {"sub_scenarios", {0, 5}}}})}};
  return experiment_from_json(j);
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = tiny_study("/tmp/x", 1);
  REQUIRE(c.scenarios.size() == 2);
  CHECK(c.scenarios[0].replicates == 2);
  CHECK(c.scenarios[0].sub_scenarios == std::vector<int>{0});
  CHECK(c.scenarios[1].sub_scenarios == std::vector<int>{0, 5});
  CHECK(c.scenarios[1].mcmc.n_iter == 120);
  const ExperimentConfig all = experiment_from_json({{"output_dir", "o"}, {"scenarios", "all"}});
  CHECK(all.scenarios.size() == 8);
  CHECK(all.scenarios[3].sub_scenarios.size() == 16);
  CHECK_THROWS_AS(experiment_from_json({{"output_dir", "o"}, {"scenarios", {"9-9"}}}).validate(),
                  UsageError);
  CHECK_THROWS_AS(experiment_from_json({{"scenarios", 3}}), UsageError);
}

TEST_CASE("seeds and hashes") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(replicate_seed(1, "1-0", 0, 0) == replicate_seed(1, "1-0", 0, 0));
  CHECK(replicate_seed(1, "1-0", 0, 0) != replicate_seed(1, "1-0", 0, 1));
  CHECK(replicate_seed(1, "1-0", 0, 0) != replicate_seed(2, "1-0", 0, 0));
}

TEST_CASE("thread override") {
  setenv("OCC_THREADS", "3", 1);
  CHECK(resolve_threads(1) == 3);
  setenv("OCC_THREADS", "junk", 1);
  CHECK(resolve_threads(2) == 2);
  unsetenv("OCC_THREADS");
  CHECK(resolve_threads(5) == 5);
}

TEST_CASE("study runs, resumes and is thread-count invariant") {
  const fs::path root = fs::temp_directory_path() / "stocc_experiment";
  fs::remove_all(root);
  unsetenv("OCC_THREADS");

  const ExperimentResult a = run_experiment(tiny_study(root / "serial", 1));
  CHECK(a.replicates.size() == 6);
  CHECK(a.computed == 6);
  CHECK(a.failed == 0);
  const csv::Table summary = csv::read(root / "serial" / "summary.csv");
  CHECK(summary.rows.size() == 6);
  for (const char* f : {"mse_table.csv", "ppo.csv", "trends.csv", "psi_pairs.csv",
                        "bias_curves.csv", "pair_density_beta_0_alpha_0.csv", "manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(root / "serial" / f));
  }
  CHECK(fs::exists(root / "serial" / "replicates" / "2-2" / "sub05" / "rep002" / "summary.json"));
  const Json& d = a.replicates[0].data;
  CHECK(d.at("status") == "ok");
  CHECK(d.at("z_constraint_ok") == true);
  CHECK(d.at("psi_hat").size() == 90);

  const ExperimentResult again = run_experiment(tiny_study(root / "serial", 1));
  CHECK(again.computed == 0);
  CHECK(again.skipped == 6);

  // A changed setting invalidates only the affected jobs.
  ExperimentConfig changed = tiny_study(root / "serial", 1);
  changed.scenarios[0].mcmc.n_iter = 140;
  const ExperimentResult partial = run_experiment(changed);
  CHECK(partial.computed == 2);
  CHECK(partial.skipped == 4);

  run_experiment(tiny_study(root / "parallel", 3));
  run_experiment(tiny_study(root / "serial2", 1));
  for (const char* f : {"summary.csv", "mse_table.csv", "ppo.csv", "bias_curves.csv"}) {
    CAPTURE(f);
    CHECK(slurp(root / "parallel" / f) == slurp(root / "serial2" / f));
  }
}

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ncf/cli.hpp"
#include "ncf/config.hpp"

using namespace ncf;
namespace fs = std::filesystem;

namespace {

int dispatch(std::vector<std::string> args, std::string* captured = nullptr) {
  std::vector<const char*> argv;
  argv.push_back("ncf");
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream sink;
  std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
  const int rc = cli::parse_and_dispatch(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  if (captured) *captured = sink.str();
  return rc;
}

std::string write_test_config(const std::string& name, const std::string& extra = "") {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream f(path);
  f << "model.type = ar\n"
       "model.alpha_left = 0.2\n"
       "model.alpha_right = 0.2\n"
       "model.beta = 0.3\n"
       "innovations.distribution = uniform\n"
       "innovations.a = -1\n"
       "innovations.b = 1\n"
       "statistic.type = risk_mean\n"
       "index.type = interval\n"
       "index.lo = 0\n"
       "index.hi = 7\n"
       "experiment.d_grid = 0,2\n"
       "experiment.m_grid = 1\n"
       "experiment.replicates = 50\n"
       "experiment.picard_iterations = 16\n"
       "experiment.swap_depth = 2\n"
       "experiment.deviation_depth = 2\n";
  f << extra;
  return path.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config parsing") {
  SECTION("comments, whitespace and types") {
    const cfg::Config c = cfg::Config::parse_string(
        "# header comment\n"
        "model.type = ar   # trailing comment\n"
        "experiment.replicates = 123\n"
        "model.beta = 0.25\n"
        "statistic.include_center = true\n"
        "experiment.d_grid = 1, 2, 3\n");
    CHECK(c.get_string("model.type", "?") == "ar");
    CHECK(c.get_int("experiment.replicates", 0) == 123);
    CHECK(c.get_double("model.beta", 0) == 0.25);
    CHECK(c.get_bool("statistic.include_center", false));
    CHECK(c.get_ints("experiment.d_grid", {}) == std::vector<std::int64_t>{1, 2, 3});
  }
  SECTION("malformed lines and values are config errors") {
    CHECK_THROWS_AS(cfg::Config::parse_string("just some words\n"), cfg::ConfigError);
    const cfg::Config c = cfg::Config::parse_string("model.beta = abc\n");
    CHECK_THROWS_AS(c.get_double("model.beta", 0), cfg::ConfigError);
  }
  SECTION("unknown keys are rejected when building a plan") {
    const cfg::Config c = cfg::Config::parse_string("model.typo = ar\n");
    CHECK_THROWS_AS(cfg::plan_from_config(c), cfg::ConfigError);
  }
  SECTION("bad enum values") {
    CHECK_THROWS_AS(cfg::plan_from_config(cfg::Config::parse_string("model.type = arma\n")),
                    cfg::ConfigError);
    CHECK_THROWS_AS(
        cfg::plan_from_config(cfg::Config::parse_string("innovations.distribution = cauchy\n")),
        cfg::ConfigError);
  }
  SECTION("plan render round-trips through the parser") {
    const cfg::Config c = cfg::Config::parse_string(slurp(write_test_config("roundtrip.cfg")));
    const mc::ExperimentPlan plan = cfg::plan_from_config(c);
    const std::string rendered = cfg::render_plan(plan);
    const mc::ExperimentPlan again = cfg::plan_from_config(cfg::Config::parse_string(rendered));
    CHECK(cfg::render_plan(again) == rendered);
  }
}

TEST_CASE("command dispatch and exit codes") {
  SECTION("bound prints the value it wrote to the csv") {
    const std::string outdir = (fs::temp_directory_path() / "ncf_cli_bound").string();
    std::string shown;
    const int rc = dispatch({"bound", "--quantity", "upsilon", "--kappa", "1", "--rho", "0.5",
                             "--d", "10", "--output-dir", outdir},
                            &shown);
    CHECK(rc == 0);
    CHECK(shown.find("2.4412861590130954") != std::string::npos);
    CHECK(slurp(outdir + "/bounds.csv").find("2.4412861590130954") != std::string::npos);
  }
  SECTION("missing config file") {
    CHECK(dispatch({"run-all", "--config", "definitely_missing.cfg"}) == 2);
  }
  SECTION("unknown command or flag") {
    CHECK(dispatch({"frobnicate"}) == 2);
    CHECK(dispatch({"bound", "--no-such-flag", "3"}) == 2);
  }
  SECTION("help exits cleanly") { CHECK(dispatch({"--help"}) == 0); }
  SECTION("selfcheck passes and its negative control fails") {
    std::string shown;
    CHECK(dispatch({"selfcheck"}, &shown) == 0);
    CHECK(shown.find("PASS upsilon-dominance") != std::string::npos);
    CHECK(dispatch({"selfcheck", "--corrupt-upsilon"}, &shown) == 1);
    CHECK(shown.find("FAIL upsilon-dominance") != std::string::npos);
  }
  SECTION("selfcheck output is reproducible") {
    std::string a, b;
    dispatch({"selfcheck"}, &a);
    dispatch({"selfcheck"}, &b);
    CHECK(a == b);
  }
}

TEST_CASE("verification commands write deterministic csv files") {
  const std::string config = write_test_config("verify.cfg");
  const std::string out1 = (fs::temp_directory_path() / "ncf_cli_v1").string();
  const std::string out2 = (fs::temp_directory_path() / "ncf_cli_v2").string();
  fs::remove_all(out1);
  fs::remove_all(out2);

  CHECK(dispatch({"verify-approx", "--config", config, "--seed", "7", "--output-dir", out1}) == 0);
  CHECK(dispatch({"verify-approx", "--config", config, "--seed", "7", "--output-dir", out2}) == 0);
  CHECK(slurp(out1 + "/approx.csv") == slurp(out2 + "/approx.csv"));
  CHECK(fs::exists(out1 + "/resolved.cfg"));

  SECTION("flag overrides win over the config and are echoed") {
    const std::string out3 = (fs::temp_directory_path() / "ncf_cli_v3").string();
    CHECK(dispatch({"verify-approx", "--config", config, "--seed", "99", "--replicates", "60",
                    "--output-dir", out3}) == 0);
    const std::string resolved = slurp(out3 + "/resolved.cfg");
    CHECK(resolved.find("experiment.root_seed = 99") != std::string::npos);
    CHECK(resolved.find("experiment.replicates = 60") != std::string::npos);
  }
}

TEST_CASE("seed resolution precedence") {
  const std::string no_seed_cfg = write_test_config("noseed.cfg");
  const std::string out = (fs::temp_directory_path() / "ncf_cli_env").string();

  SECTION("environment seed is the fallback of last resort") {
    setenv("NCF_SEED", "4242", 1);
    CHECK(dispatch({"verify-approx", "--config", no_seed_cfg, "--output-dir", out}) == 0);
    CHECK(slurp(out + "/resolved.cfg").find("experiment.root_seed = 4242") != std::string::npos);
    unsetenv("NCF_SEED");
  }
  SECTION("config seed beats the environment") {
    const std::string with_seed = write_test_config("withseed.cfg", "experiment.root_seed = 11\n");
    setenv("NCF_SEED", "4242", 1);
    CHECK(dispatch({"verify-approx", "--config", with_seed, "--output-dir", out}) == 0);
    CHECK(slurp(out + "/resolved.cfg").find("experiment.root_seed = 11") != std::string::npos);
    unsetenv("NCF_SEED");
  }
}

TEST_CASE("combinatorics command reports the window counts") {
  const std::string config = write_test_config("comb.cfg");
  const std::string out = (fs::temp_directory_path() / "ncf_cli_comb").string();
  std::string shown;
  CHECK(dispatch({"combinatorics", "--config", config, "--d", "3", "--output-dir", out}, &shown) == 0);
  // interval 0..7 with delta_bar (1): n=8, n_bbar=3, N1=10, N2=card(-3..10)=14
  CHECK(shown.find("combinatorics_n,") != std::string::npos);
  const std::string csv = slurp(out + "/combinatorics.csv");
  CHECK(csv.find("combinatorics_N1,3,0,0,10") != std::string::npos);
  CHECK(csv.find("combinatorics_N2,3,0,0,14") != std::string::npos);
}

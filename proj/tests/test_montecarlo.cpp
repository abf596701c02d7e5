#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ncf/montecarlo.hpp"

using namespace ncf;

namespace {

mc::ExperimentPlan small_plan() {
  mc::ExperimentPlan plan;
  plan.model.kind = mc::ModelSpec::Kind::ar;
  plan.model.alpha_left = 0.2;
  plan.model.alpha_right = 0.2;
  plan.model.beta = 0.3;
  plan.innovations = Distribution::uniform(-1, 1);
  plan.statistic.kind = mc::StatisticSpec::Kind::risk_mean;
  plan.index.kind = mc::IndexSpec::Kind::interval;
  plan.index.lo = 0;
  plan.index.hi = 15;
  plan.d_grid = {0, 2, 4};
  plan.m_grid = {1, 2};
  plan.replicates = 200;
  plan.picard_iterations = 20;
  plan.swap_depth = 3;
  plan.deviation_depth = 3;
  plan.epsilon_grid = 6;
  return plan;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("plan validation") {
  mc::ExperimentPlan plan = small_plan();
  plan.replicates = 1;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan = small_plan();
  plan.d_grid.clear();
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan = small_plan();
  plan.swap_depth = 0;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan = small_plan();
  plan.reference_depth = 3;  // not above the d grid
  CHECK_THROWS_AS(mc::run_approx_decay(plan), std::invalid_argument);
}

TEST_CASE("approximation decay experiment") {
  const mc::ExperimentPlan plan = small_plan();
  const mc::ExperimentResult res = mc::run_approx_decay(plan);
  // per depth: fixed-point and aggregate rows per m, plus one almost-sure row
  CHECK(res.rows.size() == plan.d_grid.size() * (2 * plan.m_grid.size() + 1));
  CHECK(res.all_pass());
  for (const ResultRow& row : res.rows) {
    CHECK(row.stderr_est >= 0.0);
    CHECK(row.bound > 0.0);
  }
  SECTION("estimates decay with depth at fixed m") {
    double prev = 1e300;
    for (const ResultRow& row : res.rows)
      if (row.m == 2 && row.experiment == "approx_decay") {
        CHECK(row.estimate < prev + 3 * row.stderr_est);
        prev = row.estimate;
      }
  }
  SECTION("no spatial coupling, no truncation gap") {
    mc::ExperimentPlan degenerate = small_plan();
    degenerate.model.alpha_left = 0;
    degenerate.model.alpha_right = 0;
    const mc::ExperimentResult res2 = mc::run_approx_decay(degenerate);
    for (const ResultRow& row : res2.rows) CHECK(row.estimate == 0.0);
  }
}

TEST_CASE("swap sensitivity experiment") {
  const mc::ExperimentPlan plan = small_plan();
  const mc::ExperimentResult res = mc::run_swap_sensitivity(plan);
  CHECK(res.all_pass());

  bool saw_outside = false, saw_as = false;
  for (const ResultRow& row : res.rows) {
    if (row.experiment == "swap_h_outside") {
      saw_outside = true;
      CHECK(row.estimate == 0.0);
    }
    if (row.experiment == "swap_s_filling_as") saw_as = true;
  }
  CHECK(saw_outside);
  CHECK(saw_as);
}

TEST_CASE("deviation experiment") {
  SECTION("bounded innovations dominate the CCDF and exercise the aggregate bound") {
    const mc::ExperimentPlan plan = small_plan();
    const mc::ExperimentResult res = mc::run_deviation(plan);
    CHECK(res.all_pass());
    bool saw_tilde = false, saw_s = false;
    for (const ResultRow& row : res.rows) {
      if (row.experiment == "deviation_tilde") saw_tilde = true;
      if (row.experiment == "deviation_s") {
        saw_s = true;
        CHECK(row.epsilon >= row.threshold);
      }
    }
    CHECK(saw_tilde);
    CHECK(saw_s);
  }
  SECTION("deterministic innovations produce zero deviations") {
    mc::ExperimentPlan plan = small_plan();
    plan.innovations = Distribution::uniform(0.5, 0.5);
    const mc::ExperimentResult res = mc::run_deviation(plan);
    CHECK(res.all_pass());
    for (const ResultRow& row : res.rows) CHECK(row.estimate == 0.0);
  }
  SECTION("gaussian innovations skip the S rows and note the vacuous regime") {
    mc::ExperimentPlan plan = small_plan();
    plan.innovations = Distribution::gaussian(0, 1);
    plan.replicates = 100;
    const mc::ExperimentResult res = mc::run_deviation(plan);
    CHECK(res.all_pass());  // the vacuous bound 2 still dominates
    for (const ResultRow& row : res.rows) CHECK(row.experiment != "deviation_s");
    CHECK_FALSE(res.notes.empty());
  }
  SECTION("too few replicates degrade to a single probe with a note") {
    mc::ExperimentPlan plan = small_plan();
    plan.replicates = 8;
    const mc::ExperimentResult res = mc::run_deviation(plan);
    bool noted = false;
    for (const std::string& note : res.notes)
      noted = noted || note.find("too few replicates") != std::string::npos;
    CHECK(noted);
  }
}

TEST_CASE("determinism of the experiment engine") {
  const mc::ExperimentPlan plan = small_plan();

  SECTION("identical plans give identical rows") {
    const std::string a = csv_to_string(mc::run_approx_decay(plan).rows);
    const std::string b = csv_to_string(mc::run_approx_decay(plan).rows);
    CHECK(a == b);
  }
  SECTION("worker count does not change the emitted values") {
    mc::ExperimentPlan par = plan;
    par.workers = 2;
    CHECK(csv_to_string(mc::run_deviation(plan).rows) ==
          csv_to_string(mc::run_deviation(par).rows));
  }
  SECTION("a single replicate can be reproduced in isolation") {
    const mc::detail::Resolved rs = mc::detail::resolve(plan);
    const mc::ExperimentResult res = mc::run_deviation(plan);
    (void)res;
    const std::string id = "deviation" + rs.salt;
    InnovationSource src(rng::split_seed(plan.root_seed, id, 3), rs.dist, rs.model.value_dim());
    const StatisticEvaluator agg(rs.model, rs.statistic, rs.index, rs.cfg);
    const double isolated = agg.truncated(src, plan.deviation_depth);
    InnovationSource again(rng::split_seed(plan.root_seed, id, 3), rs.dist, rs.model.value_dim());
    CHECK(agg.truncated(again, plan.deviation_depth) == isolated);
  }
  SECTION("different models draw from unrelated streams") {
    mc::ExperimentPlan other = plan;
    other.model.alpha_left = 0.1;
    const mc::detail::Resolved a = mc::detail::resolve(plan);
    const mc::detail::Resolved b = mc::detail::resolve(other);
    CHECK(a.salt != b.salt);
    CHECK(rng::split_seed(1, "deviation" + a.salt, 0) != rng::split_seed(1, "deviation" + b.salt, 0));
  }
}

TEST_CASE("two-dimensional lattice experiments") {
  mc::ExperimentPlan plan;
  plan.model.kind = mc::ModelSpec::Kind::ar_lattice;
  plan.model.kappa = 2;
  plan.model.alpha = 0.4;
  plan.model.beta = 0.3;
  plan.innovations = Distribution::uniform(-1, 1);
  plan.statistic.kind = mc::StatisticSpec::Kind::risk_mean;
  plan.statistic.delta_bar = {1, 1};
  plan.index.kind = mc::IndexSpec::Kind::box;
  plan.index.box_lo = Coord{-1, -1};
  plan.index.box_hi = Coord{1, 1};
  plan.d_grid = {0, 2};
  plan.m_grid = {2};
  plan.replicates = 30;
  plan.picard_iterations = 12;
  plan.reference_depth = 8;
  plan.swap_depth = 2;
  plan.deviation_depth = 2;

  SECTION("approximation decay holds on the plane") {
    const mc::ExperimentResult res = mc::run_approx_decay(plan);
    CHECK(res.all_pass());
  }
  SECTION("swap sensitivities hold on the plane") {
    const mc::ExperimentResult res = mc::run_swap_sensitivity(plan);
    CHECK(res.all_pass());
    bool saw_shell2 = false;
    for (const ResultRow& row : res.rows)
      saw_shell2 = saw_shell2 || row.experiment == "swap_h_shell_c2";
    CHECK(saw_shell2);
  }
  SECTION("deviation dominance holds on the plane") {
    plan.replicates = 200;
    const mc::ExperimentResult res = mc::run_deviation(plan);
    CHECK(res.all_pass());
  }
}

TEST_CASE("three-dimensional smoke run") {
  mc::ExperimentPlan plan;
  plan.model.kind = mc::ModelSpec::Kind::ar_lattice;
  plan.model.kappa = 3;
  plan.model.alpha = 0.4;
  plan.model.beta = 0.3;
  plan.innovations = Distribution::uniform(-1, 1);
  plan.statistic.kind = mc::StatisticSpec::Kind::risk_mean;
  plan.statistic.delta_bar = {1, 1, 1};
  plan.index.kind = mc::IndexSpec::Kind::explicit_points;
  plan.index.points = {Coord{0, 0, 0}};
  plan.d_grid = {0, 1};
  plan.m_grid = {2};
  plan.replicates = 20;
  plan.picard_iterations = 8;
  plan.reference_depth = 6;
  plan.swap_depth = 2;
  plan.deviation_depth = 2;
  CHECK(mc::run_approx_decay(plan).all_pass());
}

TEST_CASE("run-all emits files and a verdict") {
  namespace fs = std::filesystem;
  const fs::path dir1 = fs::temp_directory_path() / "ncf_test_all_1";
  const fs::path dir2 = fs::temp_directory_path() / "ncf_test_all_2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  mc::ExperimentPlan plan = small_plan();
  plan.replicates = 60;
  plan.output_dir = dir1.string();
  const mc::RunAllResult r1 = mc::run_all(plan, "echo = 1\n");
  CHECK(r1.all_pass);
  CHECK(r1.results.size() == 3);
  for (const char* name : {"approx.csv", "swap.csv", "deviation.csv", "summary.txt", "resolved.cfg"})
    CHECK(fs::exists(dir1 / name));

  plan.output_dir = dir2.string();
  mc::run_all(plan, "echo = 1\n");
  for (const char* name : {"approx.csv", "swap.csv", "deviation.csv", "summary.txt"})
    CHECK(slurp((dir1 / name).string()) == slurp((dir2 / name).string()));

  SECTION("tiny replicate counts still run, flagged as weak") {
    mc::ExperimentPlan tiny = small_plan();
    tiny.replicates = 2;
    tiny.output_dir = (fs::temp_directory_path() / "ncf_test_all_tiny").string();
    const mc::RunAllResult rt = mc::run_all(tiny);
    bool noted = false;
    for (const auto& res : rt.results)
      for (const std::string& note : res.notes)
        noted = noted || note.find("below 100") != std::string::npos;
    CHECK(noted);
  }
}

TEST_CASE("csv helpers") {
  CHECK(format_g17(0.1) == "0.10000000000000001");
  CHECK(format_g17(1.0) == "1");

  std::vector<double> xs(1000);
  long double reference = 0.0L;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = 1.0 / static_cast<double>(i + 1);
    reference += static_cast<long double>(xs[i]);
  }
  CHECK(pairwise_sum(xs) == Catch::Approx(static_cast<double>(reference)).epsilon(1e-15));

  const std::vector<double> gaps{1.0, 2.0, 3.0, 4.0};
  const MeanSe m1 = mnorm_and_se(gaps, 1);
  CHECK(m1.mean == Catch::Approx(2.5));
  const MeanSe m2 = mnorm_and_se(gaps, 2);
  CHECK(m2.mean == Catch::Approx(std::sqrt(7.5)));
}

// Acceptance suite: one check per closed-form inequality or artifact contract,
// run at desk scale with every tolerance pinned in code. Each criterion
// prints a single PASS/FAIL line; the process exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ncf/cli.hpp"
#include "ncf/config.hpp"
#include "ncf/montecarlo.hpp"

using namespace ncf;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<bool(std::string&)> run;
};

// brute-force oracle, written independently of the library helper
long double oracle_power_sum(int kappa, double rho, long d) {
  long double acc = 0.0L;
  for (long c = 1; c <= d; ++c) {
    long double term = 1.0L;
    for (int i = 0; i < kappa - 1; ++i) term *= static_cast<long double>(c);
    long double p = 1.0L;
    for (long j = 0; j < c; ++j) p *= static_cast<long double>(rho);
    acc += term * p;
  }
  return acc;
}

bool rows_pass(const mc::ExperimentResult& res, const std::string& prefix, std::string& detail,
               int* counted = nullptr) {
  int n = 0;
  for (const ResultRow& row : res.rows) {
    if (row.experiment.rfind(prefix, 0) != 0) continue;
    ++n;
    if (!row.pass) {
      std::ostringstream msg;
      msg << row.experiment << " d=" << row.d << " m=" << row.m << " eps=" << row.epsilon
          << ": estimate " << row.estimate << " vs bound " << row.bound << " (+"
          << row.threshold << " budget, se " << row.stderr_est << ")";
      detail = msg.str();
      return false;
    }
  }
  if (counted) *counted = n;
  if (n == 0) {
    detail = "no rows matched prefix " + prefix;
    return false;
  }
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

mc::ExperimentPlan desk_plan() {
  mc::ExperimentPlan plan;
  plan.model.kind = mc::ModelSpec::Kind::ar;
  plan.model.alpha_left = 0.2;
  plan.model.alpha_right = 0.2;
  plan.model.beta = 0.3;
  plan.statistic.kind = mc::StatisticSpec::Kind::risk_mean;
  plan.statistic.delta_bar = {1};
  plan.index.kind = mc::IndexSpec::Kind::interval;
  plan.workers = 2;
  return plan;
}

// ---- criterion bodies ----------------------------------------------------

bool upsilon_dominance(std::string& detail) {
  for (int kappa = 1; kappa <= 3; ++kappa)
    for (int r = 1; r <= 9; ++r)
      for (long d = 0; d <= 50; ++d) {
        const double rho = 0.1 * r;
        const long double sum = oracle_power_sum(kappa, rho, d);
        const double u = upsilon(kappa, rho, d);
        if (static_cast<double>(sum) > u + 1e-12) {
          std::ostringstream msg;
          msg << "kappa=" << kappa << " rho=" << rho << " d=" << d << ": sum "
              << static_cast<double>(sum) << " > upsilon " << u;
          detail = msg.str();
          return false;
        }
      }
  return true;
}

bool upsilon_supremum(std::string& detail) {
  for (int kappa = 1; kappa <= 3; ++kappa)
    for (int r = 1; r <= 9; ++r) {
      const double rho = 0.1 * r;
      const double sup = upsilon_sup(kappa, rho);
      for (long d = 0; d <= 200; ++d)
        if (upsilon(kappa, rho, d) > sup + 1e-12) {
          std::ostringstream msg;
          msg << "kappa=" << kappa << " rho=" << rho << " d=" << d;
          detail = msg.str();
          return false;
        }
    }
  return true;
}

bool combinatorics_oracles(std::string& detail) {
  // window cardinalities and shell bounds, exhaustive small grid
  for (int kappa = 1; kappa <= 3; ++kappa) {
    std::vector<std::vector<std::int64_t>> width_sets;
    if (kappa == 1) width_sets = {{1}, {2}, {3}};
    if (kappa == 2) width_sets = {{1, 1}, {2, 1}, {2, 2}};
    if (kappa == 3) width_sets = {{1, 1, 1}, {2, 1, 1}};
    for (const auto& widths : width_sets) {
      Orthotope o(widths);
      const Coord center = Coord::zero(kappa);
      for (std::int64_t d = 0; d <= 4; ++d)
        if (o.cardinality(d) != o.points(d, center).size()) {
          detail = "cardinality != enumeration";
          return false;
        }
      const double n_b = static_cast<double>(o.cardinality(1));
      for (std::int64_t c = 1; c <= 20; ++c) {
        const double cap = n_b * kappa * std::pow(static_cast<double>(c), kappa - 1);
        if (static_cast<double>(o.shell(c, center).size()) > cap) {
          detail = "shell size bound violated";
          return false;
        }
      }
    }
  }
  // count chain on 200 randomized index sets
  std::uint64_t state = 20240817;
  auto next = [&state](std::uint64_t mod) {
    state = rng::splitmix64(state);
    return state % mod;
  };
  for (int rep = 0; rep < 200; ++rep) {
    const int kappa = 1 + static_cast<int>(next(3));
    std::vector<std::int64_t> widths;
    for (int i = 0; i < kappa; ++i) widths.push_back(static_cast<std::int64_t>(next(3)));
    Orthotope o(widths);
    const std::int64_t d = 1 + static_cast<std::int64_t>(next(5));
    std::vector<Coord> pts;
    for (std::size_t i = 0, n = 1 + next(18); i < n; ++i) {
      Coord p(kappa);
      for (int j = 0; j < kappa; ++j) p[j] = static_cast<std::int64_t>(next(25)) - 12;
      pts.push_back(p);
    }
    IndexSet index(std::move(pts));
    const std::uint64_t n = index.size();
    const std::uint64_t n1 = union_count(index, o, 1);
    const std::uint64_t n2 = union_count(index, o, d);
    if (!(n <= n1 && n1 <= n * o.cardinality(1) && n1 <= n2 && n2 <= n1 * o.cardinality(d))) {
      std::ostringstream msg;
      msg << "count chain violated at rep " << rep << ": n=" << n << " N1=" << n1 << " N2=" << n2;
      detail = msg.str();
      return false;
    }
  }
  return true;
}

bool picard_convergence(std::string& detail) {
  std::vector<std::pair<std::string, FieldModel>> models;
  models.emplace_back("ar(0.2,0.2,0.3)", ar_model(0.2, 0.2, 0.3));
  Matrix a(1, 2);
  a.at(0, 0) = 0.3;
  a.at(0, 1) = 0.3;
  models.emplace_back("brnn(0.3,0.3;tanh)", brnn_model(a, 0.3, Activation::tanh, 1));

  PicardConfig cfg;
  cfg.iterations = 14;
  for (const auto& [name, model] : models) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      InnovationSource src(seed, Distribution::gaussian(0, 1));
      const std::vector<double> res =
          picard_residuals(model, FieldView::exact(src), Coord{0}, cfg);
      for (std::size_t k = 1; k < res.size(); ++k) {
        if (res[k - 1] == 0.0) continue;
        const double ratio = res[k] / res[k - 1];
        if (ratio > model.rho() + 0.05) {
          std::ostringstream msg;
          msg << name << " seed " << seed << " step " << k + 1 << ": ratio " << ratio
              << " > rho + 0.05 = " << model.rho() + 0.05;
          detail = msg.str();
          return false;
        }
      }
    }
  }
  return true;
}

bool approx_decay(std::string& detail) {
  mc::ExperimentPlan plan = desk_plan();
  plan.innovations = Distribution::gaussian(0, 1);
  plan.index.hi = 7;  // the fixed-point rows carry this criterion
  plan.d_grid = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  plan.m_grid = {2};
  plan.replicates = 10000;
  plan.picard_iterations = 32;
  plan.reference_depth = 24;
  plan.root_seed = 117;
  return rows_pass(mc::run_approx_decay(plan), "approx_decay", detail);
}

bool swap_sensitivity(std::string& detail) {
  mc::ExperimentPlan plan = desk_plan();
  plan.innovations = Distribution::uniform(-1, 1);  // bounded, finite V_inf
  plan.index.hi = 15;
  plan.d_grid = {0, 2};
  plan.m_grid = {1, 2};
  plan.replicates = 10000;
  plan.picard_iterations = 32;
  plan.reference_depth = 24;
  plan.swap_depth = 4;
  plan.root_seed = 118;
  return rows_pass(mc::run_swap_sensitivity(plan), "swap_", detail);
}

bool statistic_approximation(std::string& detail) {
  mc::ExperimentPlan plan = desk_plan();
  plan.innovations = Distribution::gaussian(0, 1);
  plan.index.hi = 63;  // n = 64
  plan.d_grid = {0, 2, 4};
  plan.m_grid = {1};
  plan.replicates = 4000;
  plan.picard_iterations = 32;
  plan.reference_depth = 24;
  plan.root_seed = 119;
  return rows_pass(mc::run_approx_decay(plan), "approx_statistic", detail);
}

bool deviation_dominance(std::string& detail) {
  mc::ExperimentPlan plan = desk_plan();
  plan.innovations = Distribution::uniform(-1, 1);
  plan.index.hi = 63;  // n = 64
  plan.deviation_depth = 4;
  plan.replicates = 20000;
  plan.picard_iterations = 28;
  plan.reference_depth = 26;
  plan.d_grid = {0, 2, 4};
  plan.epsilon_grid = 12;
  plan.root_seed = 120;
  const mc::ExperimentResult res = mc::run_deviation(plan);
  int n_tilde = 0, n_s = 0;
  if (!rows_pass(res, "deviation_tilde", detail, &n_tilde)) return false;
  if (!rows_pass(res, "deviation_s", detail, &n_s)) return false;
  if (n_tilde < 10 || n_s < 2) {
    detail = "expected a populated epsilon grid for both statistics";
    return false;
  }
  return true;
}

bool reproducibility(std::string& detail) {
  mc::ExperimentPlan plan = desk_plan();
  plan.innovations = Distribution::uniform(-1, 1);
  plan.index.hi = 15;
  plan.d_grid = {0, 2};
  plan.m_grid = {1};
  plan.replicates = 300;
  plan.picard_iterations = 24;
  plan.reference_depth = 18;
  plan.root_seed = 121;

  const fs::path base = fs::temp_directory_path() / "ncf_acceptance_repro";
  fs::remove_all(base);
  const char* files[] = {"approx.csv", "swap.csv", "deviation.csv"};

  plan.output_dir = (base / "a").string();
  mc::run_all(plan);
  plan.output_dir = (base / "b").string();
  mc::run_all(plan);
  for (const char* f : files)
    if (slurp(base / "a" / f) != slurp(base / "b" / f)) {
      detail = std::string("rerun not byte-identical: ") + f;
      return false;
    }

  plan.workers = 1;
  plan.output_dir = (base / "w1").string();
  mc::run_all(plan);
  for (const char* f : files) {
    // value-identity across worker counts within 1e-12
    std::istringstream a(slurp(base / "a" / f)), w(slurp(base / "w1" / f));
    std::string la, lw;
    std::getline(a, la);
    std::getline(w, lw);
    while (std::getline(a, la) && std::getline(w, lw)) {
      const auto va = cfg::Config::split(la, ',');
      const auto vw = cfg::Config::split(lw, ',');
      if (va.size() != vw.size()) {
        detail = std::string("row shape differs across worker counts: ") + f;
        return false;
      }
      for (std::size_t i = 3; i < va.size() - 1; ++i) {
        const double xa = std::stod(va[i]);
        const double xw = std::stod(vw[i]);
        if (std::abs(xa - xw) > 1e-12 * std::max(1.0, std::abs(xa))) {
          detail = std::string("values differ across worker counts: ") + f;
          return false;
        }
      }
    }
  }
  return true;
}

bool negative_controls(std::string& detail) {
  bool threw = false;
  try {
    (void)ar_model(0.5, 0.5, 0.1);  // rho + eta = 1.1
  } catch (const std::invalid_argument&) {
    threw = true;
  }
  if (!threw) {
    detail = "non-contractive ar model was not rejected";
    return false;
  }

  threw = false;
  try {
    Matrix a(1, 2);
    a.at(0, 0) = 0.9;
    (void)brnn_model(a, 0.2, Activation::tanh, 1);  // ||A|| + beta = 1.1
  } catch (const std::invalid_argument&) {
    threw = true;
  }
  if (!threw) {
    detail = "non-contractive brnn model was not rejected";
    return false;
  }

  const LipschitzCheckReport rep =
      check_lipschitz_separable(cubic_center_statistic(Orthotope({1})), 3000, 0.5);
  if (rep.pass) {
    detail = "cubic statistic slipped through the Lipschitz check";
    return false;
  }
  if (!check_lipschitz_separable(sum_statistic(Orthotope({1})), 3000, 0.5).pass) {
    detail = "linear statistic failed the Lipschitz check";
    return false;
  }
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "upsilon dominates the brute-force shell sum (kappa<=3, rho grid, d<=50)", 1.0,
       upsilon_dominance},
      {2, "upsilon stays below its d-free supremum (d<=200)", 1.0, upsilon_supremum},
      {3, "combinatorics oracles: cardinalities, shells, count chain on 200 index sets", 5.0,
       combinatorics_oracles},
      {4, "geometric fixed-point convergence, ar and brnn, 100 seeded runs", 10.0,
       picard_convergence},
      {5, "fixed-point truncation decay <= rho^(d+1) V_2 (R=10^4, d<=8)", 120.0, approx_decay},
      {6, "swap sensitivities: shell, filling and aggregate bounds (bounded innovations)", 120.0,
       swap_sensitivity},
      {7, "aggregate truncation error <= n n_bbar rho^(d+1) V_1 (n=64, d in {0,2,4})", 180.0,
       statistic_approximation},
      {8, "deviation CCDF below the closed-form bounds (R=2*10^4, n=64, d=4)", 600.0,
       deviation_dominance},
      {9, "byte-identical reruns; value-identical across worker counts", 120.0, reproducibility},
      {10, "negative controls: contraction gate and Lipschitz check reject bad inputs", 30.0,
       negative_controls},
  };

  int failures = 0;
  double total = 0.0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    total += seconds;
    if (ok && seconds > c.budget_seconds) {
      ok = false;
      detail = "runtime budget exceeded";
    }
    failures += ok ? 0 : 1;
    std::printf("[%s] %2d. %s (%.2fs, budget %.0fs)\n", ok ? "PASS" : "FAIL", c.id,
                c.title.c_str(), seconds, c.budget_seconds);
    if (!ok) std::printf("       %s\n", detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %zu/%zu criteria passed (%.1fs total)\n", criteria.size() - failures,
              criteria.size(), total);
  return failures == 0 ? 0 : 1;
}

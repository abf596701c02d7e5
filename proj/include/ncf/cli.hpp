#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncf/config.hpp"
#include "ncf/montecarlo.hpp"

namespace ncf::cli {

struct SelfcheckItem {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SelfcheckReport {
  std::vector<SelfcheckItem> items;
  bool all_pass() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
};

/// Fast invariant suite: closed-form dominance grids, combinatorics oracles
/// and fixed-point convergence, all in well under a minute. The corrupt flag
/// deliberately miscomputes the dominance target and exists as a negative
/// control for the harness itself.
inline SelfcheckReport selfcheck(bool corrupt_upsilon = false) {
  SelfcheckReport rep;

  {
    SelfcheckItem item;
    item.name = "upsilon-dominance";
    item.pass = true;
    for (int kappa = 1; kappa <= 3 && item.pass; ++kappa)
      for (int r = 1; r <= 9 && item.pass; ++r)
        for (std::int64_t d = 0; d <= 50; ++d) {
          const double rho = 0.1 * r;
          double u = upsilon(kappa, rho, d);
          if (corrupt_upsilon) u *= 0.25;
          if (power_decay_sum(kappa, rho, d) > u + 1e-12) {
            item.pass = false;
            item.detail = "violated at kappa=" + std::to_string(kappa) +
                          " rho=" + std::to_string(rho) + " d=" + std::to_string(d);
            break;
          }
        }
    rep.items.push_back(item);
  }

  {
    SelfcheckItem item;
    item.name = "upsilon-supremum";
    item.pass = true;
    for (int kappa = 1; kappa <= 3 && item.pass; ++kappa)
      for (int r = 1; r <= 9 && item.pass; ++r) {
        const double rho = 0.1 * r;
        const double sup = upsilon_sup(kappa, rho);
        for (std::int64_t d = 0; d <= 200; ++d)
          if (upsilon(kappa, rho, d) > sup + 1e-12) {
            item.pass = false;
            item.detail = "kappa=" + std::to_string(kappa) + " rho=" + std::to_string(rho) +
                          " d=" + std::to_string(d);
            break;
          }
      }
    rep.items.push_back(item);
  }

  {
    SelfcheckItem item;
    item.name = "combinatorics-oracles";
    item.pass = true;
    std::uint64_t state = 2024;
    auto next = [&state](std::uint64_t mod) {
      state = rng::splitmix64(state);
      return state % mod;
    };
    for (int rep_i = 0; rep_i < 40 && item.pass; ++rep_i) {
      const int kappa = 1 + static_cast<int>(next(3));
      std::vector<std::int64_t> widths;
      for (int i = 0; i < kappa; ++i) widths.push_back(static_cast<std::int64_t>(next(3)));
      Orthotope o(widths);
      const std::int64_t d = 1 + static_cast<std::int64_t>(next(4));
      if (o.cardinality(d) != o.points(d, Coord::zero(kappa)).size()) {
        item.pass = false;
        item.detail = "cardinality mismatch";
        break;
      }
      const double n_b = static_cast<double>(o.cardinality(1));
      for (std::int64_t c = 1; c <= d; ++c) {
        const double cap = n_b * kappa * std::pow(static_cast<double>(c), kappa - 1);
        if (static_cast<double>(o.shell(c, Coord::zero(kappa)).size()) > cap) {
          item.pass = false;
          item.detail = "shell bound violated";
          break;
        }
      }
      std::vector<Coord> pts;
      for (std::size_t i = 0, n = 1 + next(10); i < n; ++i) {
        Coord p(kappa);
        for (int j = 0; j < kappa; ++j) p[j] = static_cast<std::int64_t>(next(15)) - 7;
        pts.push_back(p);
      }
      IndexSet index(std::move(pts));
      const auto n1 = union_count(index, o, 1);
      const auto n2 = union_count(index, o, d);
      if (!(index.size() <= n1 && n1 <= index.size() * o.cardinality(1) && n1 <= n2 &&
            n2 <= n1 * o.cardinality(d))) {
        item.pass = false;
        item.detail = "count chain violated";
      }
    }
    rep.items.push_back(item);
  }

  {
    SelfcheckItem item;
    item.name = "picard-convergence";
    item.pass = true;
    const FieldModel model = ar_model(0.2, 0.2, 0.3);
    PicardConfig cfg;
    cfg.iterations = 14;
    for (std::uint64_t seed = 0; seed < 20 && item.pass; ++seed) {
      InnovationSource src(seed, Distribution::gaussian(0, 1));
      const auto res =
          picard_residuals(model, FieldView::exact(src), Coord{0}, cfg);
      for (std::size_t k = 1; k < res.size(); ++k) {
        if (res[k - 1] == 0.0) continue;
        if (res[k] / res[k - 1] > model.rho() + 0.05) {
          item.pass = false;
          item.detail = "residual ratio above rho at seed " + std::to_string(seed);
          break;
        }
      }
    }
    if (item.pass) {
      InnovationSource ones(1, Distribution::uniform(1, 1));
      PicardConfig deep;
      deep.iterations = 24;
      const double x = picard_evaluate(model, FieldView::exact(ones), Coord{0}, deep).v[0];
      if (std::abs(x - 0.5) > 1e-8) {
        item.pass = false;
        item.detail = "constant-innovation fixed point off: " + std::to_string(x);
      }
    }
    rep.items.push_back(item);
  }

  return rep;
}

namespace detail {

inline std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                                  const cfg::Config* config, std::uint64_t fallback) {
  if (flag_seed) return *flag_seed;
  if (config && config->has("experiment.root_seed"))
    return static_cast<std::uint64_t>(config->get_int("experiment.root_seed", 1));
  if (const char* env = std::getenv("NCF_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw cfg::ConfigError(std::string("NCF_SEED is not an integer: ") + env);
    }
  }
  return fallback;
}

inline void print_rows(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << csv_header();
  os << csv_to_string(rows).substr(std::string(csv_header()).size());
}

struct CommonOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replicates;
  std::optional<std::string> output_dir;
  std::optional<int> workers;
};

inline mc::ExperimentPlan load_plan(const std::string& config_path, const CommonOverrides& ov) {
  cfg::Config config = cfg::Config::parse_file(config_path);
  mc::ExperimentPlan plan = cfg::plan_from_config(config);
  plan.root_seed = resolve_seed(ov.seed, &config, plan.root_seed);
  if (ov.replicates) plan.replicates = *ov.replicates;
  if (ov.output_dir) plan.output_dir = *ov.output_dir;
  if (ov.workers) plan.workers = *ov.workers;
  plan.validate();
  return plan;
}

inline int emit_experiment(const mc::ExperimentPlan& plan, const mc::ExperimentResult& result,
                           const std::string& csv_name) {
  namespace fs = std::filesystem;
  fs::create_directories(plan.output_dir);
  write_csv(plan.output_dir + "/" + csv_name, result.rows);
  {
    std::ofstream f(plan.output_dir + "/resolved.cfg", std::ios::binary);
    f << cfg::render_plan(plan);
  }
  print_rows(std::cout, result.rows);
  for (const std::string& note : result.notes) std::cerr << "note: " << note << "\n";
  std::cout << result.name << ": " << (result.all_pass() ? "PASS" : "FAIL") << "\n";
  return result.all_pass() ? 0 : 1;
}

}  // namespace detail

/// Entry point behind main(): parses the command line, dispatches, maps
/// outcomes to exit codes (0 success, 1 failed verdict, 2 usage/config
/// error). Diagnostics go to stderr; stdout carries only the summary table.
inline int parse_and_dispatch(int argc, const char* const* argv) {
  CLI::App app{"simulation and verification toolkit for non-causal lattice fields"};
  app.require_subcommand(1);
  app.set_help_flag();
  app.set_help_all_flag("--help,-h", "print the full flag reference");
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "echo the resolved configuration to stderr");

  // ---- bound ----------------------------------------------------------
  auto* bound_cmd = app.add_subcommand("bound", "evaluate one closed-form bound quantity");
  std::string quantity = "upsilon";
  bound_cmd->add_option("--quantity", quantity,
                        "one of: upsilon, upsilon-sup, approx, approx-as, deviation-tilde, "
                        "deviation-s, normalized, legacy, recommend-d");
  BoundParams bp;
  double opt_eps = 1.0;
  int opt_m = 2;
  std::string bound_outdir = "ncf-out";
  bound_cmd->add_option("--kappa", bp.kappa, "lattice dimension");
  bound_cmd->add_option("--rho", bp.rho, "contraction modulus in (0,1)");
  std::int64_t opt_d = 1;
  bound_cmd->add_option("--d", opt_d, "truncation depth");
  bound_cmd->add_option("--epsilon", opt_eps, "deviation level");
  bound_cmd->add_option("--m", opt_m, "moment order");
  std::uint64_t opt_n = 64, opt_nb = 3, opt_nbbar = 3, opt_nd = 9, opt_n1 = 66, opt_n2 = 72;
  bound_cmd->add_option("--n", opt_n, "index-set size");
  bound_cmd->add_option("--n-b", opt_nb, "model stencil cardinality");
  bound_cmd->add_option("--n-bbar", opt_nbbar, "statistic stencil cardinality");
  bound_cmd->add_option("--n-d", opt_nd, "truncation window cardinality");
  bound_cmd->add_option("--N1", opt_n1, "union of statistic windows");
  bound_cmd->add_option("--N2", opt_n2, "union of truncation windows");
  double opt_vm = 1.0, opt_vinf = 1.0;
  bound_cmd->add_option("--vm", opt_vm, "difference moment V_m");
  bound_cmd->add_option("--vinf", opt_vinf, "difference moment supremum V_inf");
  bound_cmd->add_option("--output-dir", bound_outdir, "directory for bounds.csv");

  // ---- combinatorics --------------------------------------------------
  auto* comb_cmd = app.add_subcommand("combinatorics", "window and union cardinalities");
  std::string comb_config;
  std::int64_t comb_d = 4;
  std::string comb_outdir = "ncf-out";
  comb_cmd->add_option("--config", comb_config, "experiment config file")->required();
  comb_cmd->add_option("--d", comb_d, "truncation depth");
  comb_cmd->add_option("--output-dir", comb_outdir, "directory for combinatorics.csv");

  // ---- verification commands -----------------------------------------
  detail::CommonOverrides ov;
  std::string config_path;
  auto add_verify = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", config_path, "experiment config file")->required();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&ov](const std::uint64_t& s) { ov.seed = s; }, "root seed override");
    cmd->add_option_function<std::int64_t>(
        "--replicates", [&ov](const std::int64_t& r) { ov.replicates = r; },
        "replicate count override");
    cmd->add_option_function<std::string>(
        "--output-dir", [&ov](const std::string& o) { ov.output_dir = o; },
        "output directory override");
    cmd->add_option_function<int>(
        "--workers", [&ov](const int& w) { ov.workers = w; }, "worker thread count");
    return cmd;
  };
  auto* approx_cmd = add_verify("verify-approx", "truncation decay of the fixed point");
  auto* swap_cmd = add_verify("verify-swap", "single-swap sensitivity bounds");
  auto* dev_cmd = add_verify("verify-deviation", "deviation bounds against the empirical CCDF");
  auto* all_cmd = add_verify("run-all", "all verification experiments");

  // ---- selfcheck ------------------------------------------------------
  auto* self_cmd = app.add_subcommand("selfcheck", "fast invariant suite");
  bool corrupt = false;
  self_cmd->add_flag("--corrupt-upsilon", corrupt,
                     "negative control: corrupt the dominance target (must FAIL)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::stringstream msg;
    const int rc = app.exit(e, msg, msg);
    (void)rc;
    std::cerr << msg.str();
    return 2;
  }

  try {
    if (bound_cmd->parsed()) {
      bp.d = opt_d;
      bp.n = opt_n;
      bp.n_b = opt_nb;
      bp.n_bbar = opt_nbbar;
      bp.n_d = opt_nd;
      bp.big_n1 = opt_n1;
      bp.big_n2 = opt_n2;
      bp.v_m = opt_vm;
      bp.v_inf = opt_vinf;
      ResultRow row;
      row.experiment = "bound_" + quantity;
      row.d = bp.d;
      row.m = opt_m;
      row.epsilon = opt_eps;
      if (quantity == "upsilon") {
        row.estimate = upsilon(bp.kappa, bp.rho, bp.d);
      } else if (quantity == "upsilon-sup") {
        row.estimate = upsilon_sup(bp.kappa, bp.rho);
      } else if (quantity == "approx") {
        row.estimate = approx_error_bound(bp, opt_m, opt_vm).value;
      } else if (quantity == "approx-as") {
        row.estimate = approx_error_bound_as(bp).value;
      } else if (quantity == "deviation-tilde") {
        const BoundReport r = deviation_bound_tilde(opt_eps, bp);
        row.estimate = r.value;
        row.bound = r.clamped;
      } else if (quantity == "deviation-s") {
        const BoundReport r = deviation_bound_s(opt_eps, bp);
        row.estimate = r.value;
        row.bound = r.clamped;
        row.threshold = r.threshold;
        row.pass = r.valid;
      } else if (quantity == "normalized") {
        const BoundReport r = normalized_bound(opt_eps, bp);
        row.estimate = r.value;
        row.bound = r.clamped;
        row.threshold = r.threshold;
        row.pass = r.valid;
      } else if (quantity == "legacy") {
        const BoundReport r = legacy_deviation_bound(opt_eps, bp);
        row.estimate = r.value;
        row.bound = r.clamped;
      } else if (quantity == "recommend-d") {
        row.estimate = static_cast<double>(recommend_d(bp.n, bp.kappa));
      } else {
        std::cerr << "unknown bound quantity: " << quantity << "\n";
        return 2;
      }
      std::filesystem::create_directories(bound_outdir);
      const std::vector<ResultRow> rows{row};
      write_csv(bound_outdir + "/bounds.csv", rows);
      detail::print_rows(std::cout, rows);
      return 0;
    }

    if (comb_cmd->parsed()) {
      const cfg::Config config = cfg::Config::parse_file(comb_config);
      const mc::ExperimentPlan plan = cfg::plan_from_config(config);
      const FieldModel model = plan.model.build();
      const Orthotope bar = plan.statistic.window();
      const IndexSet index = plan.index.build();
      auto make_row = [&](const std::string& name, std::uint64_t v) {
        ResultRow row;
        row.experiment = "combinatorics_" + name;
        row.d = comb_d;
        row.estimate = static_cast<double>(v);
        return row;
      };
      std::vector<ResultRow> rows;
      rows.push_back(make_row("n", index.size()));
      rows.push_back(make_row("n_b", model.neighborhood().cardinality(1)));
      rows.push_back(make_row("n_bbar", bar.cardinality(1)));
      rows.push_back(make_row("n_d", bar.cardinality(comb_d)));
      rows.push_back(make_row("N1", union_count(index, bar, 1)));
      rows.push_back(make_row("N2", union_count(index, bar, comb_d)));
      std::filesystem::create_directories(comb_outdir);
      write_csv(comb_outdir + "/combinatorics.csv", rows);
      detail::print_rows(std::cout, rows);
      return 0;
    }

    if (approx_cmd->parsed()) {
      const mc::ExperimentPlan plan = detail::load_plan(config_path, ov);
      if (verbose) std::cerr << cfg::render_plan(plan);
      return detail::emit_experiment(plan, mc::run_approx_decay(plan), "approx.csv");
    }
    if (swap_cmd->parsed()) {
      const mc::ExperimentPlan plan = detail::load_plan(config_path, ov);
      if (verbose) std::cerr << cfg::render_plan(plan);
      return detail::emit_experiment(plan, mc::run_swap_sensitivity(plan), "swap.csv");
    }
    if (dev_cmd->parsed()) {
      const mc::ExperimentPlan plan = detail::load_plan(config_path, ov);
      if (verbose) std::cerr << cfg::render_plan(plan);
      return detail::emit_experiment(plan, mc::run_deviation(plan), "deviation.csv");
    }

    if (all_cmd->parsed()) {
      const mc::ExperimentPlan plan = detail::load_plan(config_path, ov);
      if (verbose) std::cerr << cfg::render_plan(plan);
      const mc::RunAllResult result = mc::run_all(plan, cfg::render_plan(plan));
      for (const mc::ExperimentResult& res : result.results) {
        detail::print_rows(std::cout, res.rows);
        for (const std::string& note : res.notes) std::cerr << "note: " << note << "\n";
        std::cout << res.name << ": " << (res.all_pass() ? "PASS" : "FAIL") << "\n";
      }
      std::cout << "verdict: " << (result.all_pass ? "PASS" : "FAIL") << "\n";
      return result.all_pass ? 0 : 1;
    }

    if (self_cmd->parsed()) {
      const SelfcheckReport rep = selfcheck(corrupt);
      for (const SelfcheckItem& item : rep.items) {
        std::cout << (item.pass ? "PASS" : "FAIL") << " " << item.name;
        if (!item.detail.empty()) std::cout << " (" << item.detail << ")";
        std::cout << "\n";
      }
      std::cout << "selfcheck: " << (rep.all_pass() ? "PASS" : "FAIL") << "\n";
      return rep.all_pass() ? 0 : 1;
    }
  } catch (const cfg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace ncf::cli

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/innovations.hpp"
#include "ncf/lattice.hpp"
#include "ncf/model.hpp"
#include "ncf/vec.hpp"

namespace ncf {

/// A statistic of one field neighborhood. `phi` receives the values at the
/// window offsets in lexicographic order (center included).
struct SeparableStatistic {
  Orthotope window;               // the statistic's own neighborhood
  std::vector<Coord> offsets;     // lex points of the window, cached
  std::function<double(std::span<const Value>)> phi;
  bool lipschitz_certified = true;
  std::string name;

  SeparableStatistic(Orthotope w, std::function<double(std::span<const Value>)> f,
                     bool certified, std::string n)
      : window(std::move(w)),
        offsets(window.points(1, Coord::zero(window.kappa()))),
        phi(std::move(f)),
        lipschitz_certified(certified),
        name(std::move(n)) {}

  std::size_t center_index() const {
    const Coord zero = Coord::zero(window.kappa());
    for (std::size_t i = 0; i < offsets.size(); ++i)
      if (offsets[i] == zero) return i;
    throw std::logic_error("statistic window has no center");
  }
};

/// Prediction setup: a per-neighborhood predictor and a cost, both expected
/// 1-Lipschitz per coordinate. The predictor sees the neighborhood values in
/// lexicographic offset order; the center is excluded unless include_center.
struct PredictionLoss {
  std::function<Value(std::span<const Value>)> predictor;
  std::function<double(const Value&, const Value&)> cost;
  bool include_center = false;
  std::string name;
};

inline PredictionLoss zero_predictor_loss(int value_dim) {
  PredictionLoss loss;
  loss.predictor = [value_dim](std::span<const Value>) { return Value(value_dim); };
  loss.cost = [](const Value& p, const Value& t) { return (p - t).norm(); };
  loss.name = "zero/abs";
  return loss;
}

inline PredictionLoss mean_predictor_loss(int value_dim) {
  PredictionLoss loss;
  loss.predictor = [value_dim](std::span<const Value> nb) {
    Value acc(value_dim);
    for (const Value& v : nb) acc += v;
    if (!nb.empty()) acc *= 1.0 / static_cast<double>(nb.size());
    return acc;
  };
  loss.cost = [](const Value& p, const Value& t) { return (p - t).norm(); };
  loss.name = "mean/abs";
  return loss;
}

/// Linear predictor sum_j w_j * x_j over the (possibly center-less) argument
/// vector; with the model's own coefficients this is the plug-in oracle.
inline PredictionLoss linear_predictor_loss(std::vector<double> weights, int value_dim) {
  PredictionLoss loss;
  loss.predictor = [w = std::move(weights), value_dim](std::span<const Value> nb) {
    if (nb.size() != w.size()) throw std::invalid_argument("linear predictor: weight count mismatch");
    Value acc(value_dim);
    for (std::size_t j = 0; j < nb.size(); ++j) acc += w[j] * nb[j];
    return acc;
  };
  loss.cost = [](const Value& p, const Value& t) { return (p - t).norm(); };
  loss.name = "linear/abs";
  return loss;
}

/// Wraps a prediction loss into a window statistic; the aggregate divided by
/// the index-set size is the empirical prediction risk.
inline SeparableStatistic make_risk_statistic(const PredictionLoss& loss, const Orthotope& window) {
  const Orthotope w = window;
  std::vector<Coord> offsets = w.points(1, Coord::zero(w.kappa()));
  std::size_t center = 0;
  for (std::size_t i = 0; i < offsets.size(); ++i)
    if (offsets[i] == Coord::zero(w.kappa())) center = i;
  const bool include_center = loss.include_center;
  auto predictor = loss.predictor;
  auto cost = loss.cost;
  auto phi = [predictor, cost, center, include_center](std::span<const Value> vals) {
    if (include_center) return cost(predictor(vals), vals[center]);
    std::vector<Value> args;
    args.reserve(vals.size() - 1);
    for (std::size_t i = 0; i < vals.size(); ++i)
      if (i != center) args.push_back(vals[i]);
    return cost(predictor(args), vals[center]);
  };
  return SeparableStatistic(w, std::move(phi), true, "risk[" + loss.name + "]");
}

inline SeparableStatistic center_value_statistic(const Orthotope& window) {
  SeparableStatistic s(window, nullptr, true, "center");
  const std::size_t c = s.center_index();
  s.phi = [c](std::span<const Value> vals) { return vals[c].v[0]; };
  return s;
}

inline SeparableStatistic sum_statistic(const Orthotope& window) {
  return SeparableStatistic(
      window,
      [](std::span<const Value> vals) {
        double acc = 0.0;
        for (const Value& v : vals) acc += v.v[0];
        return acc;
      },
      true, "sum");
}

inline SeparableStatistic max_statistic(const Orthotope& window) {
  return SeparableStatistic(
      window,
      [](std::span<const Value> vals) {
        double m = vals[0].v[0];
        for (const Value& v : vals) m = std::max(m, v.v[0]);
        return m;
      },
      true, "max");
}

/// Deliberately non-Lipschitz statistic, used as a negative control.
inline SeparableStatistic cubic_center_statistic(const Orthotope& window) {
  SeparableStatistic s(window, nullptr, false, "cubic_center");
  const std::size_t c = s.center_index();
  s.phi = [c](std::span<const Value> vals) {
    const double x = vals[c].v[0];
    return x * x * x;
  };
  return s;
}

/// Shared machinery for the aggregate statistic over an index set. The field
/// value used at site u is always the fixed point of u's own truncated view,
/// so the exact aggregate, its depth-d approximation and the single-swap
/// variant differ only in the views they hand to the same evaluator.
class StatisticEvaluator {
 public:
  StatisticEvaluator(const FieldModel& model, const SeparableStatistic& stat,
                     const IndexSet& index, const PicardConfig& cfg)
      : model_(&model), stat_(&stat), index_(&index), cfg_(cfg),
        pyramid_(model, cfg, {Coord::zero(model.kappa())}) {
    if (index.empty()) throw std::invalid_argument("StatisticEvaluator: empty index set");
    if (stat.window.kappa() != model.kappa())
      throw std::invalid_argument("StatisticEvaluator: window dimension mismatch");
    CoordSet seen;
    for (const Coord& s : index.points())
      for (const Coord& off : stat.offsets) seen.insert(s + off);
    sites_.assign(seen.begin(), seen.end());
    std::sort(sites_.begin(), sites_.end());
    site_slot_.reserve(sites_.size() * 2);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(sites_.size()); ++i)
      site_slot_.emplace(sites_[static_cast<std::size_t>(i)], i);
  }

  const std::vector<Coord>& evaluated_sites() const { return sites_; }

  /// Aggregate with per-site truncated views at the given depth.
  double truncated(const InnovationSource& src, std::int64_t depth) const {
    return aggregate([&](const Coord& u) {
      return FieldView::truncated(src, model_->neighborhood(), u, depth);
    });
  }

  /// Same aggregate with exactly one enumerated variable replaced.
  double swapped(const InnovationSource& src, std::int64_t depth, const SwapVariable& swap) const {
    return aggregate([&](const Coord& u) {
      return FieldView::swapped(src, model_->neighborhood(), u, depth, swap);
    });
  }

 private:
  template <typename ViewFor>
  double aggregate(ViewFor&& view_for) const {
    std::vector<Value> field(sites_.size());
    for (std::size_t i = 0; i < sites_.size(); ++i)
      field[i] = pyramid_.evaluate(view_for(sites_[i]), sites_[i]).front();

    std::vector<Value> args(stat_->offsets.size(), Value(model_->value_dim()));
    double acc = 0.0;
    for (const Coord& s : index_->points()) {
      for (std::size_t j = 0; j < stat_->offsets.size(); ++j)
        args[j] = field[static_cast<std::size_t>(site_slot_.at(s + stat_->offsets[j]))];
      acc += stat_->phi(args);
    }
    return acc;
  }

  const FieldModel* model_;
  const SeparableStatistic* stat_;
  const IndexSet* index_;
  PicardConfig cfg_;
  PicardEvaluator pyramid_;
  std::vector<Coord> sites_;
  std::unordered_map<Coord, std::int32_t, CoordHash> site_slot_;
};

/// Reference value of the aggregate: per-site views truncated at a reference
/// depth deep enough that the residual truncation bias is inside the caller's
/// error budget (the exact field itself is not finitely computable).
inline double exact_statistic(const SeparableStatistic& stat, const FieldModel& model,
                              const InnovationSource& src, const IndexSet& index,
                              std::int64_t reference_depth, const PicardConfig& cfg) {
  return StatisticEvaluator(model, stat, index, cfg).truncated(src, reference_depth);
}

inline double truncated_statistic(const SeparableStatistic& stat, const FieldModel& model,
                                  const InnovationSource& src, const IndexSet& index,
                                  std::int64_t depth, const PicardConfig& cfg) {
  return StatisticEvaluator(model, stat, index, cfg).truncated(src, depth);
}

/// Single-swap aggregate; the swap index must belong to the enumeration.
inline double swapped_statistic(const SeparableStatistic& stat, const FieldModel& model,
                                const InnovationSource& src, const IndexSet& index,
                                std::int64_t depth, const SwapIndexSet& vars, std::size_t i,
                                const PicardConfig& cfg) {
  return StatisticEvaluator(model, stat, index, cfg).swapped(src, depth, vars.variable(i));
}

struct LipschitzCheckReport {
  bool pass = false;
  double lhs = 0.0;       // mean |phi(U) - phi(V)|
  double rhs = 0.0;       // mean sum_t ||U_t - V_t||
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  std::int64_t trials = 0;
};

/// Empirical check of the separable Lipschitz inequality at m = 1. Coupled
/// neighborhood pairs are sampled from a centered gaussian and perturbed one
/// coordinate at a time, which is the equality-sharp instance of the
/// inequality; the reported pair is the worst coordinate. A per-coordinate
/// contraction passes, a cubic statistic fails by a factor of about three.
inline LipschitzCheckReport check_lipschitz_separable(const SeparableStatistic& stat,
                                                      std::int64_t trials, double coupling_scale,
                                                      std::uint64_t seed = 12345,
                                                      int value_dim = 1, double scale = 1.0) {
  if (trials < 100) throw std::invalid_argument("check_lipschitz_separable: trials must be >= 100");
  InnovationSource noise(seed, Distribution::gaussian(0.0, scale), value_dim);
  InnovationSource bump(seed ^ 0x5DEECE66DULL, Distribution::gaussian(0.0, coupling_scale), value_dim);

  const std::size_t n_off = stat.offsets.size();
  const std::int64_t per_coord = std::max<std::int64_t>(trials / static_cast<std::int64_t>(n_off), 50);
  std::vector<Value> u(n_off), v(n_off);
  LipschitzCheckReport rep;
  rep.trials = per_coord * static_cast<std::int64_t>(n_off);
  rep.pass = true;
  double worst_margin = -1e300;
  std::int64_t draw = 0;
  for (std::size_t target = 0; target < n_off; ++target) {
    double lhs_m = 0, lhs_s = 0, rhs_m = 0, rhs_s = 0;
    for (std::int64_t r = 0; r < per_coord; ++r) {
      for (std::size_t j = 0; j < n_off; ++j) {
        u[j] = noise.scratch_at(draw + static_cast<std::int64_t>(j));
        v[j] = u[j];
      }
      const Value g = bump.scratch_at(draw);
      draw += static_cast<std::int64_t>(n_off);
      v[target] = u[target] + g;
      const double lhs = std::abs(stat.phi(u) - stat.phi(v));
      const double rhs = g.norm();
      const double k = static_cast<double>(r + 1);
      double d = lhs - lhs_m;
      lhs_m += d / k;
      lhs_s += d * (lhs - lhs_m);
      d = rhs - rhs_m;
      rhs_m += d / k;
      rhs_s += d * (rhs - rhs_m);
    }
    const double lhs_se = std::sqrt(lhs_s / static_cast<double>(per_coord - 1) /
                                    static_cast<double>(per_coord));
    const double rhs_se = std::sqrt(rhs_s / static_cast<double>(per_coord - 1) /
                                    static_cast<double>(per_coord));
    const double slack = 3.0 * (lhs_se + rhs_se) + 1e-12;
    if (lhs_m - rhs_m > worst_margin) {
      worst_margin = lhs_m - rhs_m;
      rep.lhs = lhs_m;
      rep.rhs = rhs_m;
      rep.lhs_se = lhs_se;
      rep.rhs_se = rhs_se;
    }
    if (lhs_m > rhs_m + slack) rep.pass = false;
  }
  return rep;
}

}  // namespace ncf

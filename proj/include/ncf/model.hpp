#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ncf/innovations.hpp"
#include "ncf/lattice.hpp"
#include "ncf/vec.hpp"

namespace ncf {

struct ContractionReport {
  double rho = 0.0;
  double eta = 0.0;
  double total = 0.0;
  bool pass = false;
};

inline ContractionReport make_contraction_report(double rho, double eta) {
  ContractionReport r;
  r.rho = rho;
  r.eta = eta;
  r.total = rho + eta;
  r.pass = r.total < 1.0;
  return r;
}

/// Dense row-major matrix, just big enough for the built-in models.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  /// Largest singular value by power iteration on A^T A; deterministic start.
  double operator_norm() const {
    if (rows == 0 || cols == 0) return 0.0;
    std::vector<double> v(static_cast<std::size_t>(cols), 1.0 / std::sqrt(static_cast<double>(cols)));
    std::vector<double> av(static_cast<std::size_t>(rows), 0.0), w(v.size(), 0.0);
    double s = 0.0;
    for (int it = 0; it < 500; ++it) {
      for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += at(r, c) * v[c];
        av[r] = acc;
      }
      for (int c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (int r = 0; r < rows; ++r) acc += at(r, c) * av[r];
        w[c] = acc;
      }
      double nw = 0.0;
      for (double x : w) nw += x * x;
      nw = std::sqrt(nw);
      if (nw == 0.0) return 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / nw;
      const double snew = std::sqrt(nw);
      if (std::abs(snew - s) <= 1e-15 * std::max(1.0, snew)) return snew;
      s = snew;
    }
    return s;
  }
};

enum class Activation { identity, tanh, relu, sigmoid };

inline double apply_activation(Activation act, double x) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0 ? x : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

/// The update rule X_t = F((X_{t+s})_{s in B}, eps_t) together with its
/// Lipschitz data. Construction enforces the contraction requirement
/// rho + eta < 1; a model that fails it cannot exist as a value.
class FieldModel {
 public:
  // Neighbor values arrive in the fixed lexicographic order of the offsets.
  using UpdateFn = std::function<Value(std::span<const Value>, const Value&)>;

  FieldModel(Orthotope neighborhood, std::vector<double> lambda, double eta, UpdateFn update,
             int value_dim, std::string name)
      : neighborhood_(std::move(neighborhood)),
        offsets_(neighborhood_.points(1, Coord::zero(neighborhood_.kappa()))),
        lambda_(std::move(lambda)),
        eta_(eta),
        update_(std::move(update)),
        value_dim_(value_dim),
        name_(std::move(name)) {
    if (lambda_.size() != offsets_.size())
      throw std::invalid_argument("FieldModel: one lambda per neighborhood offset required");
    rho_ = 0.0;
    for (double l : lambda_) {
      if (l < 0) throw std::invalid_argument("FieldModel: negative lambda");
      rho_ += l;
    }
    if (eta_ < 0) throw std::invalid_argument("FieldModel: negative eta");
    if (rho_ + eta_ >= 1.0)
      throw std::invalid_argument("FieldModel: contraction requirement rho + eta < 1 violated (" +
                                  std::to_string(rho_ + eta_) + ")");
    if (value_dim_ < 1 || value_dim_ > kMaxValueDim)
      throw std::invalid_argument("FieldModel: bad value dimension");
  }

  const Orthotope& neighborhood() const { return neighborhood_; }
  const std::vector<Coord>& offsets() const { return offsets_; }
  int kappa() const { return neighborhood_.kappa(); }
  int value_dim() const { return value_dim_; }
  double rho() const { return rho_; }
  double eta() const { return eta_; }
  const std::string& name() const { return name_; }

  Value apply(std::span<const Value> neighbors, const Value& eps) const {
    return update_(neighbors, eps);
  }

 private:
  Orthotope neighborhood_;
  std::vector<Coord> offsets_;
  std::vector<double> lambda_;
  double eta_;
  double rho_ = 0.0;
  UpdateFn update_;
  int value_dim_;
  std::string name_;
};

inline ContractionReport check_contraction(const FieldModel& m) {
  return make_contraction_report(m.rho(), m.eta());
}
/// Contraction check for AR coefficients without constructing the model,
/// so failing parameter sets can still be reported on.
inline ContractionReport ar_contraction(double alpha_left, double alpha_right, double beta) {
  return make_contraction_report(std::abs(alpha_left) + std::abs(alpha_right), std::abs(beta));
}
inline ContractionReport brnn_contraction(const Matrix& a, double beta) {
  return make_contraction_report(a.operator_norm(), std::abs(beta));
}

/// Bidirectional AR(1) on Z: X_t = aL*X_{t-1} + aR*X_{t+1} + b*eps_t.
inline FieldModel ar_model(double alpha_left, double alpha_right, double beta) {
  const double al = alpha_left, ar = alpha_right, b = beta;
  auto update = [al, ar, b](std::span<const Value> nb, const Value& e) {
    // offsets of B((1)) in lexicographic order: -1, 0, +1; offset 0 unused
    double acc = al * nb[0].v[0];
    acc += ar * nb[2].v[0];
    Value out(1);
    out.v[0] = acc + b * e.v[0];
    return out;
  };
  return FieldModel(Orthotope({1}), {std::abs(alpha_left), 0.0, std::abs(alpha_right)},
                    std::abs(beta), update, 1,
                    "ar(" + std::to_string(alpha_left) + "," + std::to_string(alpha_right) + "," +
                        std::to_string(beta) + ")");
}

/// Isotropic nearest-neighbor model on Z^kappa: the total neighbor weight
/// alpha is split equally over the 2*kappa axis-adjacent sites,
/// X_t = (alpha/2kappa) * sum_axis X_{t+s} + beta * eps_t. For kappa = 1 and
/// alpha = aL + aR this reproduces the symmetric bidirectional AR model; it
/// is the desk model for lattice dimensions above one.
inline FieldModel lattice_ar_model(int kappa, double alpha, double beta) {
  if (kappa < 1 || kappa > kMaxKappa) throw std::invalid_argument("lattice_ar_model: bad kappa");
  const Orthotope box(std::vector<std::int64_t>(static_cast<std::size_t>(kappa), 1));
  const std::vector<Coord> offsets = box.points(1, Coord::zero(kappa));
  auto is_axis = [](const Coord& c) {
    int nonzero = 0;
    for (int i = 0; i < c.dim; ++i)
      if (c[i] != 0) {
        if (c[i] != 1 && c[i] != -1) return false;
        ++nonzero;
      }
    return nonzero == 1;
  };
  const double w = std::abs(alpha) / (2.0 * kappa);
  std::vector<double> lambda(offsets.size(), 0.0);
  std::vector<std::size_t> axis_slots;
  for (std::size_t j = 0; j < offsets.size(); ++j)
    if (is_axis(offsets[j])) {
      lambda[j] = w;
      axis_slots.push_back(j);
    }
  const double signed_w = alpha / (2.0 * kappa);
  auto update = [signed_w, beta, axis_slots](std::span<const Value> nb, const Value& e) {
    double acc = 0.0;
    for (std::size_t j : axis_slots) acc += signed_w * nb[j].v[0];
    Value out(1);
    out.v[0] = acc + beta * e.v[0];
    return out;
  };
  return FieldModel(box, std::move(lambda), std::abs(beta), update, 1,
                    "lattice_ar(kappa=" + std::to_string(kappa) + "," + std::to_string(alpha) +
                        "," + std::to_string(beta) + ")");
}

/// Single-layer bidirectional recurrent model on Z with window half-width k:
/// X_t = f(A * (X_{t-k}..X_{t-1}, X_{t+1}..X_{t+k})) + beta * eps_t.
/// A is p x (2k*p), laid out as 2k blocks of p columns, one per neighbor in
/// the order above. Per-offset Lipschitz weights are the block norms; the
/// aggregate operator-norm condition ||A||_op + beta < 1 is enforced as well.
inline FieldModel brnn_model(const Matrix& a, double beta, Activation act, int k) {
  if (k < 1) throw std::invalid_argument("brnn_model: k must be >= 1");
  const int p = a.rows;
  if (p < 1 || p > kMaxValueDim) throw std::invalid_argument("brnn_model: bad state dimension");
  if (a.cols != 2 * k * p)
    throw std::invalid_argument("brnn_model: matrix must be p x (2k*p)");
  if (beta < 0) throw std::invalid_argument("brnn_model: beta must be >= 0");
  if (a.operator_norm() + beta >= 1.0)
    throw std::invalid_argument("brnn_model: ||A||_op + beta >= 1");

  // lexicographic offsets of B((k)): -k..k; neighbor blocks skip the center
  std::vector<double> lambda(static_cast<std::size_t>(2 * k + 1), 0.0);
  for (int j = 0; j < 2 * k; ++j) {
    Matrix block(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) block.at(r, c) = a.at(r, j * p + c);
    const double bn = block.operator_norm();
    const int offset_index = j < k ? j : j + 1;
    lambda[static_cast<std::size_t>(offset_index)] = bn;
  }

  Matrix mat = a;
  auto update = [mat, beta, act, k, p](std::span<const Value> nb, const Value& e) {
    Value out(p);
    for (int r = 0; r < p; ++r) {
      double acc = 0.0;
      int col = 0;
      for (int j = 0; j <= 2 * k; ++j) {
        if (j == k) continue;  // center excluded from the regression vector
        for (int c = 0; c < p; ++c) acc += mat.at(r, col++) * nb[static_cast<std::size_t>(j)].v[c];
      }
      out.v[r] = apply_activation(act, acc) + beta * e.v[r];
    }
    return out;
  };
  return FieldModel(Orthotope({k}), std::move(lambda), beta, update, p,
                    "brnn(p=" + std::to_string(p) + ",k=" + std::to_string(k) + ")");
}

/// Fixed iteration count; coupled evaluations must share the schedule so that
/// their difference is a deterministic function of the shared innovations.
struct PicardConfig {
  int iterations = 16;
  int window_margin = 0;
  double init_value = 0.0;
};

/// Iterations needed to push the geometric iteration error below `target`,
/// starting from an initial displacement estimate `initial_gap`.
inline int picard_iterations_for(double rho, double initial_gap, double target) {
  if (!(rho > 0.0) || rho >= 1.0) return 1;
  if (!(initial_gap > 0.0) || !(target > 0.0) || target >= initial_gap) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::log(target / initial_gap) / std::log(rho))));
}

/// Shrinking-window fixed-point iterator. Iteration k updates values on the
/// dilation-(K-k+margin) window of each requested center, so the value
/// returned after K iterations depends only on innovations within K dilations
/// (plus margin) of that center. The window geometry is precomputed once and
/// shifted to any base coordinate; repeated evaluations only refill the
/// innovation buffer.
class PicardEvaluator {
 public:
  PicardEvaluator(const FieldModel& model, const PicardConfig& cfg,
                  std::vector<Coord> relative_centers)
      : model_(&model), cfg_(cfg), rel_centers_(std::move(relative_centers)) {
    if (cfg.iterations < 1) throw std::invalid_argument("PicardConfig: iterations must be >= 1");
    if (cfg.window_margin < 0) throw std::invalid_argument("PicardConfig: negative margin");
    const int kappa = model.kappa();
    const std::int64_t top = static_cast<std::int64_t>(cfg.iterations) + cfg.window_margin;

    std::uint64_t total = 0;
    for (const Coord& rc : rel_centers_) {
      if (rc.dim != kappa) throw std::invalid_argument("PicardEvaluator: center dimension mismatch");
      total += model.neighborhood().cardinality(top);
    }
    if (total > (1ULL << 24)) throw std::length_error("PicardEvaluator: window too large");

    CoordSet window;
    for (const Coord& rc : rel_centers_)
      for (const Coord& p : model.neighborhood().points(top, rc)) window.insert(p);
    coords_.assign(window.begin(), window.end());
    std::sort(coords_.begin(), coords_.end());
    slot_.reserve(coords_.size() * 2);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(coords_.size()); ++i)
      slot_.emplace(coords_[static_cast<std::size_t>(i)], i);

    const auto& offs = model.offsets();
    nbr_.assign(coords_.size() * offs.size(), -1);
    for (std::size_t i = 0; i < coords_.size(); ++i)
      for (std::size_t j = 0; j < offs.size(); ++j) {
        auto it = slot_.find(coords_[i] + offs[j]);
        nbr_[i * offs.size() + j] = it == slot_.end() ? -1 : it->second;
      }

    active_.resize(static_cast<std::size_t>(cfg.iterations));
    for (int k = 1; k <= cfg.iterations; ++k) {
      const std::int64_t radius = static_cast<std::int64_t>(cfg.iterations - k) + cfg.window_margin;
      auto& lst = active_[static_cast<std::size_t>(k - 1)];
      for (std::int32_t i = 0; i < static_cast<std::int32_t>(coords_.size()); ++i) {
        for (const Coord& rc : rel_centers_)
          if (model.neighborhood().contains(coords_[static_cast<std::size_t>(i)], radius, rc)) {
            lst.push_back(i);
            break;
          }
      }
    }

    center_slots_.reserve(rel_centers_.size());
    for (const Coord& rc : rel_centers_) center_slots_.push_back(slot_.at(rc));
  }

  /// Values of the fixed point approximation at base + rc for every relative
  /// center, in their construction order. If `residuals` is given it receives
  /// the sup-norm successive displacement per iteration.
  std::vector<Value> evaluate(const FieldView& view, const Coord& base,
                              std::vector<double>* residuals = nullptr) const {
    if (view.source().value_dim() != model_->value_dim())
      throw std::invalid_argument("PicardEvaluator: value dimension mismatch with source");
    const std::size_t n = coords_.size();
    const std::size_t nb = model_->offsets().size();
    std::vector<Value> eps(n);
    for (std::size_t i = 0; i < n; ++i) eps[i] = view(base + coords_[i]);

    std::vector<Value> cur(n, Value::constant(model_->value_dim(), cfg_.init_value));
    std::vector<Value> nxt = cur;
    std::vector<Value> gather(nb, Value(model_->value_dim()));
    if (residuals) residuals->clear();

    for (std::size_t k = 0; k < active_.size(); ++k) {
      double res = 0.0;
      for (std::int32_t i : active_[k]) {
        const std::size_t ii = static_cast<std::size_t>(i);
        for (std::size_t j = 0; j < nb; ++j) {
          const std::int32_t s = nbr_[ii * nb + j];
          gather[j] = cur[static_cast<std::size_t>(s)];
        }
        nxt[ii] = model_->apply(gather, eps[ii]);
        if (residuals) res = std::max(res, (nxt[ii] - cur[ii]).norm_inf());
      }
      if (residuals) residuals->push_back(res);
      std::swap(cur, nxt);
    }

    std::vector<Value> out;
    out.reserve(center_slots_.size());
    for (std::int32_t s : center_slots_) {
      const Value& v = cur[static_cast<std::size_t>(s)];
      if (!v.finite())
        throw std::runtime_error("picard evaluation produced a non-finite value");
      out.push_back(v);
    }
    return out;
  }

 private:
  const FieldModel* model_;
  PicardConfig cfg_;
  std::vector<Coord> rel_centers_;
  std::vector<Coord> coords_;
  std::unordered_map<Coord, std::int32_t, CoordHash> slot_;
  std::vector<std::int32_t> nbr_;
  std::vector<std::vector<std::int32_t>> active_;
  std::vector<std::int32_t> center_slots_;
};

/// One-shot evaluation of the fixed point at a single center.
inline Value picard_evaluate(const FieldModel& model, const FieldView& view, const Coord& center,
                             const PicardConfig& cfg) {
  PicardEvaluator ev(model, cfg, {Coord::zero(model.kappa())});
  return ev.evaluate(view, center).front();
}

/// Successive sup-norm displacements of the iteration at one center.
inline std::vector<double> picard_residuals(const FieldModel& model, const FieldView& view,
                                            const Coord& center, const PicardConfig& cfg) {
  PicardEvaluator ev(model, cfg, {Coord::zero(model.kappa())});
  std::vector<double> res;
  ev.evaluate(view, center, &res);
  return res;
}

/// Batched evaluation over a set of coordinates, sharing one iteration
/// pyramid. Pointwise identical to independent picard_evaluate calls: each
/// slot value is the same pure function of the shared innovations, computed
/// with the same operand order.
inline std::vector<std::pair<Coord, Value>> evaluate_window(const FieldModel& model,
                                                            const FieldView& view,
                                                            const std::vector<Coord>& window,
                                                            const PicardConfig& cfg) {
  if (window.empty()) return {};
  std::vector<Coord> sorted = window;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const Coord base = sorted.front();
  std::vector<Coord> rel;
  rel.reserve(sorted.size());
  for (const Coord& c : sorted) rel.push_back(c - base);
  PicardEvaluator ev(model, cfg, rel);
  const std::vector<Value> vals = ev.evaluate(view, base);
  std::vector<std::pair<Coord, Value>> out;
  out.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) out.emplace_back(sorted[i], vals[i]);
  return out;
}

}  // namespace ncf

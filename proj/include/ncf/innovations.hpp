#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ncf/lattice.hpp"
#include "ncf/rng.hpp"
#include "ncf/vec.hpp"

namespace ncf {

enum class DistKind { gaussian, uniform };

/// Marginal law of one innovation component.
struct Distribution {
  DistKind kind = DistKind::gaussian;
  double p1 = 0.0;  // gaussian: mean, uniform: lower bound
  double p2 = 1.0;  // gaussian: sigma, uniform: upper bound

  static Distribution gaussian(double mean, double sigma) {
    if (sigma < 0) throw std::invalid_argument("gaussian: sigma < 0");
    return {DistKind::gaussian, mean, sigma};
  }
  static Distribution uniform(double a, double b) {
    if (b < a) throw std::invalid_argument("uniform: b < a");
    return {DistKind::uniform, a, b};
  }

  double draw(const philox::Block& block) const {
    switch (kind) {
      case DistKind::gaussian:
        return p1 + p2 * rng::gaussian_from_block(block);
      case DistKind::uniform:
        return rng::uniform_from_block(block, p1, p2);
    }
    return 0.0;
  }

  /// Closed-form m-norm of the difference of two independent draws.
  /// gaussian: sqrt(2)*sigma*(E|Z|^m)^(1/m); uniform: (b-a)*(2/((m+1)(m+2)))^(1/m).
  double vm_closed_form(int m) const {
    if (m < 1) throw std::invalid_argument("vm_closed_form: m < 1");
    switch (kind) {
      case DistKind::gaussian: {
        // E|Z|^m = 2^{m/2} Gamma((m+1)/2) / sqrt(pi)
        const double log_abs_moment =
            0.5 * m * std::log(2.0) + std::lgamma(0.5 * (m + 1)) - 0.5 * std::log(M_PI);
        return std::sqrt(2.0) * p2 * std::exp(log_abs_moment / m);
      }
      case DistKind::uniform:
        return (p2 - p1) * std::pow(2.0 / (static_cast<double>(m + 1) * (m + 2)), 1.0 / m);
    }
    return 0.0;
  }

  /// Supremum of V_m over m. Finite only for bounded innovations; for the
  /// gaussian family the m-norms grow without bound and nullopt is returned.
  std::optional<double> v_infinity() const {
    switch (kind) {
      case DistKind::gaussian:
        return p2 == 0.0 ? std::optional<double>(0.0) : std::nullopt;
      case DistKind::uniform:
        return p2 - p1;
    }
    return std::nullopt;
  }

  std::string describe() const {
    switch (kind) {
      case DistKind::gaussian:
        return "gaussian(" + std::to_string(p1) + "," + std::to_string(p2) + ")";
      case DistKind::uniform:
        return "uniform(" + std::to_string(p1) + "," + std::to_string(p2) + ")";
    }
    return "?";
  }
};

/// V_m estimate (or closed form) together with the m it belongs to.
struct MomentProfile {
  int m = 1;
  double value = 0.0;        // V_m
  double stderr_est = 0.0;   // 0 for closed forms
};

// PRF stream tags. Marginals, fillings and swap copies live in disjoint
// counter domains, so the streams are independent by construction.
namespace stream {
inline constexpr std::uint32_t kMarginal = 0x10u;
inline constexpr std::uint32_t kFilling = 0x20u;
inline constexpr std::uint32_t kSwapMarginal = 0x30u;
inline constexpr std::uint32_t kSwapFilling = 0x40u;
inline constexpr std::uint32_t kScratch = 0x50u;
inline std::uint32_t with_component(std::uint32_t tag, int component) {
  return tag | (static_cast<std::uint32_t>(component) << 8);
}
}  // namespace stream

/// Deterministic, seed-addressable i.i.d. innovation field. Every value is a
/// pure function of (master seed, stream, coordinate); evaluation order never
/// matters, which is what makes coupled evaluations possible.
class InnovationSource {
 public:
  InnovationSource(std::uint64_t master_seed, Distribution dist, int value_dim = 1)
      : seed_(master_seed), dist_(dist), dim_(value_dim) {
    if (value_dim < 1 || value_dim > kMaxValueDim)
      throw std::invalid_argument("InnovationSource: bad value dimension");
  }

  std::uint64_t master_seed() const { return seed_; }
  const Distribution& distribution() const { return dist_; }
  int value_dim() const { return dim_; }

  /// epsilon_t, the true marginal at coordinate t.
  Value epsilon_at(const Coord& t) const { return draw(stream::kMarginal, t); }

  /// The per-site filling variable; one value per site, shared by every
  /// out-of-window coordinate of that site's truncated view.
  Value filling_at(const Coord& site) const { return draw(stream::kFilling, site); }

  /// Independent copies used when a single enumerated variable is swapped.
  Value swap_epsilon_at(const Coord& t) const { return draw(stream::kSwapMarginal, t); }
  Value swap_filling_at(const Coord& site) const { return draw(stream::kSwapFilling, site); }

  /// Scratch stream for Monte Carlo sampling detached from the lattice.
  Value scratch_at(std::int64_t i) const { return draw(stream::kScratch, Coord{i}); }

 private:
  Value draw(std::uint32_t tag, const Coord& c) const {
    Value out(dim_);
    for (int j = 0; j < dim_; ++j)
      out[j] = dist_.draw(rng::coord_block(seed_, stream::with_component(tag, j), c));
    return out;
  }

  std::uint64_t seed_;
  Distribution dist_;
  int dim_;
};

/// Identity of one enumerated random variable of the truncated statistic:
/// either a true marginal epsilon_t or the filling variable of one site.
struct SwapVariable {
  enum class Kind { marginal, filling } kind = Kind::marginal;
  Coord where;  // marginal: lattice coordinate t; filling: the owning site

  static SwapVariable marginal(const Coord& t) { return {Kind::marginal, t}; }
  static SwapVariable filling(const Coord& site) { return {Kind::filling, site}; }
  friend bool operator==(const SwapVariable& a, const SwapVariable& b) {
    return a.kind == b.kind && a.where == b.where;
  }
};

/// A fully specified innovation configuration consumed by the fixed-point
/// evaluator: the exact field, a truncated field around one site, or a
/// truncated field with exactly one variable replaced by its independent copy.
class FieldView {
 public:
  enum class Kind { exact, truncated, swapped };

  static FieldView exact(const InnovationSource& src) {
    FieldView v;
    v.kind_ = Kind::exact;
    v.src_ = &src;
    return v;
  }
  /// Truncated view of `site`: true marginals on the dilation-`depth` window
  /// of `window` around the site, the site's filling value elsewhere.
  static FieldView truncated(const InnovationSource& src, const Orthotope& window,
                             const Coord& site, std::int64_t depth) {
    if (depth < 0) throw std::invalid_argument("FieldView: negative depth");
    FieldView v;
    v.kind_ = Kind::truncated;
    v.src_ = &src;
    v.window_ = &window;
    v.site_ = site;
    v.depth_ = depth;
    return v;
  }
  static FieldView swapped(const InnovationSource& src, const Orthotope& window,
                           const Coord& site, std::int64_t depth, const SwapVariable& swap) {
    FieldView v = truncated(src, window, site, depth);
    v.kind_ = Kind::swapped;
    v.swap_ = swap;
    return v;
  }

  Kind kind() const { return kind_; }
  const InnovationSource& source() const { return *src_; }
  const Coord& site() const { return site_; }
  std::int64_t depth() const { return depth_; }

  /// Three-case dispatch of the innovation value seen at coordinate t.
  Value operator()(const Coord& t) const {
    switch (kind_) {
      case Kind::exact:
        return src_->epsilon_at(t);
      case Kind::truncated:
        if (window_->contains(t, depth_, site_)) return src_->epsilon_at(t);
        return src_->filling_at(site_);
      case Kind::swapped:
        if (window_->contains(t, depth_, site_)) {
          if (swap_.kind == SwapVariable::Kind::marginal && swap_.where == t)
            return src_->swap_epsilon_at(t);
          return src_->epsilon_at(t);
        }
        if (swap_.kind == SwapVariable::Kind::filling && swap_.where == site_)
          return src_->swap_filling_at(site_);
        return src_->filling_at(site_);
    }
    return Value(src_->value_dim());
  }

 private:
  FieldView() = default;
  Kind kind_ = Kind::exact;
  const InnovationSource* src_ = nullptr;
  const Orthotope* window_ = nullptr;
  Coord site_{};
  std::int64_t depth_ = 0;
  SwapVariable swap_{};
};

/// Enumeration of the distinct random variables behind the truncated
/// statistic: the marginals of every per-site truncation window and one
/// filling per evaluated site. Indices are stable across runs (lexicographic
/// coordinate order, marginals first).
///
/// The marginal part is the union of windows over all sites the statistic
/// actually evaluates (the index set dilated by the statistic window); it
/// coincides with the N2-style union count when the statistic window is the
/// center alone.
class SwapIndexSet {
 public:
  SwapIndexSet(const IndexSet& index, const Orthotope& stat_window,
               const Orthotope& trunc_window, std::int64_t depth) {
    if (depth < 0) throw std::invalid_argument("SwapIndexSet: negative depth");
    CoordSet site_set;
    for (const Coord& s : index.points())
      for (const Coord& u : stat_window.points(1, s)) site_set.insert(u);
    sites_.assign(site_set.begin(), site_set.end());
    std::sort(sites_.begin(), sites_.end());

    CoordSet marg_set;
    for (const Coord& u : sites_)
      for (const Coord& t : trunc_window.points(depth, u)) marg_set.insert(t);
    marginals_.assign(marg_set.begin(), marg_set.end());
    std::sort(marginals_.begin(), marginals_.end());
  }

  std::size_t marginal_count() const { return marginals_.size(); }
  std::size_t filling_count() const { return sites_.size(); }
  std::size_t size() const { return marginals_.size() + sites_.size(); }

  bool is_marginal(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("SwapIndexSet: index out of range");
    return i < marginals_.size();
  }

  SwapVariable variable(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("SwapIndexSet: index out of range");
    if (i < marginals_.size()) return SwapVariable::marginal(marginals_[i]);
    return SwapVariable::filling(sites_[i - marginals_.size()]);
  }

  std::optional<std::size_t> index_of(const SwapVariable& v) const {
    if (v.kind == SwapVariable::Kind::marginal) {
      auto it = std::lower_bound(marginals_.begin(), marginals_.end(), v.where);
      if (it != marginals_.end() && *it == v.where)
        return static_cast<std::size_t>(it - marginals_.begin());
      return std::nullopt;
    }
    auto it = std::lower_bound(sites_.begin(), sites_.end(), v.where);
    if (it != sites_.end() && *it == v.where)
      return marginals_.size() + static_cast<std::size_t>(it - sites_.begin());
    return std::nullopt;
  }

  const std::vector<Coord>& marginals() const { return marginals_; }
  const std::vector<Coord>& filling_sites() const { return sites_; }

 private:
  std::vector<Coord> marginals_;
  std::vector<Coord> sites_;
};

/// Monte Carlo estimate of V_m = ||eps - eps'||_m over independent pairs.
/// Closed forms exist for both built-in families and are cross-checked in the
/// test suite; m = "infinity" is rejected here (see Distribution::v_infinity).
inline MomentProfile moment_vm(const InnovationSource& src, int m, std::int64_t sample_count) {
  if (m < 1) throw std::invalid_argument("moment_vm: m must be >= 1");
  if (sample_count < 2) throw std::invalid_argument("moment_vm: need at least 2 samples");
  double mean = 0.0, m2 = 0.0;
  for (std::int64_t i = 0; i < sample_count; ++i) {
    const Value a = src.scratch_at(2 * i);
    const Value b = src.scratch_at(2 * i + 1);
    const double g = std::pow((a - b).norm(), m);
    const double delta = g - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (g - mean);
  }
  const double se_mean = std::sqrt(m2 / static_cast<double>(sample_count - 1) /
                                   static_cast<double>(sample_count));
  MomentProfile out;
  out.m = m;
  out.value = std::pow(mean, 1.0 / m);
  // delta method for the 1/m power
  out.stderr_est = mean > 0 ? out.value / (m * mean) * se_mean : 0.0;
  return out;
}

/// m-norm of the gap between two streams evaluated at the same indices;
/// identical seeds give the degenerate coupled pair and an exact zero.
inline double pair_gap_mnorm(const Distribution& dist, std::uint64_t seed_a, std::uint64_t seed_b,
                             int m, std::int64_t sample_count) {
  if (m < 1 || sample_count < 1) throw std::invalid_argument("pair_gap_mnorm: bad arguments");
  InnovationSource a(seed_a, dist), b(seed_b, dist);
  double acc = 0.0;
  for (std::int64_t i = 0; i < sample_count; ++i)
    acc += std::pow((a.scratch_at(i) - b.scratch_at(i)).norm(), m);
  return std::pow(acc / static_cast<double>(sample_count), 1.0 / m);
}

}  // namespace ncf

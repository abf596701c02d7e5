#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ncf {

/// Parameter set feeding the closed-form bounds: cardinalities of the model
/// stencil, statistic stencil, truncation window and their unions over the
/// index set, plus the contraction modulus and innovation moments.
struct BoundParams {
  std::uint64_t n = 1;       // index-set size
  std::uint64_t n_b = 1;     // model stencil cardinality
  std::uint64_t n_bbar = 1;  // statistic stencil cardinality
  std::uint64_t n_d = 1;     // one truncation window
  std::uint64_t big_n1 = 1;  // union of statistic windows
  std::uint64_t big_n2 = 1;  // union of truncation windows
  int kappa = 1;
  double rho = 0.5;
  std::int64_t d = 1;        // truncation depth
  double v_m = 0.0;
  double v_inf = 0.0;

  void validate_core() const {
    if (kappa < 1) throw std::domain_error("BoundParams: kappa must be >= 1");
    if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("BoundParams: rho must lie in (0,1)");
    if (d < 0) throw std::domain_error("BoundParams: negative depth");
    if (n < 1 || n_b < 1 || n_bbar < 1 || n_d < 1)
      throw std::domain_error("BoundParams: counts must be >= 1");
    if (v_m < 0 || v_inf < 0) throw std::domain_error("BoundParams: negative moment");
  }
  // The count chain n <= N1 <= N2 only holds for depth >= 1; bounds that use
  // the unions require it.
  void validate_counts() const {
    validate_core();
    if (big_n1 < n || big_n2 < big_n1)
      throw std::domain_error("BoundParams: need n <= N1 <= N2");
  }
};

/// One evaluated bound. Probability-type quantities carry both the raw
/// formula value and the clamped min(raw, 1); acceptance checks use raw.
struct BoundReport {
  std::string quantity;
  double value = 0.0;
  double clamped = 0.0;
  double threshold = 0.0;  // validity threshold where one applies
  bool valid = true;
  std::string condition;
};

namespace detail {

inline long double factorial_ld(int k) {
  long double f = 1.0L;
  for (int i = 2; i <= k; ++i) f *= static_cast<long double>(i);
  return f;
}

/// integral_0^x t^(kappa-1) rho^t dt in closed form.
inline long double decay_integral(int kappa, long double log_inv_rho, long double x) {
  long double sum = 0.0L, term = 1.0L;  // sum_{i<kappa} (x*l)^i / i!
  for (int i = 0; i < kappa; ++i) {
    sum += term;
    term *= x * log_inv_rho / static_cast<long double>(i + 1);
  }
  const long double fact = factorial_ld(kappa - 1);
  return fact / std::pow(log_inv_rho, static_cast<long double>(kappa)) *
         (1.0L - std::exp(-log_inv_rho * x) * sum);
}

/// ((kappa-1)/(ln(1/rho)*e))^(kappa-1) with the 0^0 := 1 convention at
/// kappa = 1 (the term then bounds a single summand rho^c <= 1).
inline long double peak_term(int kappa, long double log_inv_rho) {
  if (kappa == 1) return 1.0L;
  const long double base = static_cast<long double>(kappa - 1) /
                           (log_inv_rho * std::exp(1.0L));
  return std::pow(base, static_cast<long double>(kappa - 1));
}

inline void check_upsilon_domain(int kappa, double rho, std::int64_t d) {
  if (kappa < 1) throw std::domain_error("upsilon: kappa must be >= 1");
  if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("upsilon: rho must lie in (0,1)");
  if (d < 0) throw std::domain_error("upsilon: d must be >= 0");
}

}  // namespace detail

/// Brute-force partial sum sum_{c=1..d} c^(kappa-1) rho^c. Independent of the
/// closed form below; selfcheck and the acceptance suite compare against it.
inline double power_decay_sum(int kappa, double rho, std::int64_t d) {
  detail::check_upsilon_domain(kappa, rho, d);
  long double acc = 0.0L;
  for (std::int64_t c = 1; c <= d; ++c)
    acc += std::pow(static_cast<long double>(c), static_cast<long double>(kappa - 1)) *
           std::pow(static_cast<long double>(rho), static_cast<long double>(c));
  return static_cast<double>(acc);
}

/// The piecewise closed form dominating power_decay_sum. Branches split at
/// the floor of (kappa-1)/ln(1/rho), where the summand peaks.
inline double upsilon(int kappa, double rho, std::int64_t d) {
  detail::check_upsilon_domain(kappa, rho, d);
  const long double l = -std::log(static_cast<long double>(rho));
  const std::int64_t split =
      static_cast<std::int64_t>(std::floor(static_cast<double>((kappa - 1) / l)));
  long double out;
  if (d < split)
    out = detail::decay_integral(kappa, l, static_cast<long double>(d + 1));
  else if (d == split)
    out = detail::decay_integral(kappa, l, static_cast<long double>(split)) +
          detail::peak_term(kappa, l);
  else
    out = detail::decay_integral(kappa, l, static_cast<long double>(d)) +
          detail::peak_term(kappa, l);
  return static_cast<double>(out);
}

/// d-free supremum of upsilon: (kappa-1)!/ln(1/rho)^kappa + peak term.
inline double upsilon_sup(int kappa, double rho) {
  detail::check_upsilon_domain(kappa, rho, 0);
  const long double l = -std::log(static_cast<long double>(rho));
  return static_cast<double>(detail::factorial_ld(kappa - 1) /
                                 std::pow(l, static_cast<long double>(kappa)) +
                             detail::peak_term(kappa, l));
}

/// Moment bound on the truncation error of the aggregate statistic:
/// n * n_bbar * rho^(d+1) * V_m.
inline BoundReport approx_error_bound(const BoundParams& p, int m, double v_m) {
  p.validate_core();
  if (m < 1) throw std::domain_error("approx_error_bound: m must be >= 1");
  BoundReport r;
  r.quantity = "approx_error_m" + std::to_string(m);
  r.value = static_cast<double>(p.n) * static_cast<double>(p.n_bbar) *
            std::pow(p.rho, static_cast<double>(p.d + 1)) * v_m;
  r.clamped = r.value;
  r.condition = "moment bound, m = " + std::to_string(m);
  return r;
}

/// Almost-sure variant of the truncation error bound, with V_inf in place of
/// V_m. Meaningful only for bounded innovations.
inline BoundReport approx_error_bound_as(const BoundParams& p) {
  p.validate_core();
  BoundReport r;
  r.quantity = "approx_error_as";
  r.value = static_cast<double>(p.n) * static_cast<double>(p.n_bbar) *
            std::pow(p.rho, static_cast<double>(p.d + 1)) * p.v_inf;
  r.clamped = r.value;
  r.condition = "almost-sure bound, V_inf";
  return r;
}

namespace detail {
inline double tilde_denominator(const BoundParams& p) {
  const double u = upsilon(p.kappa, p.rho, p.d);
  const double a = static_cast<double>(p.n_bbar) * std::pow(p.rho, static_cast<double>(p.d + 1));
  const double b = static_cast<double>(p.n_b) * static_cast<double>(p.kappa) * u;
  const double scale = static_cast<double>(p.n_bbar) * p.v_inf;
  return scale * scale *
         (static_cast<double>(p.big_n1) * a * a + static_cast<double>(p.big_n2) * b * b);
}
inline double two_exp(double num, double denom) {
  if (denom == 0.0) return num == 0.0 ? 2.0 : 0.0;
  return 2.0 * std::exp(-num / denom);
}
}  // namespace detail

/// Deviation bound for the truncated aggregate:
/// P(|S~ - E S~| >= eps) <= 2 exp(-2 eps^2 / denominator),
/// denominator = (n_bbar V_inf)^2 (N1 (n_bbar rho^(d+1))^2 + N2 (n_b kappa Upsilon)^2).
inline BoundReport deviation_bound_tilde(double eps, const BoundParams& p) {
  p.validate_counts();
  if (!(eps > 0.0)) throw std::domain_error("deviation_bound_tilde: eps must be > 0");
  BoundReport r;
  r.quantity = "deviation_tilde";
  r.value = detail::two_exp(2.0 * eps * eps, detail::tilde_denominator(p));
  r.clamped = std::min(r.value, 1.0);
  r.condition = "truncated-aggregate deviation";
  return r;
}

/// Deviation bound for the aggregate itself, valid above the threshold
/// eps >= 2 n n_bbar rho^(d+1) V_inf; below it the shifted formula is still
/// reported with valid = false.
inline BoundReport deviation_bound_s(double eps, const BoundParams& p) {
  p.validate_counts();
  if (!(eps > 0.0)) throw std::domain_error("deviation_bound_s: eps must be > 0");
  BoundReport r;
  r.quantity = "deviation_s";
  r.threshold = 2.0 * static_cast<double>(p.n) * static_cast<double>(p.n_bbar) *
                std::pow(p.rho, static_cast<double>(p.d + 1)) * p.v_inf;
  const double shifted = eps - r.threshold;
  r.value = detail::two_exp(2.0 * shifted * shifted, detail::tilde_denominator(p));
  r.clamped = std::min(r.value, 1.0);
  r.valid = eps >= r.threshold;
  r.condition = r.valid ? "eps above validity threshold" : "validity condition unmet";
  return r;
}

/// Per-site normalized deviation bound with the worst-case substitutions
/// N2 = N1 n_d and n_d <= d^kappa n_b.
inline BoundReport normalized_bound(double eps, const BoundParams& p) {
  p.validate_core();
  if (p.big_n1 < p.n) throw std::domain_error("normalized_bound: need N1 >= n");
  if (!(eps > 0.0)) throw std::domain_error("normalized_bound: eps must be > 0");
  BoundReport r;
  r.quantity = "deviation_normalized";
  const double n = static_cast<double>(p.n);
  const double rd1 = std::pow(p.rho, static_cast<double>(p.d + 1));
  r.threshold = 2.0 * static_cast<double>(p.n_bbar) * rd1 * p.v_inf / n;
  const double shifted = eps - r.threshold;
  const double u = upsilon(p.kappa, p.rho, p.d);
  const double a = static_cast<double>(p.n_bbar) * rd1;
  const double nb = static_cast<double>(p.n_b);
  const double denom = std::pow(static_cast<double>(p.n_bbar) * p.v_inf, 2.0) *
                       static_cast<double>(p.big_n1) *
                       (a * a + std::pow(static_cast<double>(p.d), p.kappa) * nb * nb * nb *
                                    std::pow(static_cast<double>(p.kappa) * u, 2.0));
  r.value = detail::two_exp(2.0 * n * n * shifted * shifted, denom);
  r.clamped = std::min(r.value, 1.0);
  r.valid = eps >= r.threshold;
  r.condition = r.valid ? "eps above validity threshold" : "validity condition unmet";
  return r;
}

/// Suggested truncation depth d = ceil(ln(n)^(1/kappa)).
inline std::int64_t recommend_d(std::uint64_t n, int kappa) {
  if (n < 2) throw std::domain_error("recommend_d: n must be >= 2");
  if (kappa < 1) throw std::domain_error("recommend_d: kappa must be >= 1");
  const double d = std::pow(std::log(static_cast<double>(n)), 1.0 / kappa);
  return static_cast<std::int64_t>(std::ceil(d));
}

/// Early-draft deviation bound kept for comparison plots only: denominator
/// (N1+N2) (L n_bbar V_inf)^2 with L = min(n, n_bbar n_d), stated for the
/// per-site normalized statistic. Superseded by deviation_bound_tilde.
inline BoundReport legacy_deviation_bound(double eps, const BoundParams& p) {
  p.validate_counts();
  if (!(eps > 0.0)) throw std::domain_error("legacy_deviation_bound: eps must be > 0");
  BoundReport r;
  r.quantity = "deviation_legacy";
  const double big_l = static_cast<double>(
      std::min<std::uint64_t>(p.n, p.n_bbar * p.n_d));
  const double n = static_cast<double>(p.n);
  const double denom = static_cast<double>(p.big_n1 + p.big_n2) *
                       std::pow(big_l * static_cast<double>(p.n_bbar) * p.v_inf, 2.0);
  r.value = detail::two_exp(2.0 * eps * eps * n * n, denom);
  r.clamped = std::min(r.value, 1.0);
  r.condition = "legacy variant (normalized statistic), for comparison only";
  return r;
}

}  // namespace ncf

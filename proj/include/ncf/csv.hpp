#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncf {

/// One emitted measurement. The column set is a bit-exact file contract:
/// header `experiment,d,m,epsilon,estimate,stderr,bound,threshold,pass`,
/// 17 significant digits, LF line endings. Columns that do not apply to a
/// row (e.g. epsilon for a moment check) carry 0.
struct ResultRow {
  std::string experiment;
  std::int64_t d = 0;
  int m = 0;
  double epsilon = 0.0;
  double estimate = 0.0;
  double stderr_est = 0.0;
  double bound = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline const char* csv_header() { return "experiment,d,m,epsilon,estimate,stderr,bound,threshold,pass\n"; }

inline std::string csv_to_string(std::span<const ResultRow> rows) {
  std::string out = csv_header();
  for (const ResultRow& r : rows) {
    out += r.experiment;
    out += ',';
    out += std::to_string(r.d);
    out += ',';
    out += std::to_string(r.m);
    out += ',';
    out += format_g17(r.epsilon);
    out += ',';
    out += format_g17(r.estimate);
    out += ',';
    out += format_g17(r.stderr_est);
    out += ',';
    out += format_g17(r.bound);
    out += ',';
    out += format_g17(r.threshold);
    out += ',';
    out += r.pass ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline void write_csv(const std::string& path, std::span<const ResultRow> rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + path);
  f << csv_to_string(rows);
}

/// Deterministic order-independent reduction: recursive pairwise summation,
/// so the result does not depend on how replicates were scheduled.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_and_se(std::span<const double> xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  MeanSe out;
  out.mean = pairwise_sum(xs) / n;
  if (xs.size() < 2) return out;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - out.mean;
    sq[i] = d * d;
  }
  out.se = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  return out;
}

/// Monte Carlo estimate of the m-norm (E|x|^m)^(1/m) with a delta-method
/// standard error.
inline MeanSe mnorm_and_se(std::span<const double> xs, int m) {
  std::vector<double> powered(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    powered[i] = std::pow(std::abs(xs[i]), static_cast<double>(m));
  const MeanSe raw = mean_and_se(powered);
  MeanSe out;
  if (raw.mean <= 0.0) return out;
  out.mean = std::pow(raw.mean, 1.0 / m);
  out.se = out.mean / (m * raw.mean) * raw.se;
  return out;
}

}  // namespace ncf

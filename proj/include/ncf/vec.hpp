#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ncf {

inline constexpr int kMaxValueDim = 8;

/// Value of the field at one lattice site: a real vector of small fixed
/// dimension with the Euclidean norm. Scalar fields use dim == 1.
struct Value {
  std::array<double, kMaxValueDim> v{};
  int dim = 1;

  Value() = default;
  explicit Value(int d) : dim(d) {
    if (d < 1 || d > kMaxValueDim) throw std::invalid_argument("Value: bad dimension");
  }
  static Value scalar(double x) {
    Value out(1);
    out.v[0] = x;
    return out;
  }
  static Value constant(int d, double x) {
    Value out(d);
    for (int i = 0; i < d; ++i) out.v[i] = x;
    return out;
  }

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }

  Value& operator+=(const Value& o) {
    for (int i = 0; i < dim; ++i) v[i] += o.v[i];
    return *this;
  }
  Value& operator-=(const Value& o) {
    for (int i = 0; i < dim; ++i) v[i] -= o.v[i];
    return *this;
  }
  Value& operator*=(double s) {
    for (int i = 0; i < dim; ++i) v[i] *= s;
    return *this;
  }

  friend Value operator+(Value a, const Value& b) { return a += b; }
  friend Value operator-(Value a, const Value& b) { return a -= b; }
  friend Value operator*(double s, Value a) { return a *= s; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.dim != b.dim) return false;
    for (int i = 0; i < a.dim; ++i)
      if (a.v[i] != b.v[i]) return false;
    return true;
  }

  double norm() const {
    double s = 0;
    for (int i = 0; i < dim; ++i) s += v[i] * v[i];
    return std::sqrt(s);
  }
  double norm_inf() const {
    double s = 0;
    for (int i = 0; i < dim; ++i) s = std::max(s, std::abs(v[i]));
    return s;
  }
  bool finite() const {
    for (int i = 0; i < dim; ++i)
      if (!std::isfinite(v[i])) return false;
    return true;
  }
};

}  // namespace ncf

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace ncf {

inline constexpr int kMaxKappa = 8;

/// Integer coordinate on the lattice Z^kappa. The lattice itself is
/// conceptually infinite; only finite windows ever materialize.
struct Coord {
  std::array<std::int64_t, kMaxKappa> x{};
  int dim = 1;

  Coord() = default;
  explicit Coord(int k) : dim(k) {
    if (k < 1 || k > kMaxKappa) throw std::invalid_argument("Coord: bad dimension");
  }
  Coord(std::initializer_list<std::int64_t> xs) : dim(static_cast<int>(xs.size())) {
    if (dim < 1 || dim > kMaxKappa) throw std::invalid_argument("Coord: bad dimension");
    int i = 0;
    for (auto c : xs) x[i++] = c;
  }
  static Coord zero(int k) { return Coord(k); }

  std::int64_t& operator[](int i) { return x[static_cast<std::size_t>(i)]; }
  std::int64_t operator[](int i) const { return x[static_cast<std::size_t>(i)]; }

  friend Coord operator+(Coord a, const Coord& b) {
    for (int i = 0; i < a.dim; ++i) a.x[i] += b.x[i];
    return a;
  }
  friend Coord operator-(Coord a, const Coord& b) {
    for (int i = 0; i < a.dim; ++i) a.x[i] -= b.x[i];
    return a;
  }
  friend bool operator==(const Coord& a, const Coord& b) {
    if (a.dim != b.dim) return false;
    for (int i = 0; i < a.dim; ++i)
      if (a.x[i] != b.x[i]) return false;
    return true;
  }
  // Lexicographic; the ordering used for every deterministic enumeration.
  friend bool operator<(const Coord& a, const Coord& b) {
    for (int i = 0; i < a.dim; ++i) {
      if (a.x[i] != b.x[i]) return a.x[i] < b.x[i];
    }
    return false;
  }
};

struct CoordHash {
  std::size_t operator()(const Coord& c) const {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(c.dim + 1);
    for (int i = 0; i < c.dim; ++i) {
      std::uint64_t z = h + static_cast<std::uint64_t>(c.x[i]) + 0x9E3779B97F4A7C15ULL;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      h = z ^ (z >> 31);
    }
    return static_cast<std::size_t>(h);
  }
};

using CoordSet = std::unordered_set<Coord, CoordHash>;

/// Axis-aligned box  [-d1,d1] x ... x [-dk,dk]  on Z^kappa, together with its
/// integer dilations. Half-widths may be zero (degenerate axes are allowed).
class Orthotope {
 public:
  explicit Orthotope(std::vector<std::int64_t> half_widths) {
    kappa_ = static_cast<int>(half_widths.size());
    if (kappa_ < 1 || kappa_ > kMaxKappa) throw std::invalid_argument("Orthotope: bad dimension");
    for (int i = 0; i < kappa_; ++i) {
      if (half_widths[i] < 0) throw std::invalid_argument("Orthotope: negative half-width");
      delta_[i] = half_widths[i];
    }
  }

  int kappa() const { return kappa_; }
  std::int64_t delta(int i) const { return delta_[static_cast<std::size_t>(i)]; }

  /// Point count of the dilation-d box, prod_i (2*d*delta_i + 1).
  /// Overflow raises instead of wrapping.
  std::uint64_t cardinality(std::int64_t dilation) const {
    if (dilation < 0) throw std::invalid_argument("cardinality: negative dilation");
    std::uint64_t n = 1;
    for (int i = 0; i < kappa_; ++i) {
      const std::uint64_t w = checked_width(dilation, delta_[i]);
      if (w != 0 && n > std::numeric_limits<std::uint64_t>::max() / w)
        throw std::overflow_error("cardinality: point count overflows 64 bits");
      n *= w;
    }
    return n;
  }

  bool contains(const Coord& p, std::int64_t dilation, const Coord& center) const {
    for (int i = 0; i < kappa_; ++i) {
      const std::int64_t r = dilation * delta_[i];
      const std::int64_t off = p.x[i] - center.x[i];
      if (off < -r || off > r) return false;
    }
    return true;
  }

  /// All points of the dilation-d box around `center`, lexicographic order.
  std::vector<Coord> points(std::int64_t dilation, const Coord& center) const {
    check_center(center);
    const std::uint64_t n = cardinality(dilation);
    if (n > (1ULL << 27)) throw std::length_error("points: window too large to enumerate");
    std::vector<Coord> out;
    out.reserve(static_cast<std::size_t>(n));
    Coord cur(kappa_);
    for (int i = 0; i < kappa_; ++i) cur.x[i] = center.x[i] - dilation * delta_[i];
    for (std::uint64_t it = 0; it < n; ++it) {
      out.push_back(cur);
      for (int i = kappa_ - 1; i >= 0; --i) {
        if (cur.x[i] < center.x[i] + dilation * delta_[i]) {
          ++cur.x[i];
          break;
        }
        cur.x[i] = center.x[i] - dilation * delta_[i];
      }
    }
    return out;
  }

  /// Shell c: points of the dilation-c box not in the dilation-(c-1) box.
  /// Shells for c = 1..d partition the dilation-d box around its core.
  std::vector<Coord> shell(std::int64_t c, const Coord& center) const {
    if (c < 1) throw std::invalid_argument("shell: c must be >= 1");
    std::vector<Coord> out;
    for (const Coord& p : points(c, center))
      if (!contains(p, c - 1, center)) out.push_back(p);
    return out;
  }

 private:
  void check_center(const Coord& center) const {
    if (center.dim != kappa_) throw std::invalid_argument("center dimension mismatch");
  }
  static std::uint64_t checked_width(std::int64_t d, std::int64_t delta) {
    // 2*d*delta + 1 without intermediate wraparound
    const unsigned __int128 w = 2 * static_cast<unsigned __int128>(d) * static_cast<unsigned __int128>(delta) + 1;
    if (w > std::numeric_limits<std::uint64_t>::max())
      throw std::overflow_error("orthotope width overflows 64 bits");
    return static_cast<std::uint64_t>(w);
  }

  std::array<std::int64_t, kMaxKappa> delta_{};
  int kappa_ = 1;
};

/// Finite measurement set on the lattice; stored sorted and deduplicated so
/// every traversal is reproducible.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<Coord> pts) : points_(std::move(pts)) {
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
  }
  static IndexSet interval(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("interval: hi < lo");
    std::vector<Coord> pts;
    pts.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t t = lo; t <= hi; ++t) pts.push_back(Coord{t});
    return IndexSet(std::move(pts));
  }
  static IndexSet box(const Coord& lo, const Coord& hi) {
    if (lo.dim != hi.dim) throw std::invalid_argument("box: dimension mismatch");
    std::uint64_t count = 1;
    for (int i = 0; i < lo.dim; ++i) {
      if (hi.x[i] < lo.x[i]) throw std::invalid_argument("box: hi < lo");
      count *= static_cast<std::uint64_t>(hi.x[i] - lo.x[i] + 1);
      if (count > (1ULL << 27)) throw std::length_error("box: too many points");
    }
    std::vector<Coord> pts;
    pts.reserve(static_cast<std::size_t>(count));
    Coord cur = lo;
    for (std::uint64_t it = 0; it < count; ++it) {
      pts.push_back(cur);
      for (int i = lo.dim - 1; i >= 0; --i) {
        if (cur.x[i] < hi.x[i]) {
          ++cur.x[i];
          break;
        }
        cur.x[i] = lo.x[i];
      }
    }
    return IndexSet(std::move(pts));
  }

  const std::vector<Coord>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  int dim() const { return points_.empty() ? 0 : points_.front().dim; }

 private:
  std::vector<Coord> points_;
};

/// Exact cardinality of the union of dilated boxes around every index point.
/// With the statistic window this yields N1 (dilation 1) and N2 (dilation d).
inline std::uint64_t union_count(const IndexSet& index, const Orthotope& o, std::int64_t dilation) {
  CoordSet seen;
  for (const Coord& t : index.points())
    for (const Coord& p : o.points(dilation, t)) seen.insert(p);
  return seen.size();
}

}  // namespace ncf

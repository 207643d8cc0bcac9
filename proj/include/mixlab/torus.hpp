#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace mixlab {

/// Largest torus dimension carried inline by TorusPoint and LatticeVector.
inline constexpr std::size_t kMaxDim = 4;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduce a real number to [0,1).
inline double wrap01(double x) noexcept {
  double r = x - std::floor(x);
  // x = -1e-18 gives r == 1.0 after rounding
  return r >= 1.0 ? 0.0 : r;
}

/// Signed circular difference a - b mapped to [-1/2, 1/2).
inline double circular_diff(double a, double b) noexcept {
  double d = a - b;
  return d - std::floor(d + 0.5);
}

/// A point of T^d = R^d / Z^d stored as fractional coordinates in [0,1).
class TorusPoint {
 public:
  TorusPoint() = default;
  explicit TorusPoint(std::size_t dim) : dim_(checked_dim(dim)) {}
  TorusPoint(std::initializer_list<double> coords) : dim_(checked_dim(coords.size())) {
    std::size_t i = 0;
    for (double c : coords) c_[i++] = wrap01(c);
  }
  static TorusPoint from_coords(std::span<const double> coords) {
    TorusPoint p(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) p.c_[i] = wrap01(coords[i]);
    return p;
  }
  /// Point with every coordinate equal to `value` (reduced mod 1).
  static TorusPoint filled(std::size_t dim, double value) {
    TorusPoint p(dim);
    for (std::size_t i = 0; i < dim; ++i) p.c_[i] = wrap01(value);
    return p;
  }

  std::size_t dim() const noexcept { return dim_; }
  double operator[](std::size_t i) const noexcept { return c_[i]; }
  std::span<const double> coords() const noexcept { return {c_.data(), dim_}; }

  void set(std::size_t i, double value) noexcept { c_[i] = wrap01(value); }

  TorusPoint& operator+=(const TorusPoint& o) {
    require_same_dim(o);
    for (std::size_t i = 0; i < dim_; ++i) c_[i] = wrap01(c_[i] + o.c_[i]);
    return *this;
  }
  TorusPoint& operator-=(const TorusPoint& o) {
    require_same_dim(o);
    for (std::size_t i = 0; i < dim_; ++i) c_[i] = wrap01(c_[i] - o.c_[i]);
    return *this;
  }
  friend TorusPoint operator+(TorusPoint a, const TorusPoint& b) { return a += b; }
  friend TorusPoint operator-(TorusPoint a, const TorusPoint& b) { return a -= b; }
  friend bool operator==(const TorusPoint& a, const TorusPoint& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (std::size_t i = 0; i < a.dim_; ++i)
      if (a.c_[i] != b.c_[i]) return false;
    return true;
  }

 private:
  static std::uint8_t checked_dim(std::size_t dim) {
    if (dim < 1 || dim > kMaxDim)
      throw std::invalid_argument("torus dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    return static_cast<std::uint8_t>(dim);
  }
  void require_same_dim(const TorusPoint& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("torus dimension mismatch");
  }

  std::array<double, kMaxDim> c_{};
  std::uint8_t dim_ = 1;
};

/// Sup-norm of the circular distance between two torus points.
inline double torus_distance(const TorusPoint& a, const TorusPoint& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("torus dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) d = std::max(d, std::abs(circular_diff(a[i], b[i])));
  return d;
}

/// Coordinates agree up to `tol` as points of the circle.
inline bool nearly_equal(const TorusPoint& a, const TorusPoint& b, double tol = 1e-15) {
  return a.dim() == b.dim() && torus_distance(a, b) <= tol;
}

/// Integer lattice vector k in Z^d.
class LatticeVector {
 public:
  LatticeVector() = default;
  explicit LatticeVector(std::size_t dim) : dim_(static_cast<std::uint8_t>(dim)) {
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("lattice dimension out of range");
  }
  LatticeVector(std::initializer_list<int> ks) : LatticeVector(ks.size()) {
    std::size_t i = 0;
    for (int k : ks) k_[i++] = k;
  }

  std::size_t dim() const noexcept { return dim_; }
  int operator[](std::size_t i) const noexcept { return k_[i]; }
  int& operator[](std::size_t i) noexcept { return k_[i]; }

  /// |k| with the sup-norm convention used throughout the library.
  int sup_norm() const noexcept {
    int m = 0;
    for (std::size_t i = 0; i < dim_; ++i) m = std::max(m, std::abs(k_[i]));
    return m;
  }
  bool is_zero() const noexcept { return sup_norm() == 0; }
  LatticeVector operator-() const {
    LatticeVector r(*this);
    for (std::size_t i = 0; i < dim_; ++i) r.k_[i] = -k_[i];
    return r;
  }
  friend bool operator==(const LatticeVector& a, const LatticeVector& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (std::size_t i = 0; i < a.dim_; ++i)
      if (a.k_[i] != b.k_[i]) return false;
    return true;
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dim_; ++i) {
      if (i) s += ",";
      s += std::to_string(k_[i]);
    }
    return s + ")";
  }

 private:
  std::array<int, kMaxDim> k_{};
  std::uint8_t dim_ = 1;
};

/// <k, x> for a lattice vector and a torus point.
inline double pairing(const LatticeVector& k, const TorusPoint& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < k.dim(); ++i) s += static_cast<double>(k[i]) * x[i];
  return s;
}

/// e^{2 pi i <k,x>}
inline std::complex<double> character(const LatticeVector& k, const TorusPoint& x) {
  // reduce the phase first: keeps large |k| accurate
  const double phase = wrap01(pairing(k, x));
  return std::polar(1.0, kTwoPi * phase);
}

/// The box {k : |k|_inf <= radius} in Z^d, indexed lexicographically with the
/// first axis fastest. Index of -k is size() - 1 - index(k).
class LatticeBox {
 public:
  LatticeBox(std::size_t dim, int radius) : dim_(dim), radius_(radius) {
    if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("lattice dimension out of range");
    if (radius < 0) throw std::invalid_argument("lattice radius must be nonnegative");
    side_ = static_cast<std::size_t>(2 * radius + 1);
    size_ = 1;
    for (std::size_t i = 0; i < dim; ++i) size_ *= side_;
  }

  std::size_t dim() const noexcept { return dim_; }
  int radius() const noexcept { return radius_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t side() const noexcept { return side_; }
  std::size_t center() const noexcept { return (size_ - 1) / 2; }

  LatticeVector point(std::size_t index) const {
    LatticeVector k(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      k[i] = static_cast<int>(index % side_) - radius_;
      index /= side_;
    }
    return k;
  }
  bool contains(const LatticeVector& k) const noexcept {
    return k.dim() == dim_ && k.sup_norm() <= radius_;
  }
  std::size_t index(const LatticeVector& k) const {
    if (!contains(k)) throw std::out_of_range("lattice vector outside box");
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t i = 0; i < dim_; ++i) {
      idx += static_cast<std::size_t>(k[i] + radius_) * stride;
      stride *= side_;
    }
    return idx;
  }
  std::size_t negated(std::size_t index) const noexcept { return size_ - 1 - index; }

 private:
  std::size_t dim_;
  int radius_;
  std::size_t side_ = 1;
  std::size_t size_ = 1;
};

}  // namespace mixlab

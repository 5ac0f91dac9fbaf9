#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>

#include "lamina/error.hpp"

namespace lamina {

inline constexpr int kMaxDim = 4;

// Small dense vector in R^d, d in {2,3,4}. Fixed capacity, value semantics.
class Vec {
 public:
  Vec() = default;
  explicit Vec(int d) : d_(check_dim(d)) {}
  Vec(std::initializer_list<double> xs) : d_(check_dim(int(xs.size()))) {
    int i = 0;
    for (double x : xs) e_[i++] = x;
  }

  static Vec basis(int d, int k) {
    Vec v(d);
    v[k] = 1.0;
    return v;
  }

  int dim() const { return d_; }
  double& operator[](int i) { return e_[i]; }
  double operator[](int i) const { return e_[i]; }

  double norm() const {
    double s = 0;
    for (int i = 0; i < d_; ++i) s += e_[i] * e_[i];
    return std::sqrt(s);
  }

  double dot(const Vec& o) const {
    double s = 0;
    for (int i = 0; i < d_; ++i) s += e_[i] * o.e_[i];
    return s;
  }

  Vec operator*(double s) const {
    Vec r(d_);
    for (int i = 0; i < d_; ++i) r.e_[i] = e_[i] * s;
    return r;
  }

  bool operator==(const Vec&) const = default;

 private:
  static int check_dim(int d) {
    if (d < 2 || d > kMaxDim) fail(ErrorCode::ConfigInvalid, "vector dimension must be 2..4, got " + std::to_string(d));
    return d;
  }

  int d_ = 0;
  std::array<double, kMaxDim> e_{};
};

// Dense d x d real matrix, d in {2,3,4}, row-major. Immutable-by-convention
// value type; all operations on it are pure.
class Mat {
 public:
  Mat() = default;
  explicit Mat(int d) : d_(check_dim(d)) {}

  static Mat zero(int d) { return Mat(d); }

  static Mat identity(int d) {
    Mat m(d);
    for (int i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
  }

  static Mat diagonal(std::span<const double> entries) {
    Mat m(int(entries.size()));
    for (int i = 0; i < m.d_; ++i) m(i, i) = entries[i];
    return m;
  }

  static Mat diagonal(std::initializer_list<double> entries) {
    return diagonal(std::span<const double>(entries.begin(), entries.size()));
  }

  static Mat from_rows(int d, std::initializer_list<double> xs) {
    Mat m(d);
    int i = 0;
    for (double x : xs) m.e_[i++] = x;
    return m;
  }

  // Rank-one matrix a b^T.
  static Mat outer(const Vec& a, const Vec& b) {
    Mat m(a.dim());
    for (int i = 0; i < m.d_; ++i)
      for (int j = 0; j < m.d_; ++j) m(i, j) = a[i] * b[j];
    return m;
  }

  int dim() const { return d_; }

  double& operator()(int i, int j) { return e_[i * d_ + j]; }
  double operator()(int i, int j) const { return e_[i * d_ + j]; }

  Vec col(int j) const {
    Vec v(d_);
    for (int i = 0; i < d_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  Vec row(int i) const {
    Vec v(d_);
    for (int j = 0; j < d_; ++j) v[j] = (*this)(i, j);
    return v;
  }

  Mat transpose() const {
    Mat m(d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) m(j, i) = (*this)(i, j);
    return m;
  }

  Mat operator+(const Mat& o) const {
    Mat m(d_);
    for (int i = 0; i < d_ * d_; ++i) m.e_[i] = e_[i] + o.e_[i];
    return m;
  }

  Mat operator-(const Mat& o) const {
    Mat m(d_);
    for (int i = 0; i < d_ * d_; ++i) m.e_[i] = e_[i] - o.e_[i];
    return m;
  }

  Mat operator*(double s) const {
    Mat m(d_);
    for (int i = 0; i < d_ * d_; ++i) m.e_[i] = e_[i] * s;
    return m;
  }

  Mat operator*(const Mat& o) const {
    Mat m(d_);
    for (int i = 0; i < d_; ++i)
      for (int k = 0; k < d_; ++k) {
        double a = (*this)(i, k);
        for (int j = 0; j < d_; ++j) m(i, j) += a * o(k, j);
      }
    return m;
  }

  Vec operator*(const Vec& v) const {
    Vec r(d_);
    for (int i = 0; i < d_; ++i) {
      double s = 0;
      for (int j = 0; j < d_; ++j) s += (*this)(i, j) * v[j];
      r[i] = s;
    }
    return r;
  }

  Mat& operator+=(const Mat& o) {
    for (int i = 0; i < d_ * d_; ++i) e_[i] += o.e_[i];
    return *this;
  }

  bool operator==(const Mat&) const = default;

  bool all_finite() const {
    for (int i = 0; i < d_ * d_; ++i)
      if (!std::isfinite(e_[i])) return false;
    return true;
  }

 private:
  static int check_dim(int d) {
    if (d < 2 || d > kMaxDim) fail(ErrorCode::ConfigInvalid, "matrix dimension must be 2..4, got " + std::to_string(d));
    return d;
  }

  int d_ = 0;
  std::array<double, kMaxDim * kMaxDim> e_{};
};

inline Mat operator*(double s, const Mat& m) { return m * s; }

// Entrywise Euclidean norm; equals the l2 norm of the singular values.
inline double frobenius_norm(const Mat& m) {
  double s = 0;
  for (int i = 0; i < m.dim(); ++i)
    for (int j = 0; j < m.dim(); ++j) s += m(i, j) * m(i, j);
  return std::sqrt(s);
}

inline double frobenius_inner(const Mat& a, const Mat& b) {
  double s = 0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) s += a(i, j) * b(i, j);
  return s;
}

namespace detail {

inline double det3(double a00, double a01, double a02, double a10, double a11,
                   double a12, double a20, double a21, double a22) {
  return a00 * (a11 * a22 - a12 * a21) - a01 * (a10 * a22 - a12 * a20) +
         a02 * (a10 * a21 - a11 * a20);
}

}  // namespace detail

// Closed-form determinant, cofactor expansion for d <= 4.
inline double determinant(const Mat& m) {
  switch (m.dim()) {
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return detail::det3(m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2),
                          m(2, 0), m(2, 1), m(2, 2));
    case 4: {
      double c0 = detail::det3(m(1, 1), m(1, 2), m(1, 3), m(2, 1), m(2, 2),
                               m(2, 3), m(3, 1), m(3, 2), m(3, 3));
      double c1 = detail::det3(m(1, 0), m(1, 2), m(1, 3), m(2, 0), m(2, 2),
                               m(2, 3), m(3, 0), m(3, 2), m(3, 3));
      double c2 = detail::det3(m(1, 0), m(1, 1), m(1, 3), m(2, 0), m(2, 1),
                               m(2, 3), m(3, 0), m(3, 1), m(3, 3));
      double c3 = detail::det3(m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1),
                               m(2, 2), m(3, 0), m(3, 1), m(3, 2));
      return m(0, 0) * c0 - m(0, 1) * c1 + m(0, 2) * c2 - m(0, 3) * c3;
    }
    default:
      fail(ErrorCode::ConfigInvalid, "determinant: unsupported dimension");
  }
}

// det-sign classification with tolerance 1e-9 * (1 + |M|)^d.
enum class DetClass { Negative, Zero, Positive };

inline double det_class_tolerance(const Mat& m) {
  double s = 1.0 + frobenius_norm(m);
  double p = 1.0;
  for (int i = 0; i < m.dim(); ++i) p *= s;
  return 1e-9 * p;
}

inline DetClass classify_det(const Mat& m) {
  double det = determinant(m);
  double tol = det_class_tolerance(m);
  if (det < -tol) return DetClass::Negative;
  if (det > tol) return DetClass::Positive;
  return DetClass::Zero;
}

// Max-norm distance to the identity of P^T P; used for rotation checks.
inline double orthogonality_defect(const Mat& p) {
  Mat g = p.transpose() * p;
  double worst = 0;
  for (int i = 0; i < p.dim(); ++i)
    for (int j = 0; j < p.dim(); ++j) {
      double target = (i == j) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(g(i, j) - target));
    }
  return worst;
}

inline bool is_rotation(const Mat& p, double tol) {
  return orthogonality_defect(p) <= tol && std::abs(determinant(p) - 1.0) <= tol;
}

}  // namespace lamina

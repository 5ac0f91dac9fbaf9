#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "lamina/error.hpp"
#include "lamina/matrix.hpp"

namespace lamina {

// Rotational (signed) singular value decomposition M = P diag(theta) Q^T with
// P, Q special-orthogonal and a signed diagonal. Reflections are absorbed into
// the sign of one diagonal entry, so the factorization exists for every M.
enum class SvdOrdering {
  // theta = (-s1, s2, ..., sd) with 0 < s1 <= s2 <= ... <= sd.
  // Only valid for det(M) < 0.
  NegFirstAscending,
  // |theta_1| >= |theta_2| >= ... >= |theta_d|, any M.
  AbsDescending,
};

struct RotSVD {
  Mat P;
  std::array<double, kMaxDim> theta{};
  Mat Q;
  SvdOrdering ordering = SvdOrdering::AbsDescending;

  int dim() const { return P.dim(); }

  Mat diagonal() const {
    Mat d(P.dim());
    for (int i = 0; i < P.dim(); ++i) d(i, i) = theta[i];
    return d;
  }

  Mat reconstruct() const { return P * diagonal() * Q.transpose(); }
};

namespace detail {

// Closed-form signed SVD of a 2x2 block [[a,b],[c,d]]:
//   rot(phi)^T B rot(th) = diag(q + r, q - r)
// with rot(t) = [[cos t, -sin t],[sin t, cos t]].
struct TwoByTwoAngles {
  double phi;  // left rotation angle
  double th;   // right rotation angle
};

inline TwoByTwoAngles svd2_angles(double a, double b, double c, double d) {
  double e = 0.5 * (a + d);
  double f = 0.5 * (a - d);
  double g = 0.5 * (b + c);
  double h = 0.5 * (c - b);
  double a1 = std::atan2(g, f);
  double a2 = std::atan2(h, e);
  return {0.5 * (a1 + a2), 0.5 * (a1 - a2)};
}

// Multiply A <- G(p,q,t)^T A, a plane rotation acting on rows p,q.
inline void rotate_rows(Mat& a, int p, int q, double t) {
  double c = std::cos(t), s = std::sin(t);
  for (int j = 0; j < a.dim(); ++j) {
    double xp = a(p, j), xq = a(q, j);
    a(p, j) = c * xp + s * xq;
    a(q, j) = -s * xp + c * xq;
  }
}

// Multiply A <- A G(p,q,t), a plane rotation acting on columns p,q.
inline void rotate_cols(Mat& a, int p, int q, double t) {
  double c = std::cos(t), s = std::sin(t);
  for (int i = 0; i < a.dim(); ++i) {
    double xp = a(i, p), xq = a(i, q);
    a(i, p) = c * xp + s * xq;
    a(i, q) = -s * xp + c * xq;
  }
}

inline double offdiag_norm(const Mat& a) {
  double s = 0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Two-sided Jacobi iteration: M = U A V^T with U, V accumulated plane
// rotations (hence in SO(d)) and A converging to a signed diagonal.
// Unconditionally convergent at these sizes; sweep cap 200, off-diagonal
// tolerance 1e-14 * |M|.
struct JacobiResult {
  Mat u, a, v;
};

inline JacobiResult jacobi_signed_diagonalize(const Mat& m) {
  const int d = m.dim();
  JacobiResult r{Mat::identity(d), m, Mat::identity(d)};
  const double norm = frobenius_norm(m);
  if (norm == 0.0) return r;
  const double tol = 1e-14 * norm;
  const double skip = 1e-300;

  for (int sweep = 0; sweep < 200; ++sweep) {
    if (offdiag_norm(r.a) <= tol) return r;
    for (int p = 0; p < d - 1; ++p)
      for (int q = p + 1; q < d; ++q) {
        if (std::abs(r.a(p, q)) + std::abs(r.a(q, p)) <= skip) continue;
        auto ang = svd2_angles(r.a(p, p), r.a(p, q), r.a(q, p), r.a(q, q));
        rotate_rows(r.a, p, q, ang.phi);
        rotate_cols(r.a, p, q, ang.th);
        rotate_cols(r.u, p, q, ang.phi);
        rotate_cols(r.v, p, q, ang.th);
      }
  }
  if (offdiag_norm(r.a) <= tol) return r;
  fail(ErrorCode::NoConvergence, "jacobi SVD did not reach tolerance in 200 sweeps");
}

inline void negate_col(Mat& m, int j) {
  for (int i = 0; i < m.dim(); ++i) m(i, j) = -m(i, j);
}

}  // namespace detail

inline RotSVD signed_svd(const Mat& m, SvdOrdering ordering) {
  const int d = m.dim();
  if (!m.all_finite()) fail(ErrorCode::SingularInput, "matrix has non-finite entries");
  if (ordering == SvdOrdering::NegFirstAscending && determinant(m) >= 0.0)
    fail(ErrorCode::SingularInput,
         "neg-first-ascending ordering requires det(M) < 0");

  auto jr = detail::jacobi_signed_diagonalize(m);
  Mat p = jr.u, q = jr.v;
  std::array<double, kMaxDim> sigma{};
  for (int k = 0; k < d; ++k) sigma[k] = jr.a(k, k);

  // Move the diagonal signs into P, leaving sigma >= 0.
  for (int k = 0; k < d; ++k)
    if (sigma[k] < 0.0) {
      sigma[k] = -sigma[k];
      detail::negate_col(p, k);
    }

  // Stable sort on (|theta|, original index); simultaneous column permutation
  // of P and Q keeps the reconstruction intact and the det parities equal.
  std::array<int, kMaxDim> order{};
  std::iota(order.begin(), order.begin() + d, 0);
  const bool ascending = (ordering == SvdOrdering::NegFirstAscending);
  std::stable_sort(order.begin(), order.begin() + d, [&](int i, int j) {
    return ascending ? sigma[i] < sigma[j] : sigma[i] > sigma[j];
  });

  RotSVD out;
  out.ordering = ordering;
  out.P = Mat(d);
  out.Q = Mat(d);
  for (int k = 0; k < d; ++k) {
    out.theta[k] = sigma[order[k]];
    for (int i = 0; i < d; ++i) {
      out.P(i, k) = p(i, order[k]);
      out.Q(i, k) = q(i, order[k]);
    }
  }

  // Sign transfer: restore det P = det Q = 1 by negating one column and the
  // matching diagonal entry. Fix P first; if Q also carries a reflection,
  // negate its last column and the smallest-|theta| entry.
  double det_p = determinant(out.P);
  double det_q = determinant(out.Q);
  if (ordering == SvdOrdering::NegFirstAscending) {
    if (out.theta[0] <= 0.0)
      fail(ErrorCode::SingularInput, "smallest singular value vanished");
    if (det_p < 0.0) {
      detail::negate_col(out.P, 0);
      out.theta[0] = -out.theta[0];
    } else {
      detail::negate_col(out.Q, 0);
      out.theta[0] = -out.theta[0];
    }
  } else {
    if (det_p < 0.0) {
      detail::negate_col(out.P, d - 1);
      out.theta[d - 1] = -out.theta[d - 1];
    }
    if (det_q < 0.0) {
      detail::negate_col(out.Q, d - 1);
      out.theta[d - 1] = -out.theta[d - 1];
    }
  }
  return out;
}

// Singular values of M, descending.
inline std::array<double, kMaxDim> singular_values(const Mat& m) {
  auto jr = detail::jacobi_signed_diagonalize(m);
  std::array<double, kMaxDim> s{};
  for (int k = 0; k < m.dim(); ++k) s[k] = std::abs(jr.a(k, k));
  std::sort(s.begin(), s.begin() + m.dim(), std::greater<>());
  return s;
}

// Second-largest singular value; a value <= tol certifies rank(M) <= 1.
inline double rank_one_defect(const Mat& m) { return singular_values(m)[1]; }

}  // namespace lamina

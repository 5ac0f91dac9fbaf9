#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lamina/error.hpp"
#include "lamina/laminate.hpp"
#include "lamina/matrix.hpp"
#include "lamina/report.hpp"
#include "lamina/svd.hpp"

namespace lamina {

// Finite-order laminate shifting M0 onto { |det| >= delta^d }: after an
// abs-descending signed SVD, every singular direction with |theta_k| < delta
// is split by +-2*delta along (P e_k) x (Q e_k). The result has 2^(d-L)
// atoms, and when at least one split occurs exactly half of them carry
// positive determinant, since |theta_k| < delta forces
// theta_k + 2 delta > delta and theta_k - 2 delta < -delta.
struct DeltaBuild {
  Laminate laminate;
  Mat source;
  double delta = 0.0;
  int L = 0;            // count of |theta_k| >= delta (no split needed)
  int split_count = 0;  // d - L
  int atom_count = 1;   // 2^(d-L)
};

inline DeltaBuild build_delta_laminate(const Mat& m0, double delta) {
  if (!(delta > 0.0)) fail(ErrorCode::NonpositiveDelta, "delta must be > 0");
  const int d = m0.dim();

  auto svd = signed_svd(m0, SvdOrdering::AbsDescending);
  int L = 0;
  while (L < d && std::abs(svd.theta[L]) >= delta) ++L;

  DeltaBuild build;
  build.laminate = Laminate::dirac(m0);
  build.source = m0;
  build.delta = delta;
  build.L = L;
  build.split_count = d - L;
  build.atom_count = 1 << (d - L);
  if (L == d) return build;  // already delta-nondegenerate

  // Split order k = L+1, ..., d (ascending); every current leaf splits, so
  // after the loop the atoms are M0 + sum of s_k * 2 delta (P e_k)(Q e_k)^T
  // over all sign vectors s, each with weight 2^-(d-L).
  std::vector<int> leaves{0};
  for (int k = L; k < d; ++k) {
    Vec a = svd.P.col(k);
    Vec b = svd.Q.col(k);
    std::vector<int> next;
    next.reserve(leaves.size() * 2);
    for (int leaf : leaves) {
      auto [plus, minus] =
          build.laminate.split_leaf(leaf, 0.5, a, b, 2.0 * delta, -2.0 * delta);
      next.push_back(plus);
      next.push_back(minus);
    }
    leaves = std::move(next);
  }
  return build;
}

// Estimate suite:
//   (i)   barycenter = M0,
//   (ii)  every atom has |det| >= delta^d, half positive when split,
//   (iii) raw moment <= 2^(p-1) (|M0|^p + C_p delta^p), C_p = (2 sqrt(d))^p,
//   (iv)  centered moment <= (2 sqrt(d))^p delta^p,
//   (v)   if |det M0| < delta^d, every atom has
//         |det| < 3 delta (|M0| + 2 delta)^(d-1).
inline EstimateReport verify_delta(const DeltaBuild& build, const Mat& m0,
                                   double delta, double p) {
  if (!(build.source == m0) || build.delta != delta)
    fail(ErrorCode::MismatchedInputs, "build was produced from different inputs");
  if (p < 1.0) fail(ErrorCode::ConfigInvalid, "verify_delta requires p >= 1");
  const int d = m0.dim();
  EstimateReport rep;

  Mat bary = barycenter(build.laminate);
  double bres = frobenius_norm(bary - m0) / (1.0 + frobenius_norm(m0));
  rep.add("barycenter_residual", bres, 1e-10, bres <= 1e-10);

  auto atoms = build.laminate.atoms();
  double delta_pow = std::pow(delta, d);
  double min_abs_det = std::numeric_limits<double>::infinity();
  double det_scale = 0.0;
  int positive = 0;
  for (const auto& a : atoms) {
    double det = determinant(a.matrix);
    min_abs_det = std::min(min_abs_det, std::abs(det));
    det_scale = std::max(det_scale, det_class_tolerance(a.matrix));
    if (det > 0.0) ++positive;
  }
  rep.add("support_min_det", min_abs_det, delta_pow - det_scale,
          min_abs_det >= delta_pow - det_scale, "every atom |det| >= delta^d");

  if (build.split_count >= 1) {
    int expected = 1 << (build.split_count - 1);
    rep.add("sign_balance", double(positive), double(expected),
            positive == expected, "positive-determinant atoms");
  } else {
    rep.add("sign_balance", double(positive), double(positive), true,
            "no split performed (L = d); exempt");
  }

  double cp = std::pow(2.0 * std::sqrt(double(d)), p);
  double raw = p_moment(build.laminate, p);
  double raw_bound = std::exp2(p - 1.0) *
                     (std::pow(frobenius_norm(m0), p) + cp * std::pow(delta, p));
  rep.add_le("raw_moment", raw, raw_bound);

  double centered = p_moment(build.laminate, p, &m0);
  rep.add_le("centered_moment", centered, cp * std::pow(delta, p));

  if (std::abs(determinant(m0)) < delta_pow) {
    double bound = 3.0 * delta *
                   std::pow(frobenius_norm(m0) + 2.0 * delta, double(d - 1));
    double max_abs_det = 0.0;
    for (const auto& a : atoms)
      max_abs_det = std::max(max_abs_det, std::abs(determinant(a.matrix)));
    rep.add("near_zero_support", max_abs_det, bound, max_abs_det < bound,
            "|det M0| < delta^d, so atoms stay near the zero set");
  }
  return rep;
}

}  // namespace lamina

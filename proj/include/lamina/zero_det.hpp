#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lamina/error.hpp"
#include "lamina/integrand.hpp"
#include "lamina/laminate.hpp"
#include "lamina/matrix.hpp"
#include "lamina/report.hpp"
#include "lamina/svd.hpp"
#include "lamina/util.hpp"

namespace lamina {

// Geometry of the cascade: the decay ratio r = 2^(p/d - 1) governs every
// moment estimate. For p < d it satisfies 2^((1-d)/d) <= r < 1; at p = d it
// equals 1 and the centered moments stop being Cauchy.
struct GeomParams {
  double p = 1.5;
  int d = 2;
  double r = 0.0;
  int j_max = 10;

  static GeomParams make(double p, int d, int j_max) {
    if (p < 1.0 || p > double(d))
      fail(ErrorCode::ConfigInvalid, "geometry requires 1 <= p <= d");
    GeomParams g;
    g.p = p;
    g.d = d;
    g.j_max = j_max;
    g.r = std::exp2(p / double(d) - 1.0);
    return g;
  }
};

// Explicit constant of the centered moment bound:
//   [sqrt(2) / (2^(1/d) - 1)]^p * [1/(1-r) + r^j].
inline double geometry_constant(double p, int d, int j) {
  double r = std::exp2(p / double(d) - 1.0);
  double front = std::pow(std::sqrt(2.0) / (std::exp2(1.0 / double(d)) - 1.0), p);
  return front * (1.0 / (1.0 - r) + std::pow(r, j));
}

// Split a canonical diagonal matrix diag(-s1, s2, ..., sd) into two
// zero-determinant halves
//   M1: (0, 2*s2, s3, ...),  M2: (-2*s1, 0, s3, ...)
// averaging back to the input. The halves have det = 0 but their difference
// is generally not rank-one, so this is a measure split, not a lamination.
inline std::pair<Mat, Mat> naive_split(const Mat& m0) {
  const int d = m0.dim();
  double norm = frobenius_norm(m0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && std::abs(m0(i, j)) > 1e-12 * (1.0 + norm))
        fail(ErrorCode::BadForm, "naive_split requires a diagonal matrix");
  if (!(m0(0, 0) < 0.0))
    fail(ErrorCode::BadForm, "naive_split requires a negative first diagonal entry");
  for (int k = 1; k < d; ++k) {
    if (!(m0(k, k) > 0.0))
      fail(ErrorCode::BadForm, "naive_split requires positive trailing entries");
    if (k + 1 < d && m0(k, k) > m0(k + 1, k + 1) * (1.0 + 1e-12))
      fail(ErrorCode::BadForm, "naive_split requires ascending trailing entries");
  }
  double s1 = -m0(0, 0);
  double s2 = m0(1, 1);
  Mat m1 = m0;
  m1(0, 0) = 0.0;
  m1(1, 1) = 2.0 * s2;
  Mat m2 = m0;
  m2(0, 0) = -2.0 * s1;
  m2(1, 1) = 0.0;
  return {m1, m2};
}

// Four-way lamination of a canonical diagonal matrix D0 = diag(-s1, s2, ...)
// with 0 < s1 <= s2 <= ... <= sd. With g = sqrt(s1 s2):
//   bad1  = D0 + g e1xe2 + g e2xe1      det = 2 det D0
//   good1 = D0 + g e1xe2 - g e2xe1      det = 0
//   good2 = D0 - g e1xe2 + g e2xe1      det = 0
//   bad2  = D0 - g e1xe2 - g e2xe1      det = 2 det D0
// Every atom sits at Frobenius distance sqrt(2) * g <= sqrt(2) |det D0|^(1/d)
// from D0.
struct DecomposeAtoms {
  Mat bad1, good1, good2, bad2;
  double gamma = 0.0;
};

inline DecomposeAtoms decompose_step(const Mat& d0) {
  const int d = d0.dim();
  double norm = frobenius_norm(d0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && std::abs(d0(i, j)) > 1e-12 * (1.0 + norm))
        fail(ErrorCode::BadForm, "decompose_step requires a diagonal matrix");
  double s1 = -d0(0, 0);
  if (!(s1 > 0.0)) fail(ErrorCode::BadForm, "decompose_step requires d0(0,0) < 0");
  double prev = s1;
  for (int k = 1; k < d; ++k) {
    double sk = d0(k, k);
    if (!(sk > 0.0)) fail(ErrorCode::BadForm, "decompose_step requires positive trailing entries");
    if (sk < prev * (1.0 - 1e-12))
      fail(ErrorCode::BadForm, "decompose_step requires ascending singular values");
    prev = sk;
  }

  DecomposeAtoms out;
  out.gamma = std::sqrt(s1 * d0(1, 1));
  Mat e12 = Mat::outer(Vec::basis(d, 0), Vec::basis(d, 1));
  Mat e21 = Mat::outer(Vec::basis(d, 1), Vec::basis(d, 0));
  out.bad1 = d0 + e12 * out.gamma + e21 * out.gamma;
  out.good1 = d0 + e12 * out.gamma - e21 * out.gamma;
  out.good2 = d0 - e12 * out.gamma + e21 * out.gamma;
  out.bad2 = d0 - e12 * out.gamma - e21 * out.gamma;
  return out;
}

enum class LeafLabel : std::uint8_t { None = 0, Good = 1, Bad = 2 };

// Per-level bookkeeping of the cascade. Distances are stored so that moments
// of every truncation of the build can be evaluated for any p without
// retraversing the tree.
struct LevelRecord {
  int level = 0;
  std::int64_t good_count = 0;
  std::int64_t bad_count = 0;
  double bad_det_min_abs = 0.0;
  double bad_det_max_abs = 0.0;
  double max_step_distance = 0.0;        // sqrt(2) * gamma over the level's splits
  double good_det_scaled_max = 0.0;      // max |det| / (1 + |A|)^d over good atoms
  std::vector<double> good_dists;        // |A - M0| per good atom
  std::vector<double> bad_dists;         // |A - M0| per bad atom
  std::vector<double> bad_detabs;        // |det A| per bad atom
  double good_det_sum = 0.0;
  double bad_det_sum = 0.0;
  Mat good_mat_sum;
  Mat bad_mat_sum;
  double good_neg_mass = 0.0;  // tolerance-classified; expected 0
  double bad_neg_mass = 0.0;   // tolerance-classified; expected 2^-level
};

struct ZeroDetBuild {
  Laminate laminate;
  Mat source;
  int levels = 0;           // requested depth j
  int levels_built = 0;     // equals levels unless truncated
  bool truncated = false;   // determinant underflowed below the recursion floor
  std::vector<LevelRecord> per_level;  // per_level[i-1] describes level i
  std::vector<LeafLabel> leaf_labels;  // indexed by node id
  std::vector<int> final_bad_leaves;
};

namespace detail {

inline double scaled_abs_det(const Mat& m) {
  double s = 1.0 + frobenius_norm(m);
  double p = 1.0;
  for (int i = 0; i < m.dim(); ++i) p *= s;
  return std::abs(determinant(m)) / p;
}

}  // namespace detail

// The cascade: per level, rotate each negative-determinant atom to canonical
// diagonal form, then realize the four-way decomposition as two nested binary
// half-splits, first along (P e1) x (Q e2), then along (P e2) x (Q e1).
// The construction takes no p parameter; only its estimates do.
inline ZeroDetBuild build_zero_det_laminate(const Mat& m0, int j) {
  if (!(determinant(m0) < 0.0))
    fail(ErrorCode::NotNegativeDet, "cascade requires det(M0) < 0");
  if (j < 1) fail(ErrorCode::ConfigInvalid, "level count must be >= 1");
  if (j > 20) fail(ErrorCode::ConfigInvalid, "level count capped at 20");

  const int d = m0.dim();
  ZeroDetBuild build;
  build.laminate = Laminate::dirac(m0);
  build.source = m0;
  build.levels = j;

  std::vector<int> bad_leaves{0};
  double weight = 1.0;  // weight of each bad leaf at the current level

  for (int level = 1; level <= j; ++level) {
    LevelRecord rec;
    rec.level = level;
    rec.good_mat_sum = Mat(d);
    rec.bad_mat_sum = Mat(d);
    rec.bad_det_min_abs = std::numeric_limits<double>::infinity();
    weight *= 0.25;

    // Stop before sqrt(s1*s2) degenerates; the report flags the truncation.
    bool underflow = false;
    for (int leaf : bad_leaves)
      if (std::abs(determinant(build.laminate.node(leaf).matrix)) < 1e-280)
        underflow = true;
    if (underflow) {
      build.truncated = true;
      break;
    }

    std::vector<int> next_bad;
    next_bad.reserve(bad_leaves.size() * 2);
    std::vector<double> gneg, bneg;

    for (int leaf : bad_leaves) {
      const Mat parent = build.laminate.node(leaf).matrix;
      auto svd = signed_svd(parent, SvdOrdering::NegFirstAscending);
      double s1 = -svd.theta[0];
      double s2 = svd.theta[1];
      double gamma = std::sqrt(s1 * s2);
      rec.max_step_distance =
          std::max(rec.max_step_distance, std::sqrt(2.0) * gamma);

      Vec a1 = svd.P.col(0), b1 = svd.Q.col(1);
      Vec a2 = svd.P.col(1), b2 = svd.Q.col(0);
      auto [plus, minus] = build.laminate.split_leaf(leaf, 0.5, a1, b1, gamma, -gamma);
      auto [bad1, good1] = build.laminate.split_leaf(plus, 0.5, a2, b2, gamma, -gamma);
      auto [good2, bad2] = build.laminate.split_leaf(minus, 0.5, a2, b2, gamma, -gamma);

      for (int id : {good1, good2}) {
        const Mat& g = build.laminate.node(id).matrix;
        rec.good_dists.push_back(frobenius_norm(g - m0));
        rec.good_det_sum += determinant(g);
        rec.good_mat_sum += g;
        rec.good_det_scaled_max =
            std::max(rec.good_det_scaled_max, detail::scaled_abs_det(g));
        if (classify_det(g) == DetClass::Negative) gneg.push_back(weight);
        ++rec.good_count;
      }
      for (int id : {bad1, bad2}) {
        const Mat& b = build.laminate.node(id).matrix;
        double adet = std::abs(determinant(b));
        rec.bad_dists.push_back(frobenius_norm(b - m0));
        rec.bad_detabs.push_back(adet);
        rec.bad_det_sum += determinant(b);
        rec.bad_mat_sum += b;
        rec.bad_det_min_abs = std::min(rec.bad_det_min_abs, adet);
        rec.bad_det_max_abs = std::max(rec.bad_det_max_abs, adet);
        if (classify_det(b) == DetClass::Negative) bneg.push_back(weight);
        next_bad.push_back(id);
        ++rec.bad_count;
      }
    }

    rec.good_neg_mass = pairwise_sum(gneg);
    rec.bad_neg_mass = pairwise_sum(bneg);
    build.per_level.push_back(std::move(rec));
    build.levels_built = level;
    bad_leaves = std::move(next_bad);
  }

  build.final_bad_leaves = bad_leaves;
  build.leaf_labels.assign(build.laminate.node_count(), LeafLabel::None);
  for (int id = 0; id < build.laminate.node_count(); ++id)
    if (build.laminate.is_leaf(id)) build.leaf_labels[id] = LeafLabel::Good;
  for (int id : bad_leaves) build.leaf_labels[id] = LeafLabel::Bad;
  return build;
}

namespace detail {

// Moment of the level-j truncation about M0, from the stored distances.
inline double truncated_centered_moment(const ZeroDetBuild& b, double p, int j) {
  std::vector<double> terms;
  double w = 1.0;
  for (int i = 1; i <= j; ++i) {
    w *= 0.25;
    const LevelRecord& rec = b.per_level[i - 1];
    for (double dist : rec.good_dists) terms.push_back(w * std::pow(dist, p));
    if (i == j)
      for (double dist : rec.bad_dists) terms.push_back(w * std::pow(dist, p));
  }
  return pairwise_sum(terms);
}

// Raw moments need |A| rather than |A - M0|, so walk the tree, cutting at
// depth 2j (each cascade level contributes two nested binary splits).
inline double truncated_raw_moment(const ZeroDetBuild& b, double p, int j) {
  std::vector<double> terms;
  struct Frame {
    int id;
    double w;
    int depth;
  };
  std::vector<Frame> fs{{0, 1.0, 0}};
  while (!fs.empty()) {
    Frame f = fs.back();
    fs.pop_back();
    const LamNode& n = b.laminate.node(f.id);
    if (n.is_leaf() || f.depth == 2 * j) {
      terms.push_back(f.w * std::pow(frobenius_norm(n.matrix), p));
      continue;
    }
    fs.push_back({n.right, f.w * (1.0 - n.t), f.depth + 1});
    fs.push_back({n.left, f.w * n.t, f.depth + 1});
  }
  return pairwise_sum(terms);
}

inline Mat truncated_barycenter(const ZeroDetBuild& b, int j) {
  Mat sum(b.source.dim());
  double w = 1.0;
  for (int i = 1; i <= j; ++i) {
    w *= 0.25;
    sum += b.per_level[i - 1].good_mat_sum * w;
    if (i == j) sum += b.per_level[i - 1].bad_mat_sum * w;
  }
  return sum;
}

inline double truncated_det_integral(const ZeroDetBuild& b, int j) {
  double sum = 0.0;
  double w = 1.0;
  for (int i = 1; i <= j; ++i) {
    w *= 0.25;
    sum += b.per_level[i - 1].good_det_sum * w;
    if (i == j) sum += b.per_level[i - 1].bad_det_sum * w;
  }
  return sum;
}

}  // namespace detail

// Barycenter and determinant integral of the level-j truncation, from the
// per-level sums (no tree walk).
inline Mat zero_det_truncated_barycenter(const ZeroDetBuild& b, int j) {
  return detail::truncated_barycenter(b, j);
}

inline double zero_det_truncated_det_integral(const ZeroDetBuild& b, int j) {
  return detail::truncated_det_integral(b, j);
}

inline double zero_det_truncated_centered_moment(const ZeroDetBuild& b,
                                                 double p, int j) {
  return detail::truncated_centered_moment(b, p, j);
}

// Estimate suite for the cascade at truncation level j_eval (default: the
// built depth). Checks, each against its explicit constant:
//   (a) barycenter residual,
//   (b) support: good-atom determinants vanish, negative mass equals 2^-j,
//   (c) centered moment <= C_geom |det M0|^(p/d),
//   (d) raw moment <= 2^p C_geom |det M0|^(p/d) + 2^p |M0|^p,
//   (e) negative-det moment <= |det M0|^(p/d) * sum_{i<=j} r^i.
inline EstimateReport verify_geometry(const ZeroDetBuild& build, const Mat& m0,
                                      double p, int j_eval = -1) {
  if (!(build.source == m0))
    fail(ErrorCode::MismatchedInputs, "build was produced from a different matrix");
  const int d = m0.dim();
  if (!(p >= 1.0 && p < double(d)))
    fail(ErrorCode::ConfigInvalid, "verify_geometry requires 1 <= p < d");
  if (j_eval < 0) j_eval = build.levels_built;
  if (j_eval < 1 || j_eval > build.levels_built)
    fail(ErrorCode::MismatchedInputs, "evaluation level outside the built range");

  EstimateReport rep;
  const double adet = std::abs(determinant(m0));
  const double r = std::exp2(p / double(d) - 1.0);

  if (build.truncated || build.levels_built < build.levels)
    rep.add("truncation", double(build.levels_built), double(build.levels), false,
            "cascade stopped early: determinant underflow");

  Mat bary = detail::truncated_barycenter(build, j_eval);
  double bres = frobenius_norm(bary - m0) / (1.0 + frobenius_norm(m0));
  rep.add("barycenter_residual", bres, 1e-10, bres <= 1e-10);

  double good_det = 0.0;
  for (int i = 1; i <= j_eval; ++i)
    good_det = std::max(good_det, build.per_level[i - 1].good_det_scaled_max);
  rep.add("support_good_det", good_det, 1e-9, good_det <= 1e-9,
          "max |det| over good atoms, scaled by (1+|A|)^d");

  double bad_mass = std::ldexp(double(build.per_level[j_eval - 1].bad_count), -2 * j_eval);
  double expected_mass = std::ldexp(1.0, -j_eval);
  rep.add("support_bad_mass", bad_mass, expected_mass,
          std::abs(bad_mass - expected_mass) <= 1e-15, "must equal 2^-j");

  double c_geom = geometry_constant(p, d, j_eval);
  double centered = detail::truncated_centered_moment(build, p, j_eval);
  rep.add_le("centered_moment", centered, c_geom * std::pow(adet, p / d));

  double raw = detail::truncated_raw_moment(build, p, j_eval);
  double raw_bound = std::exp2(p) * (c_geom * std::pow(adet, p / d) +
                                     std::pow(frobenius_norm(m0), p));
  rep.add_le("raw_moment", raw, raw_bound);

  // Negative-det moment of the truncation: only the level-j bad atoms carry
  // negative determinant. Reference: the geometric series with ratio r.
  {
    const LevelRecord& rec = build.per_level[j_eval - 1];
    double w = std::ldexp(1.0, -2 * j_eval);
    std::vector<double> terms;
    terms.reserve(rec.bad_detabs.size());
    for (double det : rec.bad_detabs) terms.push_back(w * std::pow(det, p / d));
    double measured = pairwise_sum(terms);
    double series = 0.0;
    for (int i = 1; i <= j_eval; ++i) series += std::pow(r, i);
    rep.add_le("neg_det_moment", measured, std::pow(adet, p / d) * series,
               "sum over det<0 atoms of w |det|^(p/d)");
  }
  return rep;
}

struct RigidityRow {
  double p = 0.0;
  int j = 0;
  double moment_centered = 0.0;
  double increment = 0.0;
  double det_integral = 0.0;
};

// Moment growth scan over (p, j). One cascade at max(j_grid) serves every
// truncation. For p < d the increments decay geometrically with ratio r; at
// p = d they stay bounded below, so the moment grows at least linearly.
inline std::vector<RigidityRow> rigidity_scan(const Mat& m0,
                                              const std::vector<double>& p_grid,
                                              const std::vector<int>& j_grid) {
  if (!(determinant(m0) < 0.0))
    fail(ErrorCode::NotNegativeDet, "rigidity scan requires det(M0) < 0");
  if (p_grid.empty() || j_grid.empty())
    fail(ErrorCode::ConfigInvalid, "rigidity scan needs non-empty grids");
  int j_top = 0;
  for (int j : j_grid) {
    if (j < 1) fail(ErrorCode::ConfigInvalid, "levels must be >= 1");
    j_top = std::max(j_top, j);
  }
  for (double p : p_grid)
    if (p < 1.0 || p > double(m0.dim()))
      fail(ErrorCode::ConfigInvalid, "scan requires 1 <= p <= d");

  ZeroDetBuild build = build_zero_det_laminate(m0, j_top);
  std::vector<RigidityRow> rows;
  for (double p : p_grid) {
    double prev = 0.0;
    bool have_prev = false;
    for (int j = 1; j <= j_top; ++j) {
      double m = detail::truncated_centered_moment(build, p, j);
      double inc = have_prev ? m - prev : m;
      prev = m;
      have_prev = true;
      bool wanted = false;
      for (int jj : j_grid) wanted |= (jj == j);
      if (wanted)
        rows.push_back({p, j, m, inc, detail::truncated_det_integral(build, j)});
    }
  }
  return rows;
}

inline std::string rigidity_csv(const std::vector<RigidityRow>& rows) {
  std::string out = "p,j,moment_centered,increment,det_integral\n";
  for (const auto& r : rows) {
    out += format_double(r.p);
    out += ',';
    out += std::to_string(r.j);
    out += ',';
    out += format_double(r.moment_centered);
    out += ',';
    out += format_double(r.increment);
    out += ',';
    out += format_double(r.det_integral);
    out += '\n';
  }
  return out;
}

}  // namespace lamina

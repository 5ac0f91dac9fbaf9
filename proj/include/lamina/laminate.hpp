#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lamina/error.hpp"
#include "lamina/matrix.hpp"
#include "lamina/svd.hpp"
#include "lamina/util.hpp"

namespace lamina {

// Direction and amplitudes of a binary rank-one split: the children of a node
// N are N + amp_left * (a x b) and N + amp_right * (a x b) with
// t * amp_left + (1 - t) * amp_right = 0.
struct SplitWitness {
  Vec a;
  Vec b;
  double amp_left = 0.0;
  double amp_right = 0.0;
};

struct LamNode {
  Mat matrix;
  double t = 0.0;  // weight of the left child (internal nodes only)
  std::int32_t left = -1;
  std::int32_t right = -1;
  SplitWitness witness;  // internal nodes only

  bool is_leaf() const { return left < 0; }
};

struct Atom {
  double weight;
  Mat matrix;
  int leaf_id;
};

// A finite-order laminate: weighted matrix atoms together with the binary
// rank-one splitting tree that certifies them. Atoms are never merged, even
// when equal matrices appear at multiple leaves, so the tree-to-atom
// correspondence stays exact. Values are immutable once built; the split
// member is used by builders, and the free rank_one_split copies first.
class Laminate {
 public:
  static Laminate dirac(const Mat& m) {
    if (!m.all_finite()) fail(ErrorCode::ConfigInvalid, "dirac: non-finite matrix");
    Laminate lam;
    lam.d_ = m.dim();
    lam.nodes_.push_back(LamNode{m});
    return lam;
  }

  // Structural load used by deserialization and tests; performs shape checks
  // only. Run validate_hm to certify the result.
  static Laminate from_nodes(int d, std::vector<LamNode> nodes) {
    if (nodes.empty()) fail(ErrorCode::ConfigInvalid, "laminate must have at least one node");
    for (const auto& n : nodes) {
      if (n.matrix.dim() != d) fail(ErrorCode::ConfigInvalid, "laminate node dimension mismatch");
      if (!n.is_leaf()) {
        if (n.left < 0 || n.right < 0 || n.left >= int(nodes.size())
            || n.right >= int(nodes.size()))
          fail(ErrorCode::ConfigInvalid, "laminate child index out of range");
      }
    }
    Laminate lam;
    lam.d_ = d;
    lam.nodes_ = std::move(nodes);
    return lam;
  }

  int dim() const { return d_; }
  int node_count() const { return int(nodes_.size()); }
  int root() const { return 0; }
  const LamNode& node(int id) const { return nodes_[id]; }
  const Mat& root_matrix() const { return nodes_[0].matrix; }
  bool is_leaf(int id) const { return nodes_[id].is_leaf(); }

  // Replace leaf `leaf_id` by an internal node with children
  //   L = N + amp_left * (a x b),  R = N + amp_right * (a x b).
  // Returns the (left, right) node ids.
  std::pair<int, int> split_leaf(int leaf_id, double t, const Vec& a,
                                 const Vec& b, double amp_left,
                                 double amp_right) {
    if (leaf_id < 0 || leaf_id >= int(nodes_.size()) || !nodes_[leaf_id].is_leaf())
      fail(ErrorCode::NotALeaf, "node " + std::to_string(leaf_id) + " is not a leaf");
    if (!(t > 0.0 && t < 1.0))
      fail(ErrorCode::BarycenterViolation, "split weight t must lie in (0,1)");
    double residual = t * amp_left + (1.0 - t) * amp_right;
    double scale = std::abs(amp_left) + std::abs(amp_right);
    if (std::abs(residual) > 1e-12 * (1.0 + scale))
      fail(ErrorCode::BarycenterViolation,
           "amplitudes do not average to zero: residual " + std::to_string(residual));
    if (a.dim() != d_ || b.dim() != d_)
      fail(ErrorCode::ConfigInvalid, "split direction dimension mismatch");

    Mat dir = Mat::outer(a, b);
    const Mat& n = nodes_[leaf_id].matrix;
    Mat l = n + dir * amp_left;
    Mat r = n + dir * amp_right;
    int li = int(nodes_.size());
    nodes_.push_back(LamNode{l});
    int ri = int(nodes_.size());
    nodes_.push_back(LamNode{r});
    nodes_[leaf_id].t = t;
    nodes_[leaf_id].left = li;
    nodes_[leaf_id].right = ri;
    nodes_[leaf_id].witness = SplitWitness{a, b, amp_left, amp_right};
    return {li, ri};
  }

  // Depth-first, left-before-right; the weight is the product of the t
  // factors along the path. Deterministic atom order.
  template <typename F>
  void for_each_atom(F&& f) const {
    struct Frame {
      int id;
      double w;
    };
    std::vector<Frame> stack{{0, 1.0}};
    while (!stack.empty()) {
      Frame top = stack.back();
      stack.pop_back();
      const LamNode& n = nodes_[top.id];
      if (n.is_leaf()) {
        f(top.w, n.matrix, top.id);
      } else {
        stack.push_back({n.right, top.w * (1.0 - n.t)});
        stack.push_back({n.left, top.w * n.t});
      }
    }
  }

  std::vector<Atom> atoms() const {
    std::vector<Atom> out;
    for_each_atom([&](double w, const Mat& m, int id) { out.push_back({w, m, id}); });
    return out;
  }

  int leaf_count() const {
    int c = 0;
    for (const auto& n : nodes_)
      if (n.is_leaf()) ++c;
    return c;
  }

  int depth() const {
    std::function<int(int)> rec = [&](int id) -> int {
      const LamNode& n = nodes_[id];
      if (n.is_leaf()) return 0;
      return 1 + std::max(rec(n.left), rec(n.right));
    };
    return rec(0);
  }

 private:
  int d_ = 0;
  std::vector<LamNode> nodes_;
};

inline Laminate rank_one_split(const Laminate& lam, int leaf_id, double t,
                               const Vec& a, const Vec& b, double amp_left,
                               double amp_right) {
  Laminate out = lam;
  out.split_leaf(leaf_id, t, a, b, amp_left, amp_right);
  return out;
}

// Weighted atom mean; coincides with the root matrix for valid laminates.
inline Mat barycenter(const Laminate& lam) {
  Mat sum(lam.dim());
  int d = lam.dim();
  std::vector<std::vector<double>> entry_terms(d * d);
  lam.for_each_atom([&](double w, const Mat& m, int) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) entry_terms[i * d + j].push_back(w * m(i, j));
  });
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) sum(i, j) = pairwise_sum(entry_terms[i * d + j]);
  return sum;
}

// Sum of w_k |M_k - center|^p; center defaults to zero.
inline double p_moment(const Laminate& lam, double p,
                       const Mat* center = nullptr) {
  if (p < 1.0) fail(ErrorCode::ConfigInvalid, "p_moment requires p >= 1");
  std::vector<double> terms;
  lam.for_each_atom([&](double w, const Mat& m, int) {
    double dist = center ? frobenius_norm(m - *center) : frobenius_norm(m);
    terms.push_back(w * std::pow(dist, p));
  });
  return pairwise_sum(terms);
}

// Per-node certificate check: every internal node must be the stated convex
// combination of its children and the child difference must be rank-one, at
// tolerances that scale with the matrix magnitudes.
struct HmNodeIssue {
  int node_id;
  double barycenter_residual;
  double rank_defect;
};

struct HmValidation {
  bool pass = true;
  double weight_sum = 0.0;
  double max_barycenter_residual = 0.0;  // relative
  double max_rank_defect = 0.0;          // relative to 1 + |L| + |R|
  double root_residual = 0.0;            // relative
  std::vector<HmNodeIssue> issues;
};

inline HmValidation validate_hm(const Laminate& lam) {
  HmValidation v;
  for (int id = 0; id < lam.node_count(); ++id) {
    const LamNode& n = lam.node(id);
    if (n.is_leaf()) continue;
    const Mat& l = lam.node(n.left).matrix;
    const Mat& r = lam.node(n.right).matrix;
    Mat mix = l * n.t + r * (1.0 - n.t);
    double scale = 1.0 + frobenius_norm(n.matrix);
    double bres = frobenius_norm(mix - n.matrix) / scale;
    double defect_scale = 1.0 + frobenius_norm(l) + frobenius_norm(r);
    double defect = rank_one_defect(l - r) / defect_scale;
    bool node_ok = bres <= 1e-10 && defect <= 1e-9;
    if (!node_ok) {
      v.pass = false;
      v.issues.push_back({id, bres, defect * defect_scale});
    }
    v.max_barycenter_residual = std::max(v.max_barycenter_residual, bres);
    v.max_rank_defect = std::max(v.max_rank_defect, defect);
    if (!(n.t > 0.0 && n.t < 1.0)) v.pass = false;
  }
  std::vector<double> weights;
  lam.for_each_atom([&](double w, const Mat&, int) { weights.push_back(w); });
  v.weight_sum = pairwise_sum(weights);
  if (std::abs(v.weight_sum - 1.0) > 1e-12) v.pass = false;
  Mat bary = barycenter(lam);
  v.root_residual = frobenius_norm(bary - lam.root_matrix()) /
                    (1.0 + frobenius_norm(lam.root_matrix()));
  if (v.root_residual > 1e-10) v.pass = false;
  return v;
}

// Measure-level statistics of the atom family.
struct LaminateStats {
  double mass_det_neg = 0.0;
  double mass_det_zero = 0.0;
  double mass_det_pos = 0.0;
  double p_moment = 0.0;           // about zero
  double centered_p_moment = 0.0;  // about the root matrix
  double det_integral = 0.0;
  double neg_det_q_moment = 0.0;  // sum over det < 0 atoms of w |det|^q
};

inline LaminateStats statistics(const Laminate& lam, double p, double q) {
  LaminateStats s;
  const Mat& root = lam.root_matrix();
  std::vector<double> neg, zero, pos, mom, cmom, deti, negq;
  lam.for_each_atom([&](double w, const Mat& m, int) {
    double det = determinant(m);
    switch (classify_det(m)) {
      case DetClass::Negative:
        neg.push_back(w);
        negq.push_back(w * std::pow(std::abs(det), q));
        break;
      case DetClass::Zero: zero.push_back(w); break;
      case DetClass::Positive: pos.push_back(w); break;
    }
    mom.push_back(w * std::pow(frobenius_norm(m), p));
    cmom.push_back(w * std::pow(frobenius_norm(m - root), p));
    deti.push_back(w * det);
  });
  s.mass_det_neg = pairwise_sum(neg);
  s.mass_det_zero = pairwise_sum(zero);
  s.mass_det_pos = pairwise_sum(pos);
  s.p_moment = pairwise_sum(mom);
  s.centered_p_moment = pairwise_sum(cmom);
  s.det_integral = pairwise_sum(deti);
  s.neg_det_q_moment = pairwise_sum(negq);
  return s;
}

// Push the laminate forward through (P, Q): every node matrix N becomes
// P N Q^T. Rank-one lines map to rank-one lines ((Pa) x (Qb)), so the tree
// structure, weights and determinants are preserved.
inline Laminate pushforward_rotation(const Laminate& lam, const Mat& p,
                                     const Mat& q) {
  if (!is_rotation(p, 1e-10) || !is_rotation(q, 1e-10))
    fail(ErrorCode::NotRotation, "pushforward requires special-orthogonal P, Q");
  std::vector<LamNode> nodes;
  nodes.reserve(lam.node_count());
  Mat qt = q.transpose();
  for (int id = 0; id < lam.node_count(); ++id) {
    LamNode n = lam.node(id);
    n.matrix = p * n.matrix * qt;
    if (!n.is_leaf()) {
      n.witness.a = p * n.witness.a;
      n.witness.b = q * n.witness.b;
    }
    nodes.push_back(std::move(n));
  }
  return Laminate::from_nodes(lam.dim(), std::move(nodes));
}

}  // namespace lamina

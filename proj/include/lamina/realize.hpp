#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lamina/error.hpp"
#include "lamina/laminate.hpp"
#include "lamina/matrix.hpp"
#include "lamina/svd.hpp"
#include "lamina/util.hpp"

namespace lamina {

// Piecewise-affine map of the unit square whose gradient statistics realize a
// laminate. Regions are convex polygons, each carrying u(x) = G x + b.
using Pt = std::array<double, 2>;
using Polygon = std::vector<Pt>;

struct MapRegion {
  Polygon poly;
  Mat grad;
  Pt offset;
};

struct SawtoothMap {
  int depth = 0;
  double epsilon = 0.0;
  int periods = 1;
  std::vector<MapRegion> regions;
};

namespace geo {

inline double polygon_area(const Polygon& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Pt& a = p[i];
    const Pt& b = p[(i + 1) % p.size()];
    s += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * s;
}

// Scalar affine function f(x) = g . x + c.
struct Affine {
  Pt g{0.0, 0.0};
  double c = 0.0;

  // Compensated evaluation (fma products, two-sum accumulation). Clip lines
  // can run nearly parallel to polygon edges; the intersection parameter
  // divides by the value difference along the edge, so plain evaluation
  // noise would shift vertices visibly along such edges.
  double operator()(const Pt& x) const {
    double p0 = g[0] * x[0];
    double e0 = std::fma(g[0], x[0], -p0);
    double p1 = g[1] * x[1];
    double e1 = std::fma(g[1], x[1], -p1);
    double s = p0 + p1;
    double z = s - p0;
    double es = (p0 - (s - z)) + (p1 - z);
    double t = s + c;
    double z2 = t - s;
    double et = (s - (t - z2)) + (c - z2);
    return t + (es + et + e0 + e1);
  }
};

// Clip a convex polygon against the half-plane {f <= 0}.
inline Polygon clip_halfplane(const Polygon& poly, const Affine& f) {
  Polygon out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const Pt& a = poly[i];
    const Pt& b = poly[(i + 1) % n];
    double fa = f(a);
    double fb = f(b);
    if (fa <= 0.0) out.push_back(a);
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb <= 0.0)) {
      double t = fa / (fa - fb);
      out.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])});
    }
  }
  if (out.size() < 3 || std::abs(polygon_area(out)) < 1e-18) out.clear();
  return out;
}

// Split a convex polygon along {f = 0} into the f<=0 and f>=0 parts. Both
// parts receive the *same* intersection vertices, so a partition built from
// repeated splits tiles exactly, with no seams between sibling pieces.
inline std::pair<Polygon, Polygon> split_shared(const Polygon& poly,
                                                const Affine& f) {
  Polygon neg, pos;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Pt& a = poly[i];
    const Pt& b = poly[(i + 1) % n];
    double fa = f(a);
    double fb = f(b);
    if (fa <= 0.0) neg.push_back(a);
    if (fa >= 0.0) pos.push_back(a);
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) {
      double t = fa / (fa - fb);
      Pt v{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
      neg.push_back(v);
      pos.push_back(v);
    }
  }
  if (neg.size() < 3 || std::abs(polygon_area(neg)) < 1e-18) neg.clear();
  if (pos.size() < 3 || std::abs(polygon_area(pos)) < 1e-18) pos.clear();
  return {std::move(neg), std::move(pos)};
}

inline bool on_unit_square_boundary(const Pt& a, const Pt& b) {
  auto on_line = [&](int k, double v) {
    return std::abs(a[k] - v) <= 1e-12 && std::abs(b[k] - v) <= 1e-12;
  };
  return on_line(0, 0.0) || on_line(0, 1.0) || on_line(1, 0.0) || on_line(1, 1.0);
}

// Bucketed point location over region bounding boxes.
class RegionIndex {
 public:
  explicit RegionIndex(const std::vector<MapRegion>& regions, int nb = 64)
      : regions_(regions), nb_(nb), buckets_(std::size_t(nb) * nb) {
    for (int r = 0; r < int(regions.size()); ++r) {
      double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
      for (const Pt& p : regions[std::size_t(r)].poly) {
        x0 = std::min(x0, p[0]);
        x1 = std::max(x1, p[0]);
        y0 = std::min(y0, p[1]);
        y1 = std::max(y1, p[1]);
      }
      for (int bx = cell(x0); bx <= cell(x1); ++bx)
        for (int by = cell(y0); by <= cell(y1); ++by)
          buckets_[std::size_t(bx) * nb_ + by].push_back(r);
    }
  }

  int locate(const Pt& x) const {
    const auto& cand = buckets_[std::size_t(cell(x[0])) * nb_ + cell(x[1])];
    for (int r : cand)
      if (contains(regions_[std::size_t(r)].poly, x)) return r;
    return -1;
  }

  static bool contains(const Polygon& poly, const Pt& x) {
    const std::size_t n = poly.size();
    bool any_edge = false;
    for (std::size_t i = 0; i < n; ++i) {
      const Pt& a = poly[i];
      const Pt& b = poly[(i + 1) % n];
      double len = std::hypot(b[0] - a[0], b[1] - a[1]);
      if (len < 1e-14) continue;  // duplicate vertex
      any_edge = true;
      double cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
      if (cross / len < -1e-12) return false;
    }
    return any_edge;
  }

 private:
  int cell(double v) const {
    int c = int(std::floor(v * nb_));
    return std::clamp(c, 0, nb_ - 1);
  }

  const std::vector<MapRegion>& regions_;
  int nb_;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace geo

namespace detail {

struct SplitData {
  Vec a;
  Vec n;
  double amp_left;
  double amp_right;
};

// Witness of an internal node; recovered from the children when the tree was
// loaded without one (the JSON schema does not carry split directions).
inline SplitData split_data(const Laminate& lam, int id) {
  const LamNode& node = lam.node(id);
  SplitData sd{node.witness.a, node.witness.b, node.witness.amp_left,
               node.witness.amp_right};
  bool have_witness =
      sd.a.dim() == lam.dim() && (sd.a.norm() > 0.0 || sd.amp_left != 0.0);
  if (!have_witness) {
    Mat diff = lam.node(node.left).matrix - lam.node(node.right).matrix;
    double scale = 1.0 + frobenius_norm(lam.node(node.left).matrix) +
                   frobenius_norm(lam.node(node.right).matrix);
    if (frobenius_norm(diff) <= 1e-14 * scale) {
      // degenerate split: both children equal the node
      sd.a = Vec::basis(lam.dim(), 0);
      sd.n = Vec::basis(lam.dim(), 1);
      sd.amp_left = sd.amp_right = 0.0;
      return sd;
    }
    if (rank_one_defect(diff) > 1e-9 * scale)
      fail(ErrorCode::IncompatibleSplit,
           "node " + std::to_string(id) + " children are not rank-one connected");
    auto svd = signed_svd(diff, SvdOrdering::AbsDescending);
    sd.a = svd.P.col(0) * svd.theta[0];
    sd.n = svd.Q.col(0);
    Mat dir = Mat::outer(sd.a, sd.n);
    double denom = frobenius_inner(dir, dir);
    sd.amp_left = frobenius_inner(lam.node(node.left).matrix - node.matrix, dir) / denom;
    sd.amp_right = frobenius_inner(lam.node(node.right).matrix - node.matrix, dir) / denom;
  }
  if (std::abs(sd.n.norm() - 1.0) > 1e-12)
    fail(ErrorCode::NotUnitNormal,
         "split normal of node " + std::to_string(id) + " is not unit length");
  return sd;
}

struct VanishEdge {
  Pt normal;     // inward unit normal
  double offset; // dist(x) = normal . x - offset >= 0 inside
  double extent; // polygon extent along the normal
};

inline std::vector<VanishEdge> interior_edges(const Polygon& poly) {
  std::vector<VanishEdge> edges;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Pt& a = poly[i];
    const Pt& b = poly[(i + 1) % n];
    if (geo::on_unit_square_boundary(a, b)) continue;
    double dx = b[0] - a[0], dy = b[1] - a[1];
    double len = std::hypot(dx, dy);
    if (len < 1e-14) continue;
    Pt normal{-dy / len, dx / len};
    double off = normal[0] * a[0] + normal[1] * a[1];
    double ext = 0.0;
    for (const Pt& p : poly)
      ext = std::max(ext, normal[0] * p[0] + normal[1] * p[1] - off);
    if (ext > 1e-14) edges.push_back({normal, off, ext});
  }
  return edges;
}

struct Realizer {
  const Laminate& lam;
  double epsilon;
  int periods;
  std::vector<MapRegion> out;

  void emit(Polygon poly, const Mat& grad, const Pt& offset) {
    if (poly.size() >= 3 && std::abs(geo::polygon_area(poly)) > 1e-15)
      out.push_back({std::move(poly), grad, offset});
  }

  // Realize node `id` on `poly`, where the map currently is
  // u(x) = node.matrix x + offset. The oscillation realizing the node's split
  // is cut off along `vanish` so that its displacement vanishes there.
  void realize(int id, const Polygon& poly, const Pt& offset,
               const std::vector<VanishEdge>& vanish) {
    const LamNode& node = lam.node(id);
    if (node.is_leaf()) {
      emit(poly, node.matrix, offset);
      return;
    }
    SplitData sd = split_data(lam, id);
    const Pt ndir{sd.n[0], sd.n[1]};
    const Pt adir{sd.a[0], sd.a[1]};
    const double t = node.t;

    double lo = 1e300, hi = -1e300;
    for (const Pt& p : poly) {
      double s = ndir[0] * p[0] + ndir[1] * p[1];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    if (hi - lo < 1e-14) return;

    double h;
    if (vanish.empty()) {
      h = (hi - lo) / periods;
    } else {
      double ext = 1e300;
      for (const VanishEdge& e : vanish) ext = std::min(ext, e.extent);
      h = epsilon * ext;
    }
    const double peak = sd.amp_left * t * h;  // signed displacement maximum
    const double sgn = peak >= 0.0 ? 1.0 : -1.0;

    // cutoff ramps: c_e * dist_e reaches |peak| within a strip of relative
    // width epsilon/K along each interior edge, K scaling with the edge count
    // so the transition volume per nesting level stays below 2 epsilon
    struct Ramp {
      geo::Affine f;       // nonnegative inside
      Pt normal;
    };
    std::vector<Ramp> ramps;
    const double edge_scale = std::max(1.0, 0.5 * double(vanish.size()));
    for (const VanishEdge& e : vanish) {
      double ce = std::abs(peak) * edge_scale / (epsilon * e.extent);
      ramps.push_back({{{ce * e.normal[0], ce * e.normal[1]}, -ce * e.offset},
                       e.normal});
    }

    const int nper = std::max(1, int(std::ceil((hi - lo) / h - 1e-9)));
    for (int k = 0; k < nper; ++k) {
      double s0 = lo + k * h;
      for (int phase = 0; phase < 2; ++phase) {
        double a0 = phase == 0 ? s0 : s0 + t * h;
        double a1 = phase == 0 ? s0 + t * h : s0 + h;
        Polygon strip = geo::clip_halfplane(
            poly, {{-ndir[0], -ndir[1]}, a0});  // n.x >= a0
        strip = geo::clip_halfplane(strip, {{ndir[0], ndir[1]}, -a1});
        if (strip.empty()) continue;

        int child = phase == 0 ? node.left : node.right;
        double slope = phase == 0 ? sd.amp_left : sd.amp_right;
        // displacement on this phase: g(x) = slope * (n.x) + gc
        double gc = phase == 0 ? -sd.amp_left * s0
                               : sd.amp_left * t * h - sd.amp_right * (s0 + t * h);

        if (std::abs(peak) == 0.0 || ramps.empty()) {
          descend(child, strip, {offset[0] + adir[0] * gc, offset[1] + adir[1] * gc});
          continue;
        }

        // partition the strip by the active branch of
        //   phi = sgn * min(sgn * g, ramps...)
        // Pieces are produced by successive shared splits along the pairwise
        // equality lines, so the final pieces tile the strip exactly; each
        // piece is then classified by the minimal candidate at its centroid.
        geo::Affine gh{{sgn * slope * ndir[0], sgn * slope * ndir[1]}, sgn * gc};
        std::vector<geo::Affine> cands{gh};
        for (const Ramp& r : ramps) cands.push_back(r.f);

        std::vector<Polygon> pieces{strip};
        for (std::size_t i = 0; i < cands.size(); ++i)
          for (std::size_t j = i + 1; j < cands.size(); ++j) {
            geo::Affine diff{{cands[i].g[0] - cands[j].g[0],
                              cands[i].g[1] - cands[j].g[1]},
                             cands[i].c - cands[j].c};
            std::vector<Polygon> next;
            next.reserve(pieces.size());
            for (Polygon& piece : pieces) {
              double lo2 = 1e300, hi2 = -1e300;
              for (const Pt& p : piece) {
                double v = diff(p);
                lo2 = std::min(lo2, v);
                hi2 = std::max(hi2, v);
              }
              if (lo2 < 0.0 && hi2 > 0.0) {
                auto [neg, pos] = geo::split_shared(piece, diff);
                if (!neg.empty()) next.push_back(std::move(neg));
                if (!pos.empty()) next.push_back(std::move(pos));
              } else {
                next.push_back(std::move(piece));
              }
            }
            pieces = std::move(next);
          }

        for (Polygon& piece : pieces) {
          Pt centroid{0.0, 0.0};
          for (const Pt& p : piece) {
            centroid[0] += p[0];
            centroid[1] += p[1];
          }
          centroid[0] /= double(piece.size());
          centroid[1] /= double(piece.size());
          std::size_t active = 0;
          double best = cands[0](centroid);
          for (std::size_t i = 1; i < cands.size(); ++i) {
            double v = cands[i](centroid);
            if (v < best) {
              best = v;
              active = i;
            }
          }
          if (active == 0) {
            descend(child, piece,
                    {offset[0] + adir[0] * gc, offset[1] + adir[1] * gc});
          } else {
            // ramp piece: u = node x + offset + sgn * a * ramp(x)
            const Ramp& r = ramps[active - 1];
            Mat grad = node.matrix;
            for (int ii = 0; ii < 2; ++ii)
              for (int jj = 0; jj < 2; ++jj)
                grad(ii, jj) += sgn * adir[ii] * r.f.g[jj];
            emit(piece, grad,
                 {offset[0] + sgn * adir[0] * r.f.c,
                  offset[1] + sgn * adir[1] * r.f.c});
          }
        }
      }
    }
  }

  void descend(int child, const Polygon& region, const Pt& offset) {
    if (lam.node(child).is_leaf()) {
      emit(region, lam.node(child).matrix, offset);
      return;
    }
    realize(child, region, offset, interior_edges(region));
  }
};

}  // namespace detail

inline SawtoothMap realize_laminate(const Laminate& lam, int depth_cap,
                                    double epsilon, int periods) {
  if (lam.dim() != 2)
    fail(ErrorCode::ConfigInvalid, "realization supports d = 2 only");
  if (depth_cap < 0 || depth_cap > 3)
    fail(ErrorCode::ConfigInvalid, "depth cap must lie in 0..3");
  if (!(epsilon > 0.0 && epsilon < 0.25))
    fail(ErrorCode::ConfigInvalid, "epsilon must lie in (0, 1/4)");
  if (periods < 1) fail(ErrorCode::ConfigInvalid, "periods must be >= 1");
  if (lam.depth() > depth_cap)
    fail(ErrorCode::DepthExceeded,
         "laminate depth " + std::to_string(lam.depth()) + " exceeds cap " +
             std::to_string(depth_cap));

  detail::Realizer rz{lam, epsilon, periods, {}};
  Polygon square{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  rz.realize(lam.root(), square, {0.0, 0.0}, {});
  SawtoothMap map;
  map.depth = lam.depth();
  map.epsilon = epsilon;
  map.periods = periods;
  map.regions = std::move(rz.out);
  return map;
}

// Exact volume fractions of the constant-gradient regions, grouped by matrix.
inline std::vector<std::pair<double, Mat>> gradient_histogram(
    const SawtoothMap& map) {
  std::vector<std::pair<double, Mat>> hist;
  for (const MapRegion& r : map.regions) {
    double area = std::abs(geo::polygon_area(r.poly));
    bool merged = false;
    for (auto& [w, m] : hist) {
      if (frobenius_norm(m - r.grad) <= 1e-12 * (1.0 + frobenius_norm(m))) {
        w += area;
        merged = true;
        break;
      }
    }
    if (!merged) hist.push_back({area, r.grad});
  }
  std::sort(hist.begin(), hist.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  return hist;
}

// Total-variation distance between the realized gradient statistics and the
// laminate's atom weights.
inline double histogram_tv_distance(const SawtoothMap& map, const Laminate& lam) {
  auto hist = gradient_histogram(map);
  std::vector<std::pair<double, Mat>> atoms;
  lam.for_each_atom([&](double w, const Mat& m, int) {
    for (auto& [aw, am] : atoms)
      if (frobenius_norm(am - m) <= 1e-12 * (1.0 + frobenius_norm(am))) {
        aw += w;
        return;
      }
    atoms.push_back({w, m});
  });

  double tv = 0.0;
  std::vector<bool> used(hist.size(), false);
  for (const auto& [aw, am] : atoms) {
    double hw = 0.0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      if (used[i]) continue;
      if (frobenius_norm(hist[i].second - am) <=
          1e-9 * (1.0 + frobenius_norm(am))) {
        hw += hist[i].first;
        used[i] = true;
      }
    }
    tv += std::abs(aw - hw);
  }
  for (std::size_t i = 0; i < hist.size(); ++i)
    if (!used[i]) tv += hist[i].first;  // transition-band gradients
  return 0.5 * tv;
}

// Largest map-value mismatch across internal interfaces; exact-assembly maps
// stay at rounding level.
inline double continuity_residual(const SawtoothMap& map) {
  geo::RegionIndex index(map.regions);
  double worst = 0.0;
  for (const MapRegion& r : map.regions) {
    const std::size_t n = r.poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Pt& a = r.poly[i];
      const Pt& b = r.poly[(i + 1) % n];
      if (geo::on_unit_square_boundary(a, b)) continue;
      double dx = b[0] - a[0], dy = b[1] - a[1];
      double len = std::hypot(dx, dy);
      if (len < 1e-13) continue;
      Pt outward{dy / len, -dx / len};
      for (double t : {0.31, 0.73}) {
        Pt q{a[0] + t * dx, a[1] + t * dy};
        Pt probe{q[0] + 1e-9 * outward[0], q[1] + 1e-9 * outward[1]};
        if (probe[0] < 0 || probe[0] > 1 || probe[1] < 0 || probe[1] > 1) continue;
        int other = index.locate(probe);
        if (other < 0) continue;
        const MapRegion& o = map.regions[std::size_t(other)];
        for (int k = 0; k < 2; ++k) {
          double ur = r.grad(k, 0) * q[0] + r.grad(k, 1) * q[1] + r.offset[k];
          double uo = o.grad(k, 0) * q[0] + o.grad(k, 1) * q[1] + o.offset[k];
          worst = std::max(worst, std::abs(ur - uo));
        }
      }
    }
  }
  return worst;
}

// Map evaluation (first matching region).
inline bool evaluate_map(const geo::RegionIndex& index, const SawtoothMap& map,
                         const Pt& x, Pt& value, Mat& grad) {
  int r = index.locate(x);
  if (r < 0) return false;
  const MapRegion& reg = map.regions[std::size_t(r)];
  value = {reg.grad(0, 0) * x[0] + reg.grad(0, 1) * x[1] + reg.offset[0],
           reg.grad(1, 0) * x[0] + reg.grad(1, 1) * x[1] + reg.offset[1]};
  grad = reg.grad;
  return true;
}

// Sample the map and its gradient on an m x m grid of cell centers.
inline std::string sample_grid_csv(const SawtoothMap& map, int m) {
  geo::RegionIndex index(map.regions);
  std::string out = "x,y,u1,u2,g11,g12,g21,g22\n";
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Pt x{(i + 0.5) / m, (j + 0.5) / m};
      Pt u;
      Mat g(2);
      if (!evaluate_map(index, map, x, u, g)) continue;
      out += format_double(x[0]);
      out += ',';
      out += format_double(x[1]);
      out += ',';
      out += format_double(u[0]);
      out += ',';
      out += format_double(u[1]);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          out += ',';
          out += format_double(g(a, b));
        }
      out += '\n';
    }
  return out;
}

}  // namespace lamina

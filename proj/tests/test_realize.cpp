#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lamina/json_io.hpp"
#include "lamina/realize.hpp"
#include "lamina/rng.hpp"
#include "lamina/zero_det.hpp"
#include "oracles.hpp"

using namespace lamina;

namespace {

double histogram_total(const SawtoothMap& map) {
  double s = 0.0;
  for (const auto& [w, m] : gradient_histogram(map)) s += w;
  return s;
}

double negative_jacobian_volume(const SawtoothMap& map) {
  double s = 0.0;
  for (const MapRegion& r : map.regions)
    if (classify_det(r.grad) == DetClass::Negative)
      s += std::abs(geo::polygon_area(r.poly));
  return s;
}

}  // namespace

TEST_CASE("classic sawtooth") {
  Laminate lam = Laminate::dirac(Mat::zero(2));
  lam.split_leaf(0, 0.5, Vec::basis(2, 0), Vec::basis(2, 0), 1.0, -1.0);
  auto map = realize_laminate(lam, 1, 0.1, 8);

  auto hist = gradient_histogram(map);
  REQUIRE(hist.size() == 2);
  CHECK(hist[0].first == Catch::Approx(0.5).margin(1e-12));
  CHECK(hist[1].first == Catch::Approx(0.5).margin(1e-12));
  CHECK(histogram_total(map) == Catch::Approx(1.0).margin(1e-12));
  CHECK(histogram_tv_distance(map, lam) <= 1e-12);
  CHECK(continuity_residual(map) <= 1e-12);

  // the map is (h(x1), 0) with h a zigzag of slope +-1
  Mat e11 = Mat::outer(Vec::basis(2, 0), Vec::basis(2, 0));
  for (const auto& [w, m] : hist)
    CHECK((frobenius_norm(m - e11) < 1e-12 || frobenius_norm(m + e11) < 1e-12));
}

TEST_CASE("dirac realization is an affine map") {
  Mat m = Mat::from_rows(2, {1.5, 0.25, -0.75, 2.0});
  auto map = realize_laminate(Laminate::dirac(m), 0, 0.1, 4);
  auto hist = gradient_histogram(map);
  REQUIRE(hist.size() == 1);
  CHECK(hist[0].first == Catch::Approx(1.0).margin(1e-12));
  CHECK(frobenius_norm(hist[0].second - m) < 1e-14);

  geo::RegionIndex index(map.regions);
  Pt u;
  Mat g(2);
  REQUIRE(evaluate_map(index, map, {0.3, 0.7}, u, g));
  CHECK(u[0] == Catch::Approx(m(0, 0) * 0.3 + m(0, 1) * 0.7).margin(1e-14));
  CHECK(u[1] == Catch::Approx(m(1, 0) * 0.3 + m(1, 1) * 0.7).margin(1e-14));
}

TEST_CASE("asymmetric weights realize exactly") {
  Laminate lam = Laminate::dirac(Mat::identity(2));
  lam.split_leaf(0, 0.25, Vec::basis(2, 1), Vec::basis(2, 0), 3.0, -1.0);
  auto map = realize_laminate(lam, 1, 0.1, 6);
  auto hist = gradient_histogram(map);
  REQUIRE(hist.size() == 2);
  CHECK(hist[0].first == Catch::Approx(0.75).margin(1e-12));
  CHECK(hist[1].first == Catch::Approx(0.25).margin(1e-12));
  CHECK(continuity_residual(map) <= 1e-12);
  CHECK(histogram_tv_distance(map, lam) <= 1e-12);
}

TEST_CASE("level-1 cascade realization") {
  Mat m0 = Mat::diagonal({-1.0, 1.0});
  auto build = build_zero_det_laminate(m0, 1);
  const Laminate& lam = build.laminate;
  REQUIRE(lam.depth() == 2);

  SECTION("TV budget and continuity across the epsilon grid") {
    double prev_tv = 1e300;
    for (double eps : {0.2, 0.1, 0.05}) {
      auto map = realize_laminate(lam, 2, eps, 8);
      double tv = histogram_tv_distance(map, lam);
      INFO("eps=" << eps << " tv=" << tv << " regions=" << map.regions.size());
      CHECK(tv <= 2.0 * eps * lam.depth());
      CHECK(tv < prev_tv);
      prev_tv = tv;
      CHECK(continuity_residual(map) <= 1e-12);
      CHECK(histogram_total(map) == Catch::Approx(1.0).margin(1e-12));
    }
  }

  SECTION("determinant-sign volume fidelity") {
    auto map = realize_laminate(lam, 2, 0.1, 8);
    double tv = histogram_tv_distance(map, lam);
    auto stats = statistics(lam, 2.0, 1.0);
    CHECK(std::abs(negative_jacobian_volume(map) - stats.mass_det_neg) <=
          tv + 1e-12);
  }

  SECTION("rotated laminate realizes with oblique bands") {
    SplitMix64 rng(404);
    Mat p = signed_svd(random_matrix(rng, 2), SvdOrdering::AbsDescending).P;
    Mat q = signed_svd(random_matrix(rng, 2), SvdOrdering::AbsDescending).P;
    Laminate moved = pushforward_rotation(lam, p, q);
    auto map = realize_laminate(moved, 2, 0.1, 6);
    CHECK(continuity_residual(map) <= 1e-12);
    CHECK(histogram_tv_distance(map, moved) <= 2.0 * 0.1 * moved.depth());
    CHECK(histogram_total(map) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("depth-3 nesting") {
  SplitMix64 rng(777);
  Laminate lam = Laminate::dirac(Mat::zero(2));
  // three nested splits along rotating unit directions
  auto unit = [&](double angle) {
    Vec v(2);
    v[0] = std::cos(angle);
    v[1] = std::sin(angle);
    return v;
  };
  auto [l1, r1] = lam.split_leaf(0, 0.5, unit(0.3), unit(1.2), 1.0, -1.0);
  auto [l2, r2] = lam.split_leaf(l1, 0.4, unit(-0.5), unit(0.4), 0.9, -0.6);
  lam.split_leaf(l2, 0.5, unit(1.0), unit(2.2), 0.5, -0.5);
  REQUIRE(lam.depth() == 3);
  REQUIRE(validate_hm(lam).pass);

  auto map = realize_laminate(lam, 3, 0.1, 3);
  CHECK(continuity_residual(map) <= 1e-12);
  CHECK(histogram_total(map) == Catch::Approx(1.0).margin(1e-12));
  CHECK(histogram_tv_distance(map, lam) <= 2.0 * 0.1 * 3);
}

TEST_CASE("realization via json round trip recovers split directions") {
  Mat m0 = Mat::diagonal({-1.0, 1.0});
  auto build = build_zero_det_laminate(m0, 1);
  Laminate loaded = laminate_from_json(to_json(build.laminate));
  REQUIRE(validate_hm(loaded).pass);
  auto direct = realize_laminate(build.laminate, 2, 0.1, 8);
  auto viajson = realize_laminate(loaded, 2, 0.1, 8);
  auto h0 = gradient_histogram(direct);
  auto h1 = gradient_histogram(viajson);
  REQUIRE(h0.size() == h1.size());
  double tv = histogram_tv_distance(viajson, build.laminate);
  CHECK(tv <= 2.0 * 0.1 * 2);
  CHECK(continuity_residual(viajson) <= 1e-12);
}

TEST_CASE("realization rejects bad inputs") {
  Mat m0 = Mat::diagonal({-1.0, 1.0});
  auto deep = build_zero_det_laminate(m0, 2);  // depth 4
  CHECK_THROWS_MATCHES(realize_laminate(deep.laminate, 3, 0.1, 4), Error,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("DepthExceeded")));

  auto build = build_zero_det_laminate(m0, 1);
  CHECK_THROWS_AS(realize_laminate(build.laminate, 2, 0.3, 4), Error);
  CHECK_THROWS_AS(realize_laminate(build.laminate, 2, 0.0, 4), Error);
  CHECK_THROWS_AS(realize_laminate(build.laminate, 2, 0.1, 0), Error);
  CHECK_THROWS_AS(realize_laminate(build.laminate, 4, 0.1, 4), Error);

  auto b3 = build_zero_det_laminate(Mat::diagonal({-1.0, 1.0, 1.0}), 1);
  CHECK_THROWS_AS(realize_laminate(b3.laminate, 2, 0.1, 4), Error);

  Laminate nonunit = Laminate::dirac(Mat::zero(2));
  Vec long_b(2);
  long_b[1] = 2.0;
  nonunit.split_leaf(0, 0.5, Vec::basis(2, 0), long_b, 1.0, -1.0);
  CHECK_THROWS_MATCHES(realize_laminate(nonunit, 1, 0.1, 4), Error,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("NotUnitNormal")));
}

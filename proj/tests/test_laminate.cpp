#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lamina/delta_shift.hpp"
#include "lamina/integrand.hpp"
#include "lamina/laminate.hpp"
#include "lamina/rng.hpp"
#include "lamina/zero_det.hpp"
#include "oracles.hpp"

using namespace lamina;

namespace {

// Random but always-valid laminate: a chain of legal rank-one splits applied
// to random leaves.
Laminate random_laminate(SplitMix64& rng, int d, int splits) {
  Laminate lam = Laminate::dirac(random_matrix(rng, d, 2.0));
  for (int s = 0; s < splits; ++s) {
    std::vector<int> leaves;
    for (int id = 0; id < lam.node_count(); ++id)
      if (lam.is_leaf(id)) leaves.push_back(id);
    int leaf = leaves[rng.next() % leaves.size()];
    double t = 0.1 + 0.8 * rng.uniform01();
    Vec a(d), b(d);
    for (int i = 0; i < d; ++i) {
      a[i] = rng.symmetric();
      b[i] = rng.symmetric();
    }
    if (a.norm() < 1e-3 || b.norm() < 1e-3) {
      --s;
      continue;
    }
    double amp_left = 2.0 * rng.symmetric();
    double amp_right = -t * amp_left / (1.0 - t);
    lam.split_leaf(leaf, t, a, b, amp_left, amp_right);
  }
  return lam;
}

}  // namespace

TEST_CASE("dirac laminate") {
  Mat m = Mat::diagonal({-1.0, 1.0});
  Laminate lam = Laminate::dirac(m);
  auto atoms = lam.atoms();
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0].weight == 1.0);
  CHECK(atoms[0].matrix == m);
  CHECK(barycenter(lam) == m);
  for (double p : {1.0, 2.0, 3.5})
    CHECK(p_moment(lam, p) ==
          Catch::Approx(std::pow(frobenius_norm(m), p)));
}

TEST_CASE("rank one split") {
  SECTION("symmetric split of zero") {
    Laminate lam = Laminate::dirac(Mat::zero(2));
    lam.split_leaf(0, 0.5, Vec::basis(2, 0), Vec::basis(2, 0), 1.0, -1.0);
    auto atoms = lam.atoms();
    REQUIRE(atoms.size() == 2);
    Mat e11 = Mat::outer(Vec::basis(2, 0), Vec::basis(2, 0));
    CHECK(atoms[0].weight == 0.5);
    CHECK(atoms[0].matrix == e11);
    CHECK(atoms[1].matrix == e11 * -1.0);
    CHECK(frobenius_norm(barycenter(lam)) < 1e-15);
  }

  SECTION("split of diag(-1,1) along e1 x e2") {
    Mat m = Mat::diagonal({-1.0, 1.0});
    Laminate lam = rank_one_split(Laminate::dirac(m), 0, 0.5, Vec::basis(2, 0),
                                  Vec::basis(2, 1), 1.0, -1.0);
    auto atoms = lam.atoms();
    REQUIRE(atoms.size() == 2);
    CHECK(atoms[0].matrix == Mat::from_rows(2, {-1, 1, 0, 1}));
    CHECK(atoms[1].matrix == Mat::from_rows(2, {-1, -1, 0, 1}));
    CHECK(oracles::mat_rel_err(barycenter(lam), m) < 1e-15);
  }

  SECTION("asymmetric weights keep the barycenter") {
    Laminate lam = Laminate::dirac(Mat::identity(2));
    lam.split_leaf(0, 0.25, Vec::basis(2, 1), Vec::basis(2, 0), 3.0, -1.0);
    CHECK(oracles::mat_rel_err(barycenter(lam), Mat::identity(2)) < 1e-15);
    CHECK(validate_hm(lam).pass);
  }

  SECTION("errors") {
    Laminate lam = Laminate::dirac(Mat::identity(2));
    lam.split_leaf(0, 0.5, Vec::basis(2, 0), Vec::basis(2, 1), 1.0, -1.0);
    CHECK_THROWS_AS(lam.split_leaf(0, 0.5, Vec::basis(2, 0), Vec::basis(2, 1), 1.0, -1.0), Error);
    // amplitudes that do not cancel
    CHECK_THROWS_AS(lam.split_leaf(1, 0.5, Vec::basis(2, 0), Vec::basis(2, 1), 1.0, -0.5), Error);
    CHECK_THROWS_AS(lam.split_leaf(1, 1.5, Vec::basis(2, 0), Vec::basis(2, 1), 1.0, -1.0), Error);
  }
}

TEST_CASE("validate_hm") {
  SECTION("split chains pass by construction") {
    SplitMix64 rng(42);
    for (int d : {2, 3}) {
      for (int trial = 0; trial < 20; ++trial) {
        Laminate lam = random_laminate(rng, d, 12);
        auto v = validate_hm(lam);
        CHECK(v.pass);
      }
    }
  }

  SECTION("hand-built pair with rank defect 2 fails") {
    std::vector<LamNode> nodes(3);
    nodes[0].matrix = Mat::diagonal({-1.0, 2.0, 3.0});
    nodes[0].t = 0.5;
    nodes[0].left = 1;
    nodes[0].right = 2;
    nodes[1].matrix = Mat::diagonal({0.0, 4.0, 3.0});
    nodes[2].matrix = Mat::diagonal({-2.0, 0.0, 3.0});
    Laminate lam = Laminate::from_nodes(3, nodes);
    auto v = validate_hm(lam);
    CHECK_FALSE(v.pass);
    REQUIRE_FALSE(v.issues.empty());
    CHECK(v.issues[0].rank_defect == Catch::Approx(2.0).margin(1e-9));
  }

  SECTION("mismatched weights fail with a barycenter residual") {
    std::vector<LamNode> nodes(3);
    nodes[0].matrix = Mat::diagonal({0.0, 0.0});
    nodes[0].t = 0.6;  // children actually average with 0.5
    nodes[0].left = 1;
    nodes[0].right = 2;
    nodes[1].matrix = Mat::outer(Vec::basis(2, 0), Vec::basis(2, 0));
    nodes[2].matrix = Mat::outer(Vec::basis(2, 0), Vec::basis(2, 0)) * -1.0;
    Laminate lam = Laminate::from_nodes(2, nodes);
    auto v = validate_hm(lam);
    CHECK_FALSE(v.pass);
    REQUIRE_FALSE(v.issues.empty());
    CHECK(v.issues[0].barycenter_residual > 1e-3);
  }
}

TEST_CASE("barycenter of the standard builds") {
  Mat m = Mat::diagonal({-1.0, 1.0});
  auto zbuild = build_zero_det_laminate(m, 1);
  CHECK(oracles::mat_rel_err(barycenter(zbuild.laminate), m) < 1e-10);

  auto dbuild = build_delta_laminate(Mat::zero(2), 1.0);
  CHECK(frobenius_norm(barycenter(dbuild.laminate)) < 1e-12);
}

TEST_CASE("p_moment examples") {
  Mat m = Mat::diagonal({-1.0, 1.0});
  auto build = build_zero_det_laminate(m, 1);
  // all four atoms sit at distance sqrt(2) from M0
  CHECK(p_moment(build.laminate, 2.0, &m) == Catch::Approx(2.0).margin(1e-12));

  auto dbuild = build_delta_laminate(Mat::zero(2), 1.0);
  CHECK(p_moment(dbuild.laminate, 2.0) == Catch::Approx(8.0).margin(1e-12));
}

TEST_CASE("statistics") {
  SECTION("dirac identity") {
    auto s = statistics(Laminate::dirac(Mat::identity(2)), 2.0, 1.0);
    CHECK(s.mass_det_pos == 1.0);
    CHECK(s.mass_det_neg == 0.0);
    CHECK(s.det_integral == 1.0);
  }

  SECTION("cascade masses are dyadic") {
    Mat m = Mat::diagonal({-1.0, 1.0});
    for (int j : {1, 2, 3}) {
      auto build = build_zero_det_laminate(m, j);
      auto s = statistics(build.laminate, 2.0, 1.0);
      CHECK(s.mass_det_neg == std::ldexp(1.0, -j));
      CHECK(s.mass_det_zero + s.mass_det_neg + s.mass_det_pos ==
            Catch::Approx(1.0).margin(1e-12));
    }
  }

  SECTION("det integral equals det of the barycenter") {
    SplitMix64 rng(7);
    for (int d : {2, 3}) {
      for (int trial = 0; trial < 25; ++trial) {
        Laminate lam = random_laminate(rng, d, 10);
        auto s = statistics(lam, 2.0, 1.0);
        double ref = determinant(barycenter(lam));
        CHECK(std::abs(s.det_integral - ref) <= 1e-9 * (1.0 + std::abs(ref)));
      }
    }
  }
}

TEST_CASE("pushforward by rotations") {
  SECTION("identity rotations change nothing") {
    Mat m = Mat::diagonal({-1.0, 1.0});
    auto build = build_zero_det_laminate(m, 2);
    Laminate moved = pushforward_rotation(build.laminate, Mat::identity(2), Mat::identity(2));
    CHECK(moved.node_count() == build.laminate.node_count());
    CHECK(moved.root_matrix() == m);
  }

  SECTION("preserves structure, dets, norms, moments") {
    SplitMix64 rng(99);
    for (int d : {2, 3}) {
      for (int trial = 0; trial < 10; ++trial) {
        Laminate lam = random_laminate(rng, d, 8);
        Mat p = signed_svd(random_matrix(rng, d), SvdOrdering::AbsDescending).P;
        Mat q = signed_svd(random_matrix(rng, d), SvdOrdering::AbsDescending).Q;
        Laminate moved = pushforward_rotation(lam, p, q);
        CHECK(validate_hm(moved).pass);

        auto a0 = lam.atoms();
        auto a1 = moved.atoms();
        REQUIRE(a0.size() == a1.size());
        for (size_t k = 0; k < a0.size(); ++k) {
          REQUIRE(a0[k].weight == a1[k].weight);  // weights exactly preserved
          double det0 = determinant(a0[k].matrix);
          REQUIRE(std::abs(determinant(a1[k].matrix) - det0) <=
                  1e-9 * (1.0 + std::abs(det0)));
          double n0 = frobenius_norm(a0[k].matrix);
          REQUIRE(std::abs(frobenius_norm(a1[k].matrix) - n0) <= 1e-9 * (1.0 + n0));
        }
        double m0 = p_moment(lam, 2.5);
        double m1 = p_moment(moved, 2.5);
        CHECK(std::abs(m0 - m1) <= 1e-9 * (1.0 + m0));
      }
    }
  }

  SECTION("rejects non-rotations") {
    Laminate lam = Laminate::dirac(Mat::identity(2));
    Mat reflect = Mat::diagonal({-1.0, 1.0});
    CHECK_THROWS_AS(pushforward_rotation(lam, reflect, Mat::identity(2)), Error);
    CHECK_THROWS_AS(pushforward_rotation(lam, Mat::identity(2) * 2.0, Mat::identity(2)), Error);
  }
}

TEST_CASE("energy") {
  SECTION("det energy equals det of barycenter on laminates") {
    SplitMix64 rng(2024);
    Integrand det_f = Integrand::parse("det");
    for (int trial = 0; trial < 25; ++trial) {
      Laminate lam = random_laminate(rng, 2, 9);
      double ref = determinant(barycenter(lam));
      CHECK(std::abs(energy(lam, det_f) - ref) <= 1e-9 * (1.0 + std::abs(ref)));
    }
  }

  SECTION("pnorm examples") {
    Laminate lam = Laminate::dirac(Mat::zero(2));
    lam.split_leaf(0, 0.5, Vec::basis(2, 0), Vec::basis(2, 0), 1.0, -1.0);
    CHECK(energy(lam, "pnorm:2") == Catch::Approx(1.0));
    CHECK(energy(Laminate::dirac(Mat::identity(2)), "pnorm:2") == Catch::Approx(2.0));
  }

  SECTION("jensen inequality for convex integrands") {
    SplitMix64 rng(11);
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      Integrand f = Integrand::parse("pnorm:" + format_double(p));
      for (int trial = 0; trial < 15; ++trial) {
        Laminate lam = random_laminate(rng, 2, 10);
        double lhs = f(barycenter(lam));
        double rhs = energy(lam, f);
        CHECK(lhs <= rhs + 1e-9 * (1.0 + std::abs(rhs)));
      }
    }
  }

  SECTION("unknown integrands are rejected") {
    CHECK_THROWS_AS(Integrand::parse("pnorm"), Error);
    CHECK_THROWS_AS(Integrand::parse("pnorm:0.5"), Error);
    CHECK_THROWS_AS(Integrand::parse("wiggle:3"), Error);
    CHECK_THROWS_AS(Integrand::parse("det:extra"), Error);
    CHECK_NOTHROW(Integrand::parse("composite:1:2:0.5"));
    CHECK_NOTHROW(Integrand::parse("negdetq:0.75"));
  }
}

TEST_CASE("barycenter invariance under split chains") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Mat m0 = random_matrix(rng, 3, 3.0);
    Laminate lam = Laminate::dirac(m0);
    for (int s = 0; s < 30; ++s) {
      std::vector<int> leaves;
      for (int id = 0; id < lam.node_count(); ++id)
        if (lam.is_leaf(id)) leaves.push_back(id);
      int leaf = leaves[rng.next() % leaves.size()];
      double t = 0.05 + 0.9 * rng.uniform01();
      Vec a(3), b(3);
      for (int i = 0; i < 3; ++i) {
        a[i] = rng.symmetric();
        b[i] = rng.symmetric();
      }
      double al = rng.symmetric();
      lam.split_leaf(leaf, t, a, b, al, -t * al / (1.0 - t));
      REQUIRE(oracles::mat_rel_err(barycenter(lam), m0) < 1e-10);
    }
  }
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lamina/matrix.hpp"
#include "lamina/rng.hpp"
#include "lamina/svd.hpp"
#include "oracles.hpp"

using namespace lamina;

TEST_CASE("frobenius norm") {
  CHECK(frobenius_norm(Mat::identity(2)) == Catch::Approx(std::sqrt(2.0)));
  CHECK(frobenius_norm(Mat::diagonal({-1.0, 1.0})) == Catch::Approx(std::sqrt(2.0)));

  Mat m = Mat::from_rows(2, {3, 4, 0, 0});
  CHECK(frobenius_norm(m) == Catch::Approx(5.0));
  // cross-check against the singular values (5, 0)
  auto sv = oracles::singular_values_via_gram(m);
  CHECK(sv[0] == Catch::Approx(5.0).margin(1e-12));
  CHECK(sv[1] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("determinant closed forms") {
  CHECK(determinant(Mat::identity(3)) == 1.0);
  CHECK(determinant(Mat::diagonal({-1.0, 2.0, 3.0})) == -6.0);
  CHECK(determinant(Mat::from_rows(2, {-1, 1, 1, 1})) == -2.0);
  CHECK(determinant(Mat::diagonal({1.0, 2.0, 3.0, 4.0})) == 24.0);
  CHECK(determinant(Mat::identity(4)) == 1.0);
}

TEST_CASE("rank one defect") {
  Mat outer = Mat::outer(Vec::basis(2, 0), Vec::basis(2, 1));
  CHECK(rank_one_defect(outer) == Catch::Approx(0.0).margin(1e-14));
  CHECK(rank_one_defect(Mat::identity(2)) == Catch::Approx(1.0));
  CHECK(rank_one_defect(Mat::diagonal({2.0, 4.0, 0.0})) == Catch::Approx(2.0));
}

TEST_CASE("signed svd canonical examples") {
  SECTION("identity, abs-descending") {
    auto svd = signed_svd(Mat::identity(3), SvdOrdering::AbsDescending);
    CHECK(oracles::mat_rel_err(svd.P, Mat::identity(3)) < 1e-12);
    CHECK(oracles::mat_rel_err(svd.Q, Mat::identity(3)) < 1e-12);
    for (int k = 0; k < 3; ++k) CHECK(svd.theta[k] == Catch::Approx(1.0));
  }

  SECTION("diag(-1,2,3), neg-first-ascending is already canonical") {
    Mat m = Mat::diagonal({-1.0, 2.0, 3.0});
    auto svd = signed_svd(m, SvdOrdering::NegFirstAscending);
    CHECK(svd.theta[0] == Catch::Approx(-1.0));
    CHECK(svd.theta[1] == Catch::Approx(2.0));
    CHECK(svd.theta[2] == Catch::Approx(3.0));
    CHECK(oracles::mat_rel_err(svd.reconstruct(), m) < 1e-10);
    CHECK(std::abs(determinant(svd.P) - 1.0) < 1e-12);
    CHECK(std::abs(determinant(svd.Q) - 1.0) < 1e-12);
  }

  SECTION("[[0,2],[1,0]] has det -2 and signed values (-1,2)") {
    Mat m = Mat::from_rows(2, {0, 2, 1, 0});
    auto svd = signed_svd(m, SvdOrdering::NegFirstAscending);
    CHECK(svd.theta[0] == Catch::Approx(-1.0).margin(1e-10));
    CHECK(svd.theta[1] == Catch::Approx(2.0).margin(1e-10));
    CHECK(oracles::mat_rel_err(svd.reconstruct(), m) < 1e-10);
    auto sv = oracles::singular_values_via_gram(m);
    CHECK(std::abs(svd.theta[1]) == Catch::Approx(sv[0]).margin(1e-10));
    CHECK(std::abs(svd.theta[0]) == Catch::Approx(sv[1]).margin(1e-10));
  }

  SECTION("neg-first-ascending rejects nonnegative determinant") {
    // det [[0,-2],[1,0]] = +2
    Mat m = Mat::from_rows(2, {0, -2, 1, 0});
    CHECK_THROWS_AS(signed_svd(m, SvdOrdering::NegFirstAscending), Error);
    CHECK_THROWS_AS(signed_svd(Mat::identity(2), SvdOrdering::NegFirstAscending), Error);
  }
}

TEST_CASE("signed svd randomized properties") {
  for (int d = 2; d <= 4; ++d) {
    SplitMix64 rng(0xABCD0000 + d);
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      Mat m = random_matrix(rng, d, 1.0);
      double norm = frobenius_norm(m);
      if (norm < 1e-6) continue;

      auto svd = signed_svd(m, SvdOrdering::AbsDescending);
      REQUIRE(frobenius_norm(svd.reconstruct() - m) <= 1e-10 * norm);
      REQUIRE(orthogonality_defect(svd.P) <= 1e-12);
      REQUIRE(orthogonality_defect(svd.Q) <= 1e-12);
      REQUIRE(std::abs(determinant(svd.P) - 1.0) <= 1e-12);
      REQUIRE(std::abs(determinant(svd.Q) - 1.0) <= 1e-12);

      // |theta| multiset matches the singular values; ordering is descending
      auto sv = oracles::singular_values_via_gram(m);
      for (int k = 0; k < d; ++k) {
        REQUIRE(std::abs(std::abs(svd.theta[k]) - sv[k]) <= 1e-10 * (1.0 + norm));
        if (k > 0) REQUIRE(std::abs(svd.theta[k]) <= std::abs(svd.theta[k - 1]) * (1 + 1e-12));
      }

      // norm invariance under the produced rotations
      Mat rotated = svd.P * m * svd.Q.transpose();
      REQUIRE(std::abs(frobenius_norm(rotated) - norm) <= 1e-10 * norm);

      // determinant of the reconstruction equals the product of thetas
      double prod = 1.0;
      for (int k = 0; k < d; ++k) prod *= svd.theta[k];
      REQUIRE(std::abs(prod - determinant(m)) <=
              1e-9 * std::max(1e-12, std::abs(determinant(m))) + 1e-13 * std::pow(norm, d));
    }
  }
}

TEST_CASE("signed svd neg-first ordering on negative-determinant matrices") {
  for (int d = 2; d <= 4; ++d) {
    SplitMix64 rng(0x5EED0000 + d);
    for (int t = 0; t < 2000; ++t) {
      Mat m = random_negative_det_matrix(rng, d);
      auto svd = signed_svd(m, SvdOrdering::NegFirstAscending);
      REQUIRE(svd.theta[0] < 0.0);
      for (int k = 1; k < d; ++k) {
        REQUIRE(svd.theta[k] > 0.0);
        REQUIRE(std::abs(svd.theta[k - 1]) <= svd.theta[k] * (1 + 1e-12));
      }
      REQUIRE(frobenius_norm(svd.reconstruct() - m) <= 1e-10 * frobenius_norm(m));
      REQUIRE(std::abs(determinant(svd.P) - 1.0) <= 1e-12);
      REQUIRE(std::abs(determinant(svd.Q) - 1.0) <= 1e-12);
    }
  }
}

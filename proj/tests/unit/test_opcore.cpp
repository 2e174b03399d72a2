#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "relhartree/error.hpp"
#include "relhartree/opcore.hpp"

using namespace relhartree;
using namespace relhartree::opcore;

TEST_SUITE("opcore") {
  TEST_CASE("operator functions act on the spectrum") {
    RVec d(2);
    d << 2, 3;
    auto A = HermitianOperator::diagonal(d);
    CHECK((op_function([](double x) { return x; }, A).matrix() - A.matrix()).norm() <= 1e-14);
    Mat sq = op_function([](double x) { return x * x; }, A).matrix();
    CHECK(sq(0, 0).real() == doctest::Approx(4));
    CHECK(sq(1, 1).real() == doctest::Approx(9));
    auto I = HermitianOperator(Mat::Identity(3, 3));
    CHECK((op_function([](double x) { return std::sqrt(x); }, I).matrix() - Mat::Identity(3, 3)).norm() <= 1e-14);
  }

  TEST_CASE("hermiticity is validated") {
    Mat a = Mat::Zero(2, 2);
    a(0, 1) = 1.0;
    CHECK_THROWS_AS(HermitianOperator{a}, InvalidParameter);
  }

  TEST_CASE("norms") {
    Mat D = Mat::Zero(2, 2);
    D(0, 0) = 1;
    D(1, 1) = -2;
    CHECK(trace_norm(D) == doctest::Approx(3));
    CHECK(op_norm(D) == doctest::Approx(2));
    CHECK(trace_norm(Mat::Zero(3, 3)) == 0);
    CHECK(hs_norm(Mat::Identity(4, 4)) == doctest::Approx(2));
    Vec a = Vec::Zero(4), b = Vec::Zero(4);
    a[0] = 2;
    b[2] = cplx(0, 3);
    CHECK(trace_norm(a * b.adjoint()) == doctest::Approx(6));
  }

  TEST_CASE("norm ordering on random matrices") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
      Mat A = testutil::random_matrix(12, rng);
      CHECK(op_norm(A) <= hs_norm(A) * (1 + 1e-12));
      CHECK(hs_norm(A) <= trace_norm(A) * (1 + 1e-12));
    }
  }

  TEST_CASE("commutators") {
    std::mt19937_64 rng(8);
    Mat A = testutil::random_matrix(6, rng), B = testutil::random_matrix(6, rng);
    CHECK(commutator(A, A).norm() <= 1e-12);
    CHECK((commutator(A, B) - (A * B - B * A)).norm() <= 1e-12);
    Mat D1 = Mat(testutil::random_positive(6, rng).cast<cplx>().asDiagonal());
    Mat D2 = Mat(testutil::random_positive(6, rng).cast<cplx>().asDiagonal());
    CHECK(commutator(D1, D2).norm() == 0.0);
  }

  TEST_CASE("operator order") {
    auto Z = HermitianOperator(Mat::Zero(3, 3));
    auto I = HermitianOperator(Mat::Identity(3, 3));
    CHECK(operator_leq(Z, I, 1e-12));
    CHECK_FALSE(operator_leq(I, Z, 1e-12));
  }

  TEST_CASE("density matrix clamps and builds functions") {
    std::mt19937_64 rng(9);
    Mat U = Eigen::HouseholderQR<Mat>(testutil::random_matrix(5, rng)).householderQ();
    RVec occ(5);
    occ << -1e-12, 0.2, 0.5, 0.9, 1 + 1e-12;
    DensityMatrix om(HermitianOperator::from_spectrum(occ, U));
    CHECK(om.occupations().minCoeff() >= 0.0);
    CHECK(om.occupations().maxCoeff() <= 1.0);
    Mat v = om.v(), u = om.u();
    CHECK((v * v - om.matrix()).norm() <= 1e-12);
    CHECK((u * u + om.matrix() - Mat::Identity(5, 5)).norm() <= 1e-12);
    CHECK((om.overlap() - v * u).norm() <= 1e-12);
    CHECK((om.pi(PiKind::Omega) - om.matrix()).norm() <= 1e-14);
    CHECK(pi_kind_from_string(to_string(PiKind::OneMinusSqrtOneMinusOmega)) == PiKind::OneMinusSqrtOneMinusOmega);

    occ << -0.1, 0.2, 0.5, 0.9, 1;
    CHECK_THROWS(DensityMatrix(HermitianOperator::from_spectrum(occ, U)));
  }

  TEST_CASE("binary round trip") {
    std::mt19937_64 rng(10);
    HermitianOperator A(testutil::random_hermitian(7, rng));
    for (bool with_eig : {false, true}) {
      std::stringstream ss;
      write_operator(ss, A, with_eig);
      auto B = read_operator(ss);
      CHECK((B.matrix() - A.matrix()).norm() == 0.0);
      CHECK((B.eig().values - A.eig().values).norm() <= 1e-12);
    }
    std::stringstream bad("garbage");
    CHECK_THROWS(read_operator(bad));
  }
}

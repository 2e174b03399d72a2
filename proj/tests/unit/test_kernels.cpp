#include <doctest.h>

#include "helpers.hpp"
#include "relhartree/fock.hpp"
#include "relhartree/kernels.hpp"

using namespace relhartree;
namespace ser = relhartree::kernels::serial;
namespace par = relhartree::kernels::parallel;

TEST_SUITE("kernels") {
  TEST_CASE("parallel kernels match the serial reference") {
    std::mt19937_64 rng(11);
    const Index n = 96;
    Mat A = testutil::random_matrix(n, rng), U = testutil::random_matrix(n, rng);
    RVec wl = testutil::random_positive(n, rng), wr = testutil::random_positive(n, rng);
    CHECK((ser::weighted_sandwich(wl, A, wr) - par::weighted_sandwich(wl, A, wr)).norm() <= 1e-12 * A.norm());
    CHECK((ser::conjugated_diagonal(U, A) - par::conjugated_diagonal(U, A)).norm() <= 1e-9);

    std::vector<Mat> ops{A, U, A * U};
    auto a = ser::trace_norms(ops), b = par::trace_norms(ops);
    for (std::size_t k = 0; k < ops.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));

    space::SpaceSpec s(1, 12, 64);
    RVec prof = testutil::random_positive(64, rng), rho = testutil::random_positive(64, rng);
    CHECK((ser::periodic_convolution(s, prof, rho) - par::periodic_convolution(s, prof, rho)).norm() <= 1e-12);

    auto e = fock::FockEngine::doubled(3);
    auto L = fock::liouvillian(e, fock::random_hermitian(3, rng), RMat::Ones(3, 3) - RMat::Identity(3, 3), 0.4);
    Vec x = fock::random_vector(e.dim(), rng);
    CHECK((ser::spmv(L.mat, x) - par::spmv(L.mat, x)).norm() <= 1e-12);
  }

  TEST_CASE("conjugated diagonal definition") {
    std::mt19937_64 rng(12);
    Mat U = testutil::random_matrix(10, rng), A = testutil::random_hermitian(10, rng);
    RVec ref = (U * A * U.adjoint()).diagonal().real();
    CHECK((ser::conjugated_diagonal(U, A) - ref).norm() <= 1e-10);
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "relhartree/error.hpp"
#include "relhartree/fock.hpp"
#include "relhartree/fock_checks.hpp"

using namespace relhartree;
using namespace relhartree::fock;

namespace {

Vec unit(int M, int k) {
  Vec e = Vec::Zero(M);
  e[k] = 1.0;
  return e;
}

double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_SUITE("fock") {
  TEST_CASE("canonical anticommutation") {
    auto e = FockEngine::single(4);
    auto c1 = e.creation(unit(4, 1)), a1 = e.annihilation(unit(4, 1)), a2 = e.annihilation(unit(4, 2));
    CHECK(max_abs(anticommutator(c1, c1).dense()) == 0.0);
    CHECK(max_abs(anticommutator(c1, a2).dense()) == 0.0);
    CHECK(max_abs(anticommutator(c1, a1).dense() - Mat::Identity(e.dim(), e.dim())) <= 1e-15);
  }

  TEST_CASE("annihilation norm equals vector norm") {
    auto e = FockEngine::single(4);
    std::mt19937_64 rng(41);
    Vec f = random_vector(4, rng);
    Eigen::JacobiSVD<Mat> svd(e.annihilation(f).dense());
    CHECK(svd.singularValues()[0] == doctest::Approx(f.norm()).epsilon(1e-12));
  }

  TEST_CASE("engine caps") {
    CHECK_THROWS_AS(FockEngine::single(FockEngine::kMaxSingleModes + 1), InvalidParameter);
    CHECK_THROWS_AS(FockEngine::doubled(FockEngine::kMaxDoubledModes + 1), InvalidParameter);
    CHECK(FockEngine::doubled(3).dim() == 64);
  }

  TEST_CASE("second quantization") {
    auto e = FockEngine::single(4);
    Vec psi = e.basis_state(0b1011);
    CHECK((e.dGamma(Mat::Identity(4, 4)).apply(psi) - 3.0 * psi).norm() <= 1e-14);
    std::mt19937_64 rng(42);
    Mat A = random_matrix(4, 4, rng), B = random_matrix(4, 4, rng);
    CHECK(max_abs(commutator(e.dGamma(A), e.dGamma(B)).dense() - e.dGamma(A * B - B * A).dense()) <= 1e-12);
  }

  TEST_CASE("trace norm bound on random J") {
    std::mt19937_64 rng(43);
    auto c = check_dgamma_bound(4, 10, rng);
    CHECK(c.passed());
    CHECK(c.residual <= 1.0);
  }

  TEST_CASE("slater determinants") {
    auto e = FockEngine::single(2);
    auto s0 = slater_bogoliubov(e, Mat::Zero(2, 2));
    CHECK((s0.state - e.vacuum()).norm() <= 1e-14);
    Mat om = Mat::Zero(2, 2);
    om(0, 0) = 1;
    auto s1 = slater_bogoliubov(e, om);
    Vec expect = e.creation(unit(2, 0)).apply(e.vacuum());
    CHECK(std::abs(std::abs(expect.dot(s1.state)) - 1.0) <= 1e-12);
    CHECK(max_abs(reduced_density(e, s1.state) - om) <= 1e-12);
    CHECK_THROWS_AS(slater_bogoliubov(e, 0.5 * Mat::Identity(2, 2)), InvalidParameter);
  }

  TEST_CASE("araki-wyss states") {
    auto e1 = FockEngine::doubled(2);
    ArakiWyss zero(e1, Mat::Zero(2, 2));
    CHECK((zero.state() - e1.vacuum()).norm() <= 1e-14);

    auto e = FockEngine::doubled(1);
    ArakiWyss half(e, 0.5 * Mat::Identity(1, 1));
    Vec psi = half.state();
    CHECK(std::abs(psi[0]) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(std::abs(psi[3]) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(reduced_density(e, psi)(0, 0).real() == doctest::Approx(0.5));

    std::mt19937_64 rng(44);
    auto e3 = FockEngine::doubled(3);
    Mat om = random_density(3, rng);
    ArakiWyss aw(e3, om);
    CHECK(max_abs(reduced_density(e3, aw.state()) - om) <= 1e-12);
    CHECK(max_abs(pairing_density(e3, aw.state())) <= 1e-12);
    CHECK(max_abs(aw.dense() - aw.dense_exponential()) <= 1e-10);
    Vec x = random_vector(e3.dim(), rng);
    CHECK((aw.apply_adjoint(aw.apply(x)) - x).norm() <= 1e-12);
  }

  TEST_CASE("quadratic form examples") {
    std::mt19937_64 rng(45);
    auto e = FockEngine::doubled(3);
    CHECK(check_bogoliubov_dgamma(3, 2, rng).passed());
    CHECK(check_araki_wyss_rules(3, 2, rng).passed());
    CHECK(check_slater_rules(4, 2, rng).passed());
    CHECK(check_dgamma_commutators(3, 3, rng).passed());
    CHECK(check_convolution_commutators(3, 3, rng).passed());
    (void)e;
  }

  TEST_CASE("wick theorem") {
    std::mt19937_64 rng(46);
    auto e = FockEngine::doubled(4);
    Vec psi = ArakiWyss(e, random_density(4, rng)).state();
    OpString two{{0, Sector::Left, true}, {1, Sector::Left, false}};
    CHECK(std::abs(string_expectation(e, psi, two) - wick_pairing_sum(e, psi, two)) <= 1e-14);
    OpString odd{{0, Sector::Left, true}, {1, Sector::Left, false}, {2, Sector::Right, true}};
    CHECK(std::abs(string_expectation(e, psi, odd)) <= 1e-12);
    CHECK(check_wick(e, psi, "aw", rng, 10, 4).passed());
  }

  TEST_CASE("hamiltonian") {
    std::mt19937_64 rng(47);
    const int M = 4;
    auto e = FockEngine::single(M);
    Mat H0 = random_hermitian(M, rng);
    auto H = build_hamiltonian_fock(e, H0, RMat::Zero(M, M), 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(H.dense());
    Eigen::SelfAdjointEigenSolver<Mat> one(H0);
    std::vector<double> sums;
    for (int s = 0; s < (1 << M); ++s) {
      double acc = 0;
      for (int k = 0; k < M; ++k)
        if (s >> k & 1) acc += one.eigenvalues()[k];
      sums.push_back(acc);
    }
    std::sort(sums.begin(), sums.end());
    for (int i = 0; i < (1 << M); ++i) CHECK(es.eigenvalues()[i] == doctest::Approx(sums[i]).epsilon(1e-10));

    RMat diagV = RMat::Identity(M, M);
    CHECK(max_abs(e.density_quartic(diagV).dense()) == 0.0);
    auto Hint = build_hamiltonian_fock(e, H0, ring_interaction(M), 0.7);
    CHECK(max_abs(commutator(Hint, e.number()).dense()) <= 1e-12);
  }

  TEST_CASE("liouvillian") {
    std::mt19937_64 rng(48);
    const int M = 2;
    auto e = FockEngine::doubled(M);
    Mat H0 = ring_hopping(M);
    auto L0 = liouvillian(e, H0, RMat::Zero(M, M), 0.0);
    Mat ref = e.dGamma(H0, Sector::Left).dense() - e.dGamma(H0.conjugate(), Sector::Right).dense();
    CHECK(max_abs(L0.dense() - ref) <= 1e-14);

    auto L = liouvillian(e, random_hermitian(M, rng), ring_interaction(M), 0.6);
    CHECK(max_abs(commutator(L, e.number(Sector::Left)).dense()) <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(L.dense());
    RVec ev = es.eigenvalues();
    for (Index i = 0; i < ev.size(); ++i) CHECK(ev[i] == doctest::Approx(-ev[ev.size() - 1 - i]).epsilon(1e-9));

    // thermal state of a free Hamiltonian is stationary
    Mat om = Eigen::SelfAdjointEigenSolver<Mat>(H0).eigenvectors() *
             Vec::LinSpaced(M, 0.2, 0.7).asDiagonal() *
             Eigen::SelfAdjointEigenSolver<Mat>(H0).eigenvectors().adjoint();
    Vec psi = ArakiWyss(e, om).state();
    Vec out = evolve_exact(L0, psi, 1.3, 0.5);
    CHECK(std::abs(std::abs(psi.dot(out)) - 1.0) <= 1e-10);
  }

  TEST_CASE("krylov propagation") {
    std::mt19937_64 rng(49);
    auto e = FockEngine::doubled(4);
    auto L = liouvillian(e, random_hermitian(4, rng), ring_interaction(4), 0.5);
    Vec x = random_vector(e.dim(), rng);
    x.normalize();
    CHECK((evolve_exact(L, x, 0.0, 0.3) - x).norm() == 0.0);
    Vec a = evolve_exact(L, x, 0.8, 0.3), b = evolve_dense(L, x, 0.8, 0.3);
    CHECK((a - b).norm() <= 1e-9);
    CHECK(std::abs(a.norm() - 1.0) <= 1e-10);
  }

  TEST_CASE("reductions") {
    std::mt19937_64 rng(50);
    auto e = FockEngine::single(5);
    auto s = slater_bogoliubov(e, random_projection(5, 2, rng));
    Mat g = reduced_density(e, s.state);
    CHECK(std::abs(g.trace().real() - 2.0) <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    CHECK(es.eigenvalues().maxCoeff() <= 1 + 1e-12);
    CHECK(excitation_density(e, s.state, RVec::Ones(5)) == doctest::Approx(2.0));
  }

  TEST_CASE("many-body vs hartree at zero coupling") {
    std::mt19937_64 rng(51);
    const int M = 4;
    ManyBodySetup st;
    st.H0 = ring_hopping(M) + 0.2 * random_hermitian(M, rng);
    st.V = ring_interaction(M);
    st.omega0 = random_projection(M, 2, rng);
    st.observable = Mat::Identity(M, M) * 0.0;
    st.observable(0, 0) = 1.0;
    st.T = 0.3;
    auto r = manybody_vs_hartree(st, 0.0);
    CHECK(r.terminal() <= 1e-9);
  }
}

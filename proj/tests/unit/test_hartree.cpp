#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "relhartree/equilibrium.hpp"
#include "relhartree/error.hpp"
#include "relhartree/hartree.hpp"

using namespace relhartree;
using namespace relhartree::hartree;

namespace {

struct Fixture {
  space::SpaceSpec sp{1, 10.0, 32};
  double eps = 0.2;
  equilibrium::BuiltHamiltonian built =
      equilibrium::build_hamiltonian(sp, space::EpsilonScaling(eps, 1, 1), equilibrium::ExternalPotential::zero());
  std::shared_ptr<const Interaction> V =
      std::make_shared<GridInteraction>(GridInteraction::gaussian(sp, 1.0, 1.0));

  HartreeSystem system(double g) const { return HartreeSystem{built.op, V, eps, g}; }

  // Fermi-Dirac state of a perturbed Hamiltonian: not stationary for the free flow.
  Mat kicked_state() const {
    RVec pot(sp.size());
    for (Index i = 0; i < sp.size(); ++i) pot[i] = 0.3 * std::cos(2 * M_PI * sp.position(i)[0] / 10.0);
    Mat h = built.op.matrix();
    h.diagonal() += pot.cast<cplx>();
    return equilibrium::fermi_dirac(opcore::HermitianOperator(h), 1.3, 5.0).omega.matrix();
  }
};

}  // namespace

TEST_SUITE("hartree") {
  TEST_CASE("grid interaction: FFT agrees with direct summation") {
    Fixture f;
    std::mt19937_64 rng(31);
    RVec rho = testutil::random_positive(f.sp.size(), rng);
    auto& gi = static_cast<const GridInteraction&>(*f.V);
    CHECK((gi.convolve(rho) - gi.convolve_direct(rho)).norm() <= 1e-12 * rho.norm());
    CHECK((gi.kernel_matrix() * rho - gi.convolve(rho)).norm() <= 1e-11 * rho.norm());
  }

  TEST_CASE("mean field limits") {
    Fixture f;
    auto sys = f.system(0.2);
    CHECK(sys.mean_field(Mat::Zero(32, 32)).norm() == 0.0);
    // Uniform density: field = g * rho * sum_x V(x).
    Mat om = 0.25 * Mat::Identity(32, 32);
    auto& gi = static_cast<const GridInteraction&>(*f.V);
    RVec mf = sys.mean_field(om);
    CHECK((mf - RVec::Constant(32, 0.2 * 0.25 * gi.profile().sum())).norm() <= 1e-12);
    KernelInteraction flat(RMat::Constant(4, 4, 3.0));
    CHECK(flat.convolve(RVec::Ones(4))[2] == doctest::Approx(12.0));
    RMat skew = RMat::Zero(3, 3);
    skew(0, 1) = 1;
    CHECK_THROWS_AS(KernelInteraction{skew}, InvalidParameter);
  }

  TEST_CASE("free step equals the exact propagator") {
    Fixture f;
    Mat om = f.kicked_state();
    auto sys = f.system(0.0);
    auto r = step(sys, om, 0.01);
    Mat U = free_propagator(f.sp, f.built.kinetic_symbol, 0.01 / f.eps);
    CHECK((r.omega - U * om * U.adjoint()).norm() <= 1e-11);
  }

  TEST_CASE("stationary states stay fixed") {
    Fixture f;
    Mat om = equilibrium::fermi_dirac(f.built.op, 1.3, 5.0).omega.matrix();
    auto tr = evolve(f.system(0.0), om, 0.2, 0.01);
    CHECK((tr.states.back() - om).norm() <= 1e-11);
  }

  TEST_CASE("structure preservation and reversibility") {
    Fixture f;
    Mat om = f.kicked_state();
    auto sys = f.system(0.5);
    EvolveOptions eo;
    eo.snapshot_every = 10;
    auto fw = evolve(sys, om, 0.3, 0.01, eo);
    REQUIRE_FALSE(fw.aborted);
    CHECK(std::abs(fw.states.back().trace().real() - om.trace().real()) <= 1e-10);
    CHECK(sorted_spectrum_drift(om, fw.states.back()) <= 1e-9);
    auto bw = evolve(sys, fw.states.back(), -0.3, 0.01, eo);
    CHECK((bw.states.back() - om).norm() <= 1e-7);
    CHECK(fw.ledger.size() == fw.states.size());
  }

  TEST_CASE("second order in dt") {
    Fixture f;
    double r = richardson_ratio(f.system(0.5), f.kicked_state(), 0.1, 0.02);
    CHECK(r > 3.5);
    CHECK(r < 4.5);
  }

  TEST_CASE("step preconditions") {
    Fixture f;
    auto sys = f.system(0.1);
    Mat om = f.kicked_state();
    CHECK_THROWS_AS(step(sys, om, 0.0), InvalidParameter);
    CHECK_THROWS_AS(step(sys, om, 0.5), InvalidParameter);
    CHECK_THROWS_AS(step(sys, Mat::Zero(3, 3), 0.01), DimensionMismatch);
  }

  TEST_CASE("T = 0 gives a single snapshot") {
    Fixture f;
    Mat om = f.kicked_state();
    auto tr = evolve(f.system(0.5), om, 0.0, 0.01);
    REQUIRE(tr.states.size() == 1);
    CHECK((tr.states[0] - om).norm() == 0.0);
  }

  TEST_CASE("observables") {
    Mat om = Mat::Zero(4, 4);
    om(2, 2) = 1.0;
    RVec prof(4);
    prof << 0.1, 0.2, 0.3, 0.4;
    CHECK(observable_expectation(om, prof) == doctest::Approx(0.3));
    Mat mixed = 0.5 * Mat::Identity(4, 4);
    CHECK(observable_expectation(mixed, RVec::Ones(4)) == doctest::Approx(2.0));
  }

  TEST_CASE("locality growth") {
    Fixture f;
    Mat om = f.kicked_state();
    auto zero = locality_propagation_check(f.system(0.2), om, RVec::Ones(32), 0.1, 0.01);
    CHECK(std::abs(zero.c) <= 1e-8);
    auto t0 = locality_propagation_check(f.system(0.2), om, space::weight_profile(f.sp, {{5, 0, 0}, 2}), 0.0, 0.01);
    CHECK(t0.c == 0.0);
  }

  TEST_CASE("snapshot csv") {
    Fixture f;
    auto tr = evolve(f.system(0.0), f.kicked_state(), 0.02, 0.01);
    std::ostringstream os;
    write_snapshot_csv(os, tr, {}, "# snap");
    CHECK(os.str().rfind("# snap", 0) == 0);
  }
}

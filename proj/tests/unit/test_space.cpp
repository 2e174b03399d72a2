#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "relhartree/error.hpp"
#include "relhartree/space.hpp"

using namespace relhartree;
using namespace relhartree::space;

TEST_SUITE("space") {
  TEST_CASE("construction rejects bad grids") {
    CHECK_THROWS_AS(SpaceSpec(0, 10, 8), InvalidParameter);
    CHECK_THROWS_AS(SpaceSpec(1, -1, 8), InvalidParameter);
    CHECK_THROWS_AS(SpaceSpec(1, 10, 7), InvalidParameter);
    CHECK(SpaceSpec(2, 10, 8).size() == 64);
  }

  TEST_CASE("periodic distance") {
    SpaceSpec s1(1, 10, 16);
    CHECK(periodic_distance(s1, {9, 0, 0}, {1, 0, 0}) == doctest::Approx(2.0));
    CHECK(periodic_distance(s1, {3, 0, 0}, {3, 0, 0}) == 0.0);

    SpaceSpec s2(2, 10, 16);
    Point x{9, 0, 0}, z{1, 0, 0};
    double brute = 1e300;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        brute = std::min(brute, std::hypot(x[0] - z[0] + 10 * a, x[1] - z[1] + 10 * b));
    CHECK(periodic_distance(s2, x, z) == doctest::Approx(brute));
    CHECK(brute == doctest::Approx(2.0));
  }

  TEST_CASE("distance is symmetric and bounded by the half diagonal") {
    SpaceSpec s(3, 7, 8);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-20, 20);
    for (int k = 0; k < 200; ++k) {
      Point x{u(rng), u(rng), u(rng)}, z{u(rng), u(rng), u(rng)};
      double d = periodic_distance(s, x, z);
      CHECK(d == doctest::Approx(periodic_distance(s, z, x)));
      CHECK(d <= 0.5 * 7 * std::sqrt(3.0) + 1e-12);
    }
  }

  TEST_CASE("weights") {
    SpaceSpec s(1, 10, 16);
    CHECK(weight_value(s, Weight{{0, 0, 0}, 2}, {0, 0, 0}) == 1.0);
    CHECK(weight_value(s, Weight{{0, 0, 0}, 1}, {1, 0, 0}) == doctest::Approx(0.5));
    CHECK(weight_value(s, Weight{{0, 0, 0}, 4}, {2, 0, 0}) == doctest::Approx(1.0 / 257.0));
    RVec w = weight_profile(s, Weight{{5, 0, 0}, 4});
    CHECK(w.maxCoeff() <= 1.0);
    CHECK(w.minCoeff() > 0.0);
  }

  TEST_CASE("weight product constant is at least one") {
    SpaceSpec s(1, 20, 64);
    for (double z2 : {0.0, 1.0, 3.0, 7.5})
      CHECK(weight_product_constant(s, 4, {0, 0, 0}, {z2, 0, 0}) >= 1.0 - 1e-12);
  }

  TEST_CASE("kinetic multiplier") {
    CHECK(kinetic_multiplier(EpsilonScaling(0.3, 1, 1), {0, 0, 0}) == 1.0);
    CHECK(kinetic_multiplier(EpsilonScaling(0.1, 1, 1), {10, 0, 0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(kinetic_multiplier(EpsilonScaling(0.5, 1, 1), {2, 0, 0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(EpsilonScaling(0.0, 1, 1), InvalidParameter);
  }

  TEST_CASE("resolution flag") {
    SpaceSpec s(1, 40, 512);
    CHECK(EpsilonScaling(0.2, 1, 1).resolved(s));
    CHECK_FALSE(EpsilonScaling(0.05, 1, 1).resolved(s));
  }

  TEST_CASE("gaussian observable") {
    SpaceSpec s(1, 20, 128);
    auto o = gaussian_observable(s, 1.5, {10, 0, 0});
    CHECK(o.value(s, {10, 0, 0}) == doctest::Approx(1.0));
    CHECK(o.value(s, {11.5, 0, 0}) == doctest::Approx(std::exp(-0.5)));
    REQUIRE(o.certificate.size() == 5);
    for (double c : o.certificate) CHECK(std::isfinite(c));
    CHECK(o.bound_constant > 0);
  }

  TEST_CASE("fft round trip and circulant diagonalization") {
    SpaceSpec s(2, 6, 8);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Vec v(s.size());
    for (Index i = 0; i < v.size(); ++i) v[i] = cplx(g(rng), g(rng));
    Vec w = v;
    fft_forward(s, w);
    fft_inverse(s, w);
    CHECK((w - v).norm() <= 1e-12 * v.norm());

    Mat F = dft_matrix(s);
    CHECK((F * F.adjoint() - Mat::Identity(s.size(), s.size())).norm() <= 1e-10);
    Vec symbol(s.size());
    for (Index i = 0; i < symbol.size(); ++i) symbol[i] = cplx(g(rng), 0);
    Mat C = circulant_matrix(s, circulant_kernel(s, symbol));
    Mat D = F * C * F.adjoint();
    CHECK((D - Mat(symbol.asDiagonal())).norm() <= 1e-10 * symbol.norm());
  }
}

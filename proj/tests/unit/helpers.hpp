#pragma once

#include <random>

#include "relhartree/types.hpp"

namespace testutil {

using namespace relhartree;

inline Mat random_matrix(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat a(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) a(i, j) = cplx(g(rng), g(rng));
  return a;
}

inline Mat random_hermitian(Index n, std::mt19937_64& rng) {
  Mat a = random_matrix(n, rng);
  return 0.5 * (a + a.adjoint());
}

inline RVec random_positive(Index n, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RVec v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace testutil

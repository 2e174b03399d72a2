#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "relhartree/hartree.hpp"
#include "relhartree/kernels.hpp"
#include "relhartree/types.hpp"

namespace relhartree::fock {

using kernels::SpMat;

enum class Sector { Left = 0, Right = 1 };

enum class Tag { Creation, Annihilation, Quadratic, Quartic, Other };
std::string to_string(Tag t);

struct FockOperator {
  SpMat mat;
  Tag tag = Tag::Other;
  int particle_change = 0;  // popcount shift; meaningful unless tag == Other

  Index dim() const { return mat.rows(); }
  FockOperator adjoint() const;
  Vec apply(const Vec& x) const { return mat * x; }
  Mat dense() const { return Mat(mat); }
};

FockOperator operator+(const FockOperator& a, const FockOperator& b);
FockOperator operator-(const FockOperator& a, const FockOperator& b);
FockOperator operator*(const FockOperator& a, const FockOperator& b);
FockOperator operator*(cplx s, const FockOperator& a);
FockOperator commutator(const FockOperator& a, const FockOperator& b);
FockOperator anticommutator(const FockOperator& a, const FockOperator& b);

// Occupation-bitmask basis. Mode k of sector s sits at bit k + s*M; a_k carries the sign
// (-1)^{number of occupied bits below k}. Left modes come first, so a left-only operator
// on the doubled space is (identity on right) tensor (the same operator on the single space).
class FockEngine {
 public:
  static constexpr int kMaxSingleModes = 10;
  static constexpr int kMaxDoubledModes = 6;

  static FockEngine single(int M);
  static FockEngine doubled(int M);

  int modes() const { return M_; }
  int total_modes() const { return doubled_ ? 2 * M_ : M_; }
  bool is_doubled() const { return doubled_; }
  Index dim() const { return Index(1) << total_modes(); }

  Vec vacuum() const;
  Vec basis_state(std::uint64_t bits) const;
  static int popcount(std::uint64_t bits);

  // Elementary a_k as a sparse matrix (cached).
  const SpMat& mode_annihilation(int k, Sector s = Sector::Left) const;

  // a(f) = sum_k conj(f_k) a_k, a*(f) = a(f)^dagger.
  FockOperator annihilation(const Vec& f, Sector s = Sector::Left) const;
  FockOperator creation(const Vec& f, Sector s = Sector::Left) const;
  FockOperator number(std::optional<Sector> s = std::nullopt) const;  // nullopt: all modes
  FockOperator parity() const;
  FockOperator identity() const;

  // sum_ij A_ij a*_{s1,i} a_{s2,j}
  FockOperator dGamma(const Mat& A, Sector s1 = Sector::Left, std::optional<Sector> s2 = std::nullopt) const;
  // sum_ij A_ij a*_{s1,i} a*_{s2,j}
  FockOperator dGamma_plus(const Mat& A, Sector s1 = Sector::Left, std::optional<Sector> s2 = std::nullopt) const;
  // sum_ij A_ij a_{s1,i} a_{s2,j}
  FockOperator dGamma_minus(const Mat& A, Sector s1 = Sector::Left, std::optional<Sector> s2 = std::nullopt) const;

  // sum_{x,y} V(x,y) a*_x a*_y a_y a_x = sum_{x != y} V(x,y) n_x n_y (diagonal).
  FockOperator density_quartic(const RMat& V, Sector s = Sector::Left) const;

 private:
  FockEngine(int M, bool doubled);
  void check_sector(Sector s) const;
  void check_vector(const Vec& f) const;
  void check_matrix(const Mat& A) const;

  int M_ = 0;
  bool doubled_ = false;
  std::shared_ptr<std::vector<SpMat>> modes_;
};

// Slater determinant from a projection: R Omega = a*(f_1) ... a*(f_N) Omega and
// R* a(f) R = a(u f) + a*(conj(v) conj(f)) with u = 1 - omega, v = sum_i |conj f_i><f_i|.
struct SlaterTransform {
  Mat omega;
  Mat orbitals;  // columns f_1 .. f_N
  FockOperator R;
  Vec state;
  Mat u;
  Mat v;
};

SlaterTransform slater_bogoliubov(const FockEngine& engine, const Mat& omega, double tol = 1e-10);

// Araki-Wyss purification on the doubled space. Stored as a product of commuting
// single-orbital rotations exp(-theta_i G_i), G_i = b*_{l,i} b*_{r,i} - b_{r,i} b_{l,i},
// with b_{l,i} = a_l(f_i), b_{r,i} = a_r(conj f_i), sin theta_i = sqrt(lambda_i).
class ArakiWyss {
 public:
  ArakiWyss(const FockEngine& engine, const Mat& omega, double clamp_tol = 1e-10);

  const Mat& omega() const { return omega_; }
  const Mat& u() const { return u_; }  // sqrt(1 - omega)
  const Mat& v() const { return v_; }  // sqrt(omega)
  const RVec& thetas() const { return theta_; }
  const Mat& orbitals() const { return orbitals_; }

  Vec apply(const Vec& x) const;          // R x
  Vec apply_adjoint(const Vec& x) const;  // R* x
  Vec state() const { return apply(engine_.vacuum()); }
  // Dense matrix of R; only for dim <= 1024.
  Mat dense() const;
  // exp(-(dGamma^+_{lr}(Theta) - h.c.)), Theta = arcsin sqrt(omega), by dense exponentiation.
  Mat dense_exponential() const;

 private:
  Vec apply_factors(const Vec& x, double sign) const;

  FockEngine engine_;
  Mat omega_, u_, v_, orbitals_;
  RVec theta_;
  std::vector<SpMat> G_;  // per orbital generator
  std::vector<SpMat> P_;  // per orbital n_l n_r + (1 - n_l)(1 - n_r)
};

// dGamma(H0) + (g/2) sum_{xy} V(x,y) a*_x a*_y a_y a_x.
FockOperator build_hamiltonian_fock(const FockEngine& engine, const Mat& H0, const RMat& V, double g,
                                    Sector s = Sector::Left);

// Left Hamiltonian minus the right one, the latter with conj(H0).
FockOperator liouvillian(const FockEngine& engine, const Mat& H0, const RMat& V, double g);

struct KrylovOptions {
  double tolerance = 1e-10;  // per-substep error estimate
  int max_basis = 30;
  Index dense_limit = 4096;
};

struct EvolveStats {
  int substeps = 0;
  int basis_total = 0;
  bool dense_fallback = false;
};

// exp(-i G t / eps) x with Lanczos; G must be Hermitian.
Vec evolve_exact(const FockOperator& G, const Vec& x, double t, double eps, const KrylovOptions& opt = {},
                 EvolveStats* stats = nullptr);
// Dense eigendecomposition oracle.
Vec evolve_dense(const FockOperator& G, const Vec& x, double t, double eps);

// gamma(x, y) = <psi, a*_y a_x psi> on the given sector.
Mat reduced_density(const FockEngine& engine, const Vec& psi, Sector s = Sector::Left);
// pi(x, y) = <psi, a_y a_x psi>
Mat pairing_density(const FockEngine& engine, const Vec& psi, Sector s = Sector::Left);
// <psi, (dGamma_l(w) + dGamma_r(w)) psi>; single engines use the one sector.
double excitation_density(const FockEngine& engine, const Vec& psi, const RVec& w);

Mat random_unitary(int M, std::mt19937_64& rng);
Mat random_matrix(int rows, int cols, std::mt19937_64& rng);
Vec random_vector(Index n, std::mt19937_64& rng);
Mat random_hermitian(int M, std::mt19937_64& rng);
// Hermitian with spectrum in (lo, hi).
Mat random_density(int M, std::mt19937_64& rng, double lo = 0.05, double hi = 0.95);
Mat random_projection(int M, int N, std::mt19937_64& rng, bool real = false);

}  // namespace relhartree::fock

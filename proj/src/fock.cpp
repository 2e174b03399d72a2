#include "relhartree/fock.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <bit>
#include <cmath>

#include "relhartree/error.hpp"

namespace relhartree::fock {

namespace {

using Triplet = Eigen::Triplet<cplx>;

FockOperator make(SpMat m, Tag tag, int change) {
  m.prune(cplx(0.0));
  return FockOperator{std::move(m), tag, change};
}

Tag combine(Tag a, Tag b) { return a == b ? a : Tag::Other; }

SpMat identity_sparse(Index dim) {
  SpMat I(dim, dim);
  I.setIdentity();
  return I;
}

}  // namespace

std::string to_string(Tag t) {
  switch (t) {
    case Tag::Creation: return "creation";
    case Tag::Annihilation: return "annihilation";
    case Tag::Quadratic: return "quadratic";
    case Tag::Quartic: return "quartic";
    case Tag::Other: return "other";
  }
  return "?";
}

FockOperator FockOperator::adjoint() const {
  Tag t = tag == Tag::Creation ? Tag::Annihilation : tag == Tag::Annihilation ? Tag::Creation : tag;
  return FockOperator{SpMat(mat.adjoint()), t, -particle_change};
}

FockOperator operator+(const FockOperator& a, const FockOperator& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("FockOperator: dimension mismatch");
  bool same = a.particle_change == b.particle_change && a.tag == b.tag;
  return make(a.mat + b.mat, combine(a.tag, b.tag), same ? a.particle_change : 0);
}

FockOperator operator-(const FockOperator& a, const FockOperator& b) { return a + cplx(-1.0) * b; }

FockOperator operator*(const FockOperator& a, const FockOperator& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("FockOperator: dimension mismatch");
  return make(SpMat(a.mat * b.mat), Tag::Other, a.particle_change + b.particle_change);
}

FockOperator operator*(cplx s, const FockOperator& a) { return FockOperator{s * a.mat, a.tag, a.particle_change}; }

FockOperator commutator(const FockOperator& a, const FockOperator& b) {
  FockOperator c = make(SpMat(a.mat * b.mat - b.mat * a.mat), Tag::Other, a.particle_change + b.particle_change);
  return c;
}

FockOperator anticommutator(const FockOperator& a, const FockOperator& b) {
  return make(SpMat(a.mat * b.mat + b.mat * a.mat), Tag::Other, a.particle_change + b.particle_change);
}

FockEngine::FockEngine(int M, bool doubled) : M_(M), doubled_(doubled) {
  const int cap = doubled ? kMaxDoubledModes : kMaxSingleModes;
  if (M < 1 || M > cap)
    throw InvalidParameter("FockEngine: mode count " + std::to_string(M) + " outside [1, " + std::to_string(cap) +
                           "]");
  const int K = total_modes();
  const Index D = dim();
  modes_ = std::make_shared<std::vector<SpMat>>();
  modes_->reserve(K);
  for (int b = 0; b < K; ++b) {
    std::vector<Triplet> t;
    t.reserve(D / 2);
    const std::uint64_t bit = std::uint64_t(1) << b;
    for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(D); ++s) {
      if (!(s & bit)) continue;
      double sign = (popcount(s & (bit - 1)) % 2) ? -1.0 : 1.0;
      t.emplace_back(static_cast<Index>(s ^ bit), static_cast<Index>(s), sign);
    }
    SpMat a(D, D);
    a.setFromTriplets(t.begin(), t.end());
    modes_->push_back(std::move(a));
  }
}

FockEngine FockEngine::single(int M) { return FockEngine(M, false); }
FockEngine FockEngine::doubled(int M) { return FockEngine(M, true); }

int FockEngine::popcount(std::uint64_t bits) { return std::popcount(bits); }

Vec FockEngine::vacuum() const { return basis_state(0); }

Vec FockEngine::basis_state(std::uint64_t bits) const {
  if (bits >= static_cast<std::uint64_t>(dim())) throw InvalidParameter("basis_state: bitmask out of range");
  Vec v = Vec::Zero(dim());
  v[static_cast<Index>(bits)] = 1.0;
  return v;
}

void FockEngine::check_sector(Sector s) const {
  if (s == Sector::Right && !doubled_) throw InvalidParameter("FockEngine: right sector needs a doubled engine");
}

void FockEngine::check_vector(const Vec& f) const {
  if (f.size() != M_) throw DimensionMismatch("FockEngine: mode vector has wrong length");
}

void FockEngine::check_matrix(const Mat& A) const {
  if (A.rows() != M_ || A.cols() != M_) throw DimensionMismatch("FockEngine: one-body matrix has wrong size");
}

const SpMat& FockEngine::mode_annihilation(int k, Sector s) const {
  check_sector(s);
  if (k < 0 || k >= M_) throw InvalidParameter("mode_annihilation: mode index out of range");
  return (*modes_)[k + static_cast<int>(s) * M_];
}

FockOperator FockEngine::annihilation(const Vec& f, Sector s) const {
  check_sector(s);
  check_vector(f);
  SpMat out(dim(), dim());
  for (int k = 0; k < M_; ++k)
    if (f[k] != cplx(0.0)) out += std::conj(f[k]) * mode_annihilation(k, s);
  return make(std::move(out), Tag::Annihilation, -1);
}

FockOperator FockEngine::creation(const Vec& f, Sector s) const { return annihilation(f, s).adjoint(); }

FockOperator FockEngine::number(std::optional<Sector> s) const {
  std::vector<Triplet> t;
  for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(dim()); ++b) {
    std::uint64_t mask = b;
    if (s) {
      check_sector(*s);
      mask = (b >> (static_cast<int>(*s) * M_)) & ((std::uint64_t(1) << M_) - 1);
    }
    t.emplace_back(static_cast<Index>(b), static_cast<Index>(b), double(popcount(mask)));
  }
  SpMat n(dim(), dim());
  n.setFromTriplets(t.begin(), t.end());
  return make(std::move(n), Tag::Quadratic, 0);
}

FockOperator FockEngine::parity() const {
  std::vector<Triplet> t;
  for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(dim()); ++b)
    t.emplace_back(static_cast<Index>(b), static_cast<Index>(b), popcount(b) % 2 ? -1.0 : 1.0);
  SpMat p(dim(), dim());
  p.setFromTriplets(t.begin(), t.end());
  return FockOperator{std::move(p), Tag::Other, 0};
}

FockOperator FockEngine::identity() const { return FockOperator{identity_sparse(dim()), Tag::Other, 0}; }

FockOperator FockEngine::dGamma(const Mat& A, Sector s1, std::optional<Sector> s2) const {
  check_matrix(A);
  const Sector t = s2.value_or(s1);
  check_sector(s1);
  check_sector(t);
  SpMat out(dim(), dim());
  for (int i = 0; i < M_; ++i) {
    SpMat ci = mode_annihilation(i, s1).adjoint();
    for (int j = 0; j < M_; ++j)
      if (A(i, j) != cplx(0.0)) out += A(i, j) * SpMat(ci * mode_annihilation(j, t));
  }
  return make(std::move(out), Tag::Quadratic, 0);
}

FockOperator FockEngine::dGamma_plus(const Mat& A, Sector s1, std::optional<Sector> s2) const {
  check_matrix(A);
  const Sector t = s2.value_or(s1);
  check_sector(s1);
  check_sector(t);
  SpMat out(dim(), dim());
  for (int i = 0; i < M_; ++i) {
    SpMat ci = mode_annihilation(i, s1).adjoint();
    for (int j = 0; j < M_; ++j)
      if (A(i, j) != cplx(0.0)) out += A(i, j) * SpMat(ci * SpMat(mode_annihilation(j, t).adjoint()));
  }
  return make(std::move(out), Tag::Quadratic, 2);
}

FockOperator FockEngine::dGamma_minus(const Mat& A, Sector s1, std::optional<Sector> s2) const {
  check_matrix(A);
  const Sector t = s2.value_or(s1);
  check_sector(s1);
  check_sector(t);
  SpMat out(dim(), dim());
  for (int i = 0; i < M_; ++i)
    for (int j = 0; j < M_; ++j)
      if (A(i, j) != cplx(0.0)) out += A(i, j) * SpMat(mode_annihilation(i, s1) * mode_annihilation(j, t));
  return make(std::move(out), Tag::Quadratic, -2);
}

FockOperator FockEngine::density_quartic(const RMat& V, Sector s) const {
  check_sector(s);
  if (V.rows() != M_ || V.cols() != M_) throw DimensionMismatch("density_quartic: kernel size");
  const int off = static_cast<int>(s) * M_;
  std::vector<Triplet> t;
  for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(dim()); ++b) {
    double e = 0.0;
    for (int x = 0; x < M_; ++x) {
      if (!((b >> (x + off)) & 1)) continue;
      for (int y = 0; y < M_; ++y)
        if (y != x && ((b >> (y + off)) & 1)) e += V(x, y);
    }
    if (e != 0.0) t.emplace_back(static_cast<Index>(b), static_cast<Index>(b), e);
  }
  SpMat q(dim(), dim());
  q.setFromTriplets(t.begin(), t.end());
  return make(std::move(q), Tag::Quartic, 0);
}

SlaterTransform slater_bogoliubov(const FockEngine& engine, const Mat& omega, double tol) {
  const int M = engine.modes();
  if (omega.rows() != M || omega.cols() != M) throw DimensionMismatch("slater_bogoliubov: omega size");
  if ((omega - omega.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw InvalidParameter("slater_bogoliubov: omega is not Hermitian");
  if ((omega * omega - omega).cwiseAbs().maxCoeff() > tol)
    throw InvalidParameter("slater_bogoliubov: omega is not a projection");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (omega + omega.adjoint()));
  std::vector<Index> occ;
  for (Index j = 0; j < M; ++j)
    if (es.eigenvalues()[j] > 0.5) occ.push_back(j);
  SlaterTransform out;
  out.omega = omega;
  out.orbitals = Mat(M, static_cast<Index>(occ.size()));
  for (std::size_t k = 0; k < occ.size(); ++k) out.orbitals.col(k) = es.eigenvectors().col(occ[k]);

  const Index N = out.orbitals.cols();
  FockOperator R = engine.identity();
  for (Index j = 0; j < N; ++j) {
    Vec f = out.orbitals.col(j);
    R = R * (engine.creation(f) - engine.annihilation(f));
  }
  if (N % 2) R = R * engine.parity();
  R.tag = Tag::Other;
  out.R = std::move(R);
  out.state = out.R.apply(engine.vacuum());
  out.u = Mat::Identity(M, M) - out.orbitals * out.orbitals.adjoint();
  out.v = out.orbitals.conjugate() * out.orbitals.adjoint();
  return out;
}

ArakiWyss::ArakiWyss(const FockEngine& engine, const Mat& omega, double clamp_tol) : engine_(engine) {
  if (!engine.is_doubled()) throw InvalidParameter("ArakiWyss: needs a doubled engine");
  const int M = engine.modes();
  if (omega.rows() != M || omega.cols() != M) throw DimensionMismatch("ArakiWyss: omega size");
  if ((omega - omega.adjoint()).cwiseAbs().maxCoeff() > clamp_tol)
    throw InvalidParameter("ArakiWyss: omega is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (omega + omega.adjoint()));
  RVec lam = es.eigenvalues();
  if (lam.minCoeff() < -clamp_tol || lam.maxCoeff() > 1.0 + clamp_tol)
    throw InvalidParameter("ArakiWyss: spectrum outside [0, 1]");
  lam = lam.cwiseMax(0.0).cwiseMin(1.0);
  orbitals_ = es.eigenvectors();
  omega_ = orbitals_ * lam.cast<cplx>().asDiagonal() * orbitals_.adjoint();
  u_ = orbitals_ * (1.0 - lam.array()).sqrt().matrix().cast<cplx>().asDiagonal() * orbitals_.adjoint();
  v_ = orbitals_ * lam.cwiseSqrt().cast<cplx>().asDiagonal() * orbitals_.adjoint();
  theta_.resize(M);
  const SpMat I = identity_sparse(engine.dim());
  for (int i = 0; i < M; ++i) {
    theta_[i] = std::asin(std::sqrt(lam[i]));
    Vec f = orbitals_.col(i);
    SpMat bl = engine.annihilation(f, Sector::Left).mat;
    SpMat br = engine.annihilation(f.conjugate(), Sector::Right).mat;
    SpMat blc = bl.adjoint(), brc = br.adjoint();
    SpMat G = SpMat(blc * brc) - SpMat(br * bl);
    SpMat nl = blc * bl, nr = brc * br;
    SpMat P = SpMat(nl * nr) + SpMat(SpMat(I - nl) * SpMat(I - nr));
    G.prune(cplx(0.0));
    P.prune(cplx(0.0));
    G_.push_back(std::move(G));
    P_.push_back(std::move(P));
  }
}

Vec ArakiWyss::apply_factors(const Vec& x, double sign) const {
  if (x.size() != engine_.dim()) throw DimensionMismatch("ArakiWyss: state dimension");
  Vec y = x;
  for (std::size_t i = 0; i < G_.size(); ++i) {
    const double th = theta_[static_cast<Index>(i)];
    if (th == 0.0) continue;
    Vec Py = P_[i] * y;
    Vec Gy = G_[i] * y;
    y += (std::cos(th) - 1.0) * Py - sign * std::sin(th) * Gy;
  }
  return y;
}

Vec ArakiWyss::apply(const Vec& x) const { return apply_factors(x, 1.0); }
Vec ArakiWyss::apply_adjoint(const Vec& x) const { return apply_factors(x, -1.0); }

Mat ArakiWyss::dense() const {
  if (engine_.dim() > 1024) throw InvalidParameter("ArakiWyss::dense: dimension too large");
  const Index D = engine_.dim();
  Mat R(D, D);
  for (Index k = 0; k < D; ++k) R.col(k) = apply(engine_.basis_state(static_cast<std::uint64_t>(k)));
  return R;
}

Mat ArakiWyss::dense_exponential() const {
  if (engine_.dim() > 1024) throw InvalidParameter("ArakiWyss::dense_exponential: dimension too large");
  Mat Theta = orbitals_ * theta_.cast<cplx>().asDiagonal() * orbitals_.adjoint();
  Mat X = engine_.dGamma_plus(Theta, Sector::Left, Sector::Right).dense();
  Mat K = X - X.adjoint();
  Mat H = cplx(0.0, 1.0) * K;  // Hermitian, exp(-K) = exp(iH)
  H = 0.5 * (H + H.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  Vec ph(es.eigenvalues().size());
  for (Index j = 0; j < ph.size(); ++j) ph[j] = std::polar(1.0, es.eigenvalues()[j]);
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

FockOperator build_hamiltonian_fock(const FockEngine& engine, const Mat& H0, const RMat& V, double g, Sector s) {
  if ((H0 - H0.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidParameter("build_hamiltonian_fock: H0 not Hermitian");
  if (V.rows() != engine.modes() || V.cols() != engine.modes())
    throw DimensionMismatch("build_hamiltonian_fock: kernel size");
  if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidParameter("build_hamiltonian_fock: asymmetric kernel");
  FockOperator H = engine.dGamma(H0, s);
  if (g != 0.0) H = H + cplx(0.5 * g) * engine.density_quartic(V, s);
  H.tag = Tag::Other;
  H.particle_change = 0;
  return H;
}

FockOperator liouvillian(const FockEngine& engine, const Mat& H0, const RMat& V, double g) {
  if (!engine.is_doubled()) throw InvalidParameter("liouvillian: needs a doubled engine");
  FockOperator L = build_hamiltonian_fock(engine, H0, V, g, Sector::Left) -
                   build_hamiltonian_fock(engine, H0.conjugate(), V, g, Sector::Right);
  L.tag = Tag::Other;
  L.particle_change = 0;
  return L;
}

Vec evolve_dense(const FockOperator& G, const Vec& x, double t, double eps) {
  Mat H = G.dense();
  H = 0.5 * (H + H.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  Vec ph(es.eigenvalues().size());
  for (Index j = 0; j < ph.size(); ++j) ph[j] = std::polar(1.0, -es.eigenvalues()[j] * t / eps);
  return es.eigenvectors() * (ph.asDiagonal() * (es.eigenvectors().adjoint() * x));
}

Vec evolve_exact(const FockOperator& G, const Vec& x, double t, double eps, const KrylovOptions& opt,
                 EvolveStats* stats) {
  if (G.dim() != x.size()) throw DimensionMismatch("evolve_exact: state dimension");
  if (!(eps > 0)) throw InvalidParameter("evolve_exact: eps must be positive");
  EvolveStats local;
  EvolveStats& st = stats ? *stats : local;
  if (t == 0.0 || x.norm() == 0.0) return x;

  double gnorm = 0.0;  // max absolute row sum bounds the spectral radius
  for (Index r = 0; r < G.mat.outerSize(); ++r) {
    double s = 0;
    for (SpMat::InnerIterator it(G.mat, r); it; ++it) s += std::abs(it.value());
    gnorm = std::max(gnorm, s);
  }
  if (gnorm == 0.0) return x;

  const Index D = x.size();
  const int mmax = static_cast<int>(std::min<Index>(opt.max_basis, D));
  const double sign = t > 0 ? 1.0 : -1.0;
  double remaining = std::abs(t);
  double tau = std::min(remaining, 10.0 * eps / gnorm);
  const double tau_floor = 1e-10 * std::abs(t);
  Vec y = x;

  Mat Vb(D, mmax + 1);
  while (remaining > 0) {
    tau = std::min(tau, remaining);
    const double beta0 = y.norm();
    Vb.col(0) = y / beta0;
    RVec alpha(mmax), beta(mmax);
    int m = 0;
    bool breakdown = false;
    for (; m < mmax;) {
      Vec w = G.mat * Vb.col(m);
      alpha[m] = Vb.col(m).dot(w).real();
      for (int k = 0; k <= m; ++k) w -= Vb.col(k).dot(w) * Vb.col(k);  // full reorthogonalization
      for (int k = 0; k <= m; ++k) w -= Vb.col(k).dot(w) * Vb.col(k);
      beta[m] = w.norm();
      ++m;
      if (beta[m - 1] < 1e-12 * gnorm) {
        breakdown = true;
        break;
      }
      if (m < mmax + 1) Vb.col(m) = w / beta[m - 1];
    }
    RMat T = RMat::Zero(m, m);
    for (int k = 0; k < m; ++k) {
      T(k, k) = alpha[k];
      if (k + 1 < m) T(k, k + 1) = T(k + 1, k) = beta[k];
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(T);
    auto small_exp = [&](double h) {
      Vec c(m);
      Vec e1 = es.eigenvectors().row(0).transpose().cast<cplx>();
      for (int k = 0; k < m; ++k) e1[k] *= std::polar(1.0, -sign * es.eigenvalues()[k] * h / eps);
      c = es.eigenvectors().cast<cplx>() * e1;
      return c;
    };
    for (;;) {
      Vec c = small_exp(tau);
      double err = breakdown ? 0.0 : beta0 * beta[m - 1] * std::abs(c[m - 1]);
      if (err <= opt.tolerance) {
        y = beta0 * (Vb.leftCols(m) * c);
        remaining -= tau;
        ++st.substeps;
        st.basis_total += m;
        if (err < 0.1 * opt.tolerance) tau *= 1.5;
        break;
      }
      tau *= 0.5;
      if (tau < tau_floor) {
        if (D > opt.dense_limit) throw NumericalError("evolve_exact: Krylov step size collapsed");
        st.dense_fallback = true;
        return evolve_dense(G, y, sign * remaining, eps);
      }
    }
  }
  return y;
}

Mat reduced_density(const FockEngine& engine, const Vec& psi, Sector s) {
  const int M = engine.modes();
  if (psi.size() != engine.dim()) throw DimensionMismatch("reduced_density: state dimension");
  std::vector<Vec> phi;
  for (int k = 0; k < M; ++k) phi.push_back(engine.mode_annihilation(k, s) * psi);
  Mat g(M, M);
  for (int x = 0; x < M; ++x)
    for (int y = 0; y < M; ++y) g(x, y) = phi[y].dot(phi[x]);
  return g;
}

Mat pairing_density(const FockEngine& engine, const Vec& psi, Sector s) {
  const int M = engine.modes();
  if (psi.size() != engine.dim()) throw DimensionMismatch("pairing_density: state dimension");
  Mat p(M, M);
  for (int x = 0; x < M; ++x) {
    Vec ax = engine.mode_annihilation(x, s) * psi;
    for (int y = 0; y < M; ++y) {
      Vec cy = engine.mode_annihilation(y, s).adjoint() * psi;
      p(x, y) = cy.dot(ax);
    }
  }
  return p;
}

double excitation_density(const FockEngine& engine, const Vec& psi, const RVec& w) {
  if (w.size() != engine.modes()) throw DimensionMismatch("excitation_density: weight size");
  double out = 0.0;
  for (int k = 0; k < engine.modes(); ++k) {
    out += w[k] * (engine.mode_annihilation(k, Sector::Left) * psi).squaredNorm();
    if (engine.is_doubled()) out += w[k] * (engine.mode_annihilation(k, Sector::Right) * psi).squaredNorm();
  }
  return out;
}

Mat random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat A(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      double re = n(rng);
      double im = n(rng);
      A(i, j) = cplx(re, im);
    }
  return A;
}

Vec random_vector(Index n, std::mt19937_64& rng) { return random_matrix(static_cast<int>(n), 1, rng).col(0); }

Mat random_hermitian(int M, std::mt19937_64& rng) {
  Mat A = random_matrix(M, M, rng);
  return 0.5 * (A + A.adjoint());
}

Mat random_unitary(int M, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Mat> qr(random_matrix(M, M, rng));
  Mat Q = qr.householderQ();
  Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < M; ++j) {
    cplx d = R(j, j);
    if (std::abs(d) > 0) Q.col(j) *= d / std::abs(d);
  }
  return Q;
}

Mat random_density(int M, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat U = random_unitary(M, rng);
  RVec lam(M);
  for (int j = 0; j < M; ++j) lam[j] = u(rng);
  Mat w = U * lam.cast<cplx>().asDiagonal() * U.adjoint();
  return 0.5 * (w + w.adjoint());
}

Mat random_projection(int M, int N, std::mt19937_64& rng, bool real) {
  if (N < 0 || N > M) throw InvalidParameter("random_projection: rank out of range");
  Mat U;
  if (real) {
    std::normal_distribution<double> n(0.0, 1.0);
    RMat A(M, M);
    for (Index j = 0; j < M; ++j)
      for (Index i = 0; i < M; ++i) A(i, j) = n(rng);
    Eigen::HouseholderQR<RMat> qr(A);
    RMat Q = qr.householderQ();
    U = Q.cast<cplx>();
  } else {
    U = random_unitary(M, rng);
  }
  Mat F = U.leftCols(N);
  return F * F.adjoint();
}

}  // namespace relhartree::fock

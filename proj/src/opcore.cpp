#include "relhartree/opcore.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "relhartree/error.hpp"
#include "relhartree/kernels.hpp"

namespace relhartree::opcore {

namespace {

constexpr char kMagic[4] = {'R', 'H', 'O', 'P'};

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw Error("read_operator: truncated stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

double scale_of(const Mat& a) { return std::max(1.0, a.cwiseAbs().maxCoeff()); }

}  // namespace

double hermiticity_defect(const Mat& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("hermiticity: matrix not square");
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

HermitianOperator::HermitianOperator(const Mat& a, double tol) {
  if (a.rows() != a.cols()) throw DimensionMismatch("HermitianOperator: matrix not square");
  if (a.size() > 0 && hermiticity_defect(a) > tol * scale_of(a))
    throw InvalidParameter("HermitianOperator: matrix is not Hermitian within tolerance");
  a_ = 0.5 * (a + a.adjoint());
}

HermitianOperator HermitianOperator::from_real(const RMat& a, double tol) {
  return HermitianOperator(a.cast<cplx>(), tol);
}

HermitianOperator HermitianOperator::from_spectrum(const RVec& values, const Mat& vectors) {
  if (vectors.rows() != vectors.cols() || vectors.cols() != values.size())
    throw DimensionMismatch("from_spectrum: shapes disagree");
  std::vector<Index> order(values.size());
  for (Index i = 0; i < values.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values[a] < values[b]; });
  RVec vals(values.size());
  Mat vecs(vectors.rows(), vectors.cols());
  for (Index i = 0; i < values.size(); ++i) {
    vals[i] = values[order[i]];
    vecs.col(i) = vectors.col(order[i]);
  }
  HermitianOperator h;
  Mat a = vecs * vals.cast<cplx>().asDiagonal() * vecs.adjoint();
  h.a_ = 0.5 * (a + a.adjoint());
  std::call_once(h.cache_->once, [&] {
    h.cache_->eig.values = vals;
    h.cache_->eig.vectors = vecs;
    h.cache_->ready = true;
  });
  return h;
}

HermitianOperator HermitianOperator::with_eig(const Mat& a, Eigendecomposition eig) {
  if (a.rows() != a.cols() || eig.values.size() != a.rows()) throw DimensionMismatch("with_eig: shapes");
  HermitianOperator h;
  h.a_ = a;
  std::call_once(h.cache_->once, [&] {
    h.cache_->eig = std::move(eig);
    h.cache_->ready = true;
  });
  return h;
}

HermitianOperator HermitianOperator::diagonal(const RVec& d) {
  HermitianOperator h;
  h.a_ = d.cast<cplx>().asDiagonal();
  return h;
}

const Eigendecomposition& HermitianOperator::eig() const {
  std::call_once(cache_->once, [this] {
    Eigen::SelfAdjointEigenSolver<Mat> solver(a_);
    if (solver.info() != Eigen::Success)
      throw NumericalError("eigensolver failed (dimension " + std::to_string(a_.rows()) +
                           ", max entry " + std::to_string(a_.cwiseAbs().maxCoeff()) + ")");
    cache_->eig.values = solver.eigenvalues();
    cache_->eig.vectors = solver.eigenvectors();
    cache_->ready = true;
  });
  return cache_->eig;
}

bool HermitianOperator::has_eig() const { return cache_->ready; }

HermitianOperator op_function(const std::function<double(double)>& f, const HermitianOperator& A) {
  const auto& e = A.eig();
  RVec fv = e.values.unaryExpr(f);
  return HermitianOperator::from_spectrum(fv, e.vectors);
}

RVec singular_values(const Mat& A) {
  if (A.size() == 0) return RVec();
  Eigen::BDCSVD<Mat> svd(A);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed");
  return svd.singularValues();
}

double trace_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  return singular_values(A).sum();
}

double hs_norm(const Mat& A) { return A.norm(); }

double op_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  return singular_values(A).maxCoeff();
}

Mat commutator(const Mat& A, const Mat& B) {
  if (A.cols() != B.rows() || A.rows() != B.cols()) throw DimensionMismatch("commutator: shapes");
  return A * B - B * A;
}

Mat weighted_sandwich(const RVec& wl, const Mat& A, const RVec& wr) {
  if (wl.size() != A.rows() || wr.size() != A.cols()) throw DimensionMismatch("weighted_sandwich");
  return kernels::parallel::weighted_sandwich(wl, A, wr);
}

Mat weighted_sandwich(const space::SpaceSpec& space, const space::Weight& wl, const Mat& A,
                      const space::Weight& wr) {
  return weighted_sandwich(space::weight_profile(space, wl), A, space::weight_profile(space, wr));
}

double min_eigenvalue(const HermitianOperator& A) { return A.eig().values[0]; }

double operator_leq_margin(const HermitianOperator& A, const HermitianOperator& B) {
  if (A.dim() != B.dim()) throw DimensionMismatch("operator_leq: dimensions");
  Eigen::SelfAdjointEigenSolver<Mat> solver(B.matrix() - A.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("operator_leq: eigensolver failed");
  return solver.eigenvalues()[0];
}

bool operator_leq(const HermitianOperator& A, const HermitianOperator& B, double tol) {
  return operator_leq_margin(A, B) >= -tol;
}

std::string to_string(PiKind k) {
  switch (k) {
    case PiKind::Omega: return "omega";
    case PiKind::SqrtOmega: return "sqrt_omega";
    case PiKind::OneMinusSqrtOneMinusOmega: return "one_minus_sqrt_one_minus_omega";
  }
  return "?";
}

PiKind pi_kind_from_string(const std::string& s) {
  if (s == "omega") return PiKind::Omega;
  if (s == "sqrt_omega") return PiKind::SqrtOmega;
  if (s == "one_minus_sqrt_one_minus_omega") return PiKind::OneMinusSqrtOneMinusOmega;
  throw InvalidParameter("unknown pi kind: " + s);
}

DensityMatrix::DensityMatrix(const HermitianOperator& omega, double tau) {
  const auto& e = omega.eig();
  if (e.values.size() > 0 && (e.values.minCoeff() < -tau || e.values.maxCoeff() > 1.0 + tau))
    throw InvalidParameter("DensityMatrix: spectrum outside [0,1] beyond clamp tolerance");
  RVec clamped = e.values.cwiseMax(0.0).cwiseMin(1.0);
  omega_ = HermitianOperator::from_spectrum(clamped, e.vectors);
}

double DensityMatrix::trace() const { return occupations().sum(); }

Mat DensityMatrix::function(const std::function<double(double)>& f) const {
  const auto& e = omega_.eig();
  RVec fv = e.values.unaryExpr(f);
  return e.vectors * fv.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

Mat DensityMatrix::u() const {
  return function([](double x) { return std::sqrt(std::max(0.0, 1.0 - x)); });
}

Mat DensityMatrix::v() const {
  return function([](double x) { return std::sqrt(std::max(0.0, x)); });
}

Mat DensityMatrix::overlap() const {
  return function([](double x) { return std::sqrt(std::max(0.0, x * (1.0 - x))); });
}

Mat DensityMatrix::pi(PiKind k) const {
  switch (k) {
    case PiKind::Omega: return matrix();
    case PiKind::SqrtOmega: return v();
    case PiKind::OneMinusSqrtOneMinusOmega:
      return function([](double x) { return 1.0 - std::sqrt(std::max(0.0, 1.0 - x)); });
  }
  throw InvalidParameter("pi: unknown kind");
}

void write_operator(std::ostream& os, const HermitianOperator& A, bool include_eig) {
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, include_eig ? kFlagHasEig : 0u);
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(A.dim()));
  const Mat& a = A.matrix();
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) {
      put_le<double>(os, a(i, j).real());
      put_le<double>(os, a(i, j).imag());
    }
  if (include_eig) {
    const auto& e = A.eig();
    for (Index i = 0; i < e.values.size(); ++i) put_le<double>(os, e.values[i]);
    for (Index i = 0; i < e.vectors.rows(); ++i)
      for (Index j = 0; j < e.vectors.cols(); ++j) {
        put_le<double>(os, e.vectors(i, j).real());
        put_le<double>(os, e.vectors(i, j).imag());
      }
  }
  if (!os) throw Error("write_operator: stream failure");
}

HermitianOperator read_operator(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw Error("read_operator: bad magic");
  auto flags = get_le<std::uint32_t>(is);
  auto D = static_cast<Index>(get_le<std::uint64_t>(is));
  Mat a(D, D);
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < D; ++j) {
      double re = get_le<double>(is);
      double im = get_le<double>(is);
      a(i, j) = cplx(re, im);
    }
  if (flags & kFlagHasEig) {
    RVec vals(D);
    for (Index i = 0; i < D; ++i) vals[i] = get_le<double>(is);
    Mat vecs(D, D);
    for (Index i = 0; i < D; ++i)
      for (Index j = 0; j < D; ++j) {
        double re = get_le<double>(is);
        double im = get_le<double>(is);
        vecs(i, j) = cplx(re, im);
      }
    HermitianOperator h = HermitianOperator::with_eig(a, Eigendecomposition{vals, vecs});
    Mat rec = vecs * vals.cast<cplx>().asDiagonal() * vecs.adjoint();
    if ((rec - h.matrix()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, a.cwiseAbs().maxCoeff()))
      throw Error("read_operator: stored eigendecomposition does not reconstruct the matrix");
    return h;
  }
  return HermitianOperator(a, 1e-10);
}

void save_operator(const std::string& path, const HermitianOperator& A, bool include_eig) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_operator: cannot open " + path);
  write_operator(os, A, include_eig);
}

HermitianOperator load_operator(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_operator: cannot open " + path);
  return read_operator(is);
}

}  // namespace relhartree::opcore

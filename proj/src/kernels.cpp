#include "relhartree/kernels.hpp"

#include <Eigen/SVD>

#include "relhartree/error.hpp"

namespace relhartree::kernels {

namespace {

Index difference_index(const space::SpaceSpec& space, Index x, Index y) {
  auto ix = space.multi_index(x);
  auto iy = space.multi_index(y);
  std::array<int, 3> diff{0, 0, 0};
  for (int j = 0; j < space.dim(); ++j) diff[j] = ix[j] - iy[j];
  return space.flat_index(diff);
}

double svd_sum(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(A);
  if (svd.info() != Eigen::Success) throw NumericalError("trace_norms: SVD failed");
  return svd.singularValues().sum();
}

}  // namespace

namespace serial {

Mat weighted_sandwich(const RVec& wl, const Mat& A, const RVec& wr) {
  Mat out(A.rows(), A.cols());
  for (Index j = 0; j < A.cols(); ++j)
    for (Index i = 0; i < A.rows(); ++i) out(i, j) = wl[i] * A(i, j) * wr[j];
  return out;
}

RVec periodic_convolution(const space::SpaceSpec& space, const RVec& profile, const RVec& rho) {
  const Index n = space.size();
  RVec out = RVec::Zero(n);
  for (Index x = 0; x < n; ++x) {
    double acc = 0.0;
    for (Index y = 0; y < n; ++y) acc += profile[difference_index(space, x, y)] * rho[y];
    out[x] = acc;
  }
  return out;
}

RVec conjugated_diagonal(const Mat& U, const Mat& A) {
  Mat UA = U * A;
  RVec out(U.rows());
  for (Index x = 0; x < U.rows(); ++x) out[x] = (UA.row(x).array() * U.row(x).conjugate().array()).sum().real();
  return out;
}

std::vector<double> trace_norms(const std::vector<Mat>& ops) {
  std::vector<double> out(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) out[i] = svd_sum(ops[i]);
  return out;
}

Vec spmv(const SpMat& A, const Vec& x) {
  Vec y = Vec::Zero(A.rows());
  for (Index r = 0; r < A.outerSize(); ++r) {
    cplx acc = 0.0;
    for (SpMat::InnerIterator it(A, r); it; ++it) acc += it.value() * x[it.col()];
    y[r] = acc;
  }
  return y;
}

}  // namespace serial

namespace parallel {

Mat weighted_sandwich(const RVec& wl, const Mat& A, const RVec& wr) {
  Mat out(A.rows(), A.cols());
  const Index cols = A.cols();
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < cols; ++j) out.col(j) = (wl.array().cast<cplx>() * A.col(j).array()) * wr[j];
  return out;
}

RVec periodic_convolution(const space::SpaceSpec& space, const RVec& profile, const RVec& rho) {
  const Index n = space.size();
  RVec out = RVec::Zero(n);
#pragma omp parallel for schedule(static)
  for (Index x = 0; x < n; ++x) {
    double acc = 0.0;
    for (Index y = 0; y < n; ++y) acc += profile[difference_index(space, x, y)] * rho[y];
    out[x] = acc;
  }
  return out;
}

RVec conjugated_diagonal(const Mat& U, const Mat& A) {
  Mat UA = U * A;
  RVec out(U.rows());
  const Index rows = U.rows();
#pragma omp parallel for schedule(static)
  for (Index x = 0; x < rows; ++x) out[x] = (UA.row(x).array() * U.row(x).conjugate().array()).sum().real();
  return out;
}

std::vector<double> trace_norms(const std::vector<Mat>& ops) {
  std::vector<double> out(ops.size());
  const long count = static_cast<long>(ops.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) out[i] = svd_sum(ops[i]);
  return out;
}

Vec spmv(const SpMat& A, const Vec& x) {
  Vec y = Vec::Zero(A.rows());
  const Index rows = A.outerSize();
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    cplx acc = 0.0;
    for (SpMat::InnerIterator it(A, r); it; ++it) acc += it.value() * x[it.col()];
    y[r] = acc;
  }
  return y;
}

}  // namespace parallel

}  // namespace relhartree::kernels

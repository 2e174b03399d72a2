#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "relhartree/space.hpp"
#include "relhartree/types.hpp"

// Hot loops in two flavours: `serial` is the reference used by tests,
// `parallel` is the OpenMP version used by the library.
namespace relhartree::kernels {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

namespace serial {
Mat weighted_sandwich(const RVec& wl, const Mat& A, const RVec& wr);
// out(x) = sum_y V(x - y) rho(y) on the periodic grid, by direct summation.
RVec periodic_convolution(const space::SpaceSpec& space, const RVec& profile, const RVec& rho);
// diag(U A U^dagger), real part.
RVec conjugated_diagonal(const Mat& U, const Mat& A);
std::vector<double> trace_norms(const std::vector<Mat>& ops);
Vec spmv(const SpMat& A, const Vec& x);
}  // namespace serial

namespace parallel {
Mat weighted_sandwich(const RVec& wl, const Mat& A, const RVec& wr);
RVec periodic_convolution(const space::SpaceSpec& space, const RVec& profile, const RVec& rho);
RVec conjugated_diagonal(const Mat& U, const Mat& A);
std::vector<double> trace_norms(const std::vector<Mat>& ops);
Vec spmv(const SpMat& A, const Vec& x);
}  // namespace parallel

}  // namespace relhartree::kernels

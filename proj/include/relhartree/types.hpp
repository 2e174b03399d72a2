#pragma once

#include <Eigen/Dense>
#include <complex>

namespace relhartree {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace relhartree

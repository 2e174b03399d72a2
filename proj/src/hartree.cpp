#include "relhartree/hartree.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "relhartree/error.hpp"
#include "relhartree/kernels.hpp"

namespace relhartree::hartree {

namespace {

Mat phase_conjugate(const opcore::Eigendecomposition& e, double factor) {
  Vec ph(e.values.size());
  for (Index j = 0; j < ph.size(); ++j) ph[j] = std::polar(1.0, -factor * e.values[j]);
  return e.vectors * ph.asDiagonal() * e.vectors.adjoint();
}

}  // namespace

GridInteraction::GridInteraction(space::SpaceSpec space, RVec profile)
    : space_(std::move(space)), profile_(std::move(profile)) {
  if (profile_.size() != space_.size()) throw DimensionMismatch("GridInteraction: profile size");
  symbol_ = profile_.cast<cplx>();
  space::fft_forward(space_, symbol_);
}

GridInteraction GridInteraction::gaussian(const space::SpaceSpec& space, double strength, double range) {
  if (!(range > 0)) throw InvalidParameter("GridInteraction: range must be positive");
  RVec p(space.size());
  for (Index i = 0; i < space.size(); ++i) {
    double r = space::periodic_distance(space, space.position(i), space::Point{0, 0, 0});
    p[i] = strength * std::exp(-r * r / (2.0 * range * range));
  }
  return GridInteraction(space, p);
}

RVec GridInteraction::convolve(const RVec& rho) const {
  if (rho.size() != space_.size()) throw DimensionMismatch("GridInteraction::convolve");
  Vec r = rho.cast<cplx>();
  space::fft_forward(space_, r);
  r.array() *= symbol_.array();
  space::fft_inverse(space_, r);
  return r.real();
}

RVec GridInteraction::convolve_direct(const RVec& rho) const {
  return kernels::parallel::periodic_convolution(space_, profile_, rho);
}

RMat GridInteraction::kernel_matrix() const {
  return space::circulant_matrix(space_, profile_.cast<cplx>()).real();
}

KernelInteraction::KernelInteraction(RMat kernel) : V_(std::move(kernel)) {
  if (V_.rows() != V_.cols()) throw DimensionMismatch("KernelInteraction: kernel not square");
  if ((V_ - V_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, V_.cwiseAbs().maxCoeff()))
    throw InvalidParameter("KernelInteraction: kernel must be symmetric");
}

RVec HartreeSystem::mean_field(const Mat& omega) const {
  if (!interacting()) return RVec::Zero(omega.rows());
  if (interaction->dim() != omega.rows()) throw DimensionMismatch("mean_field: dimension");
  return coupling * interaction->convolve(omega.diagonal().real());
}

double HartreeSystem::energy(const Mat& omega) const {
  double e = (h0.matrix().cwiseProduct(omega.transpose())).sum().real();
  if (interacting()) {
    RVec rho = omega.diagonal().real();
    e += 0.5 * coupling * rho.dot(interaction->convolve(rho));
  }
  return e;
}

StepResult step(const HartreeSystem& sys, const Mat& omega, double dt, const StepOptions& opt) {
  if (dt == 0.0) throw InvalidParameter("step: dt must be nonzero");
  if (std::abs(dt) / sys.eps > opt.max_ratio) throw InvalidParameter("step: |dt|/eps exceeds the stability bound");
  if (omega.rows() != sys.h0.dim()) throw DimensionMismatch("step: omega dimension");
  const double f = dt / sys.eps;
  StepResult out;

  if (!sys.interacting()) {
    Mat U = phase_conjugate(sys.h0.eig(), f);
    out.omega = U * omega * U.adjoint();
    out.iterations = 0;
    if (opt.keep_unitary) out.unitary = std::move(U);
    return out;
  }

  RVec mf = sys.mean_field(omega);
  const Mat& H0 = sys.h0.matrix();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    Mat hbar = H0;
    hbar.diagonal() += mf.cast<cplx>();
    HermitianOperator hb(hbar, 1e-10);
    const auto& e = hb.eig();
    Mat Uhalf = phase_conjugate(e, 0.5 * f);
    RVec rho_mid = kernels::parallel::conjugated_diagonal(Uhalf, omega);
    RVec mf_new = sys.coupling * sys.interaction->convolve(rho_mid);
    double res = (mf_new - mf).cwiseAbs().maxCoeff();
    out.iterations = it;
    out.residual = res;
    if (res <= opt.tolerance) {
      Mat U = Uhalf * Uhalf;
      out.omega = U * omega * U.adjoint();
      out.omega = 0.5 * (out.omega + out.omega.adjoint());
      if (opt.keep_unitary) out.unitary = std::move(U);
      return out;
    }
    mf = std::move(mf_new);
  }
  throw StepError("step: self-consistent midpoint did not converge", out.residual);
}

double sorted_spectrum_drift(const Mat& a, const Mat& b) {
  Eigen::SelfAdjointEigenSolver<Mat> sa(a, Eigen::EigenvaluesOnly), sb(b, Eigen::EigenvaluesOnly);
  return (sa.eigenvalues() - sb.eigenvalues()).cwiseAbs().maxCoeff();
}

double observable_expectation(const Mat& omega, const RVec& profile) {
  if (profile.size() != omega.rows()) throw DimensionMismatch("observable_expectation");
  return profile.dot(omega.diagonal().real());
}

HartreeTrajectory evolve(const HartreeSystem& sys, const Mat& omega0, double T, double dt,
                         const EvolveOptions& opt) {
  if (!(dt > 0)) throw InvalidParameter("evolve: dt must be positive (sign comes from T)");
  if (opt.snapshot_every < 1) throw InvalidParameter("evolve: snapshot interval must be >= 1");
  HartreeTrajectory traj;
  const long steps = T == 0.0 ? 0 : static_cast<long>(std::ceil(std::abs(T) / dt - 1e-9));
  const double h = steps == 0 ? 0.0 : T / steps;
  traj.dt = h;

  Eigen::SelfAdjointEigenSolver<Mat> s0(omega0, Eigen::EigenvaluesOnly);
  const RVec spec0 = s0.eigenvalues();
  auto record = [&](double t, const Mat& w) {
    LedgerRow row;
    row.t = t;
    row.trace = w.trace().real();
    row.energy = sys.energy(w);
    Eigen::SelfAdjointEigenSolver<Mat> st(w, Eigen::EigenvaluesOnly);
    row.spectral_drift = (st.eigenvalues() - spec0).cwiseAbs().maxCoeff();
    for (const auto& o : opt.observables) row.observables.push_back(observable_expectation(w, o));
    traj.times.push_back(t);
    traj.states.push_back(w);
    traj.ledger.push_back(std::move(row));
  };

  Mat w = omega0;
  record(0.0, w);
  for (long k = 1; k <= steps; ++k) {
    try {
      w = step(sys, w, h, opt.step).omega;
    } catch (const StepError& err) {
      traj.aborted = true;
      traj.error = err.what();
      traj.error_residual = err.residual();
      return traj;
    }
    traj.steps_done = static_cast<int>(k);
    if (k % opt.snapshot_every == 0 || k == steps) record(k * h, w);
  }
  return traj;
}

Mat free_propagator(const space::SpaceSpec& space, const RVec& symbol, double t_over_eps) {
  Vec ph(symbol.size());
  for (Index j = 0; j < ph.size(); ++j) ph[j] = std::polar(1.0, -t_over_eps * symbol[j]);
  return space::circulant_matrix(space, space::circulant_kernel(space, ph));
}

LocalityResult locality_propagation_check(const HartreeSystem& sys, const Mat& omega0, const RVec& weight,
                                          double T, double dt, int snapshot_every, const StepOptions& opt) {
  if (!(weight.minCoeff() > 0)) throw InvalidParameter("locality: weight must be positive");
  LocalityResult out;
  out.times.push_back(0.0);
  out.growth.push_back(1.0);
  if (T == 0.0) return out;
  const long steps = static_cast<long>(std::ceil(std::abs(T) / dt - 1e-9));
  const double h = T / steps;
  StepOptions so = opt;
  so.keep_unitary = true;
  const Index D = omega0.rows();
  Mat U = Mat::Identity(D, D);
  Mat w = omega0;
  RVec isq = weight.cwiseSqrt().cwiseInverse();
  for (long k = 1; k <= steps; ++k) {
    StepResult r = step(sys, w, h, so);
    w = std::move(r.omega);
    U = (*r.unitary) * U;
    if (k % snapshot_every == 0 || k == steps) {
      Mat M = U.adjoint() * weight.cast<cplx>().asDiagonal() * U;
      M = isq.cast<cplx>().asDiagonal() * M * isq.cast<cplx>().asDiagonal();
      M = 0.5 * (M + M.adjoint());
      Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
      double lmax = es.eigenvalues().maxCoeff();
      double t = std::abs(k * h);
      out.times.push_back(t);
      out.growth.push_back(lmax);
      out.c = std::max(out.c, std::log(lmax) / t);
    }
  }
  return out;
}

double richardson_ratio(const HartreeSystem& sys, const Mat& omega0, double T, double dt,
                        const StepOptions& opt) {
  auto run = [&](double h) {
    EvolveOptions eo;
    eo.step = opt;
    eo.snapshot_every = 1 << 20;
    auto tr = evolve(sys, omega0, T, h, eo);
    if (tr.aborted) throw StepError("richardson_ratio: " + tr.error, tr.error_residual);
    return tr.states.back();
  };
  Mat a = run(dt), b = run(0.5 * dt), c = run(0.25 * dt);
  return (a - b).norm() / (b - c).norm();
}

void write_snapshot_csv(std::ostream& os, const HartreeTrajectory& traj, const std::vector<std::string>& labels,
                        const std::string& header) {
  os << header << "\n";
  os << "t,trace,energy,spectral_drift";
  for (const auto& l : labels) os << "," << l;
  os << "\n" << std::setprecision(17);
  for (const auto& r : traj.ledger) {
    os << r.t << "," << r.trace << "," << r.energy << "," << r.spectral_drift;
    for (double v : r.observables) os << "," << v;
    os << "\n";
  }
}

}  // namespace relhartree::hartree

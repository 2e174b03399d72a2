#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relhartree/opcore.hpp"
#include "relhartree/space.hpp"

namespace relhartree::hartree {

using opcore::HermitianOperator;

// Two-body potential acting on diagonal densities: out(x) = sum_y V(x, y) rho(y).
class Interaction {
 public:
  virtual ~Interaction() = default;
  virtual Index dim() const = 0;
  virtual RVec convolve(const RVec& rho) const = 0;
  virtual RMat kernel_matrix() const = 0;
};

// Translation-invariant V(x - y) on the periodic grid, applied by FFT.
class GridInteraction final : public Interaction {
 public:
  GridInteraction(space::SpaceSpec space, RVec profile);
  // V(x) = strength * exp(-|x|^2 / (2 range^2)), minimum image.
  static GridInteraction gaussian(const space::SpaceSpec& space, double strength, double range);

  Index dim() const override { return space_.size(); }
  RVec convolve(const RVec& rho) const override;
  RVec convolve_direct(const RVec& rho) const;  // O(D^2) oracle
  RMat kernel_matrix() const override;
  const RVec& profile() const { return profile_; }
  const Vec& symbol() const { return symbol_; }
  const space::SpaceSpec& space() const { return space_; }

 private:
  space::SpaceSpec space_;
  RVec profile_;
  Vec symbol_;
};

// Arbitrary real symmetric kernel on an M-mode space, applied by direct summation.
class KernelInteraction final : public Interaction {
 public:
  explicit KernelInteraction(RMat kernel);
  Index dim() const override { return V_.rows(); }
  RVec convolve(const RVec& rho) const override { return V_ * rho; }
  RMat kernel_matrix() const override { return V_; }

 private:
  RMat V_;
};

struct HartreeSystem {
  HermitianOperator h0;  // one-body part
  std::shared_ptr<const Interaction> interaction;
  double eps = 1.0;
  double coupling = 0.0;

  RVec mean_field(const Mat& omega) const;  // g * sum_y V(x,y) omega(y,y)
  double energy(const Mat& omega) const;    // tr(h0 omega) + g/2 sum V rho rho
  bool interacting() const { return coupling != 0.0 && interaction != nullptr; }
};

struct StepOptions {
  int max_iterations = 20;
  double tolerance = 1e-10;  // mean-field change, max norm
  double max_ratio = 0.5;    // |dt| / eps
  bool keep_unitary = false;
};

struct StepResult {
  Mat omega;
  int iterations = 0;
  double residual = 0.0;
  std::optional<Mat> unitary;
};

// Self-consistent exponential midpoint step; dt may be negative (backward step).
StepResult step(const HartreeSystem& sys, const Mat& omega, double dt, const StepOptions& opt = {});

struct LedgerRow {
  double t = 0;
  double trace = 0;
  double energy = 0;
  double spectral_drift = 0;
  std::vector<double> observables;
};

struct HartreeTrajectory {
  double dt = 0;
  std::vector<double> times;
  std::vector<Mat> states;
  std::vector<LedgerRow> ledger;
  int steps_done = 0;
  bool aborted = false;
  std::string error;
  double error_residual = 0;
};

struct EvolveOptions {
  int snapshot_every = 1;
  std::vector<RVec> observables;  // diagonal multipliers
  StepOptions step;
  bool track_unitary = false;
};

HartreeTrajectory evolve(const HartreeSystem& sys, const Mat& omega0, double T, double dt,
                         const EvolveOptions& opt = {});

double observable_expectation(const Mat& omega, const RVec& profile);

// exp(-i H0 t / eps) for H0 = F^dagger diag(symbol) F, built in Fourier space.
Mat free_propagator(const space::SpaceSpec& space, const RVec& symbol, double t_over_eps);

struct LocalityResult {
  double c = 0;
  std::vector<double> times;
  std::vector<double> growth;  // max eig of W^{-1/2} U* W U W^{-1/2}
};

LocalityResult locality_propagation_check(const HartreeSystem& sys, const Mat& omega0, const RVec& weight,
                                          double T, double dt, int snapshot_every = 1,
                                          const StepOptions& opt = {});

// ||w_dt - w_{dt/2}|| / ||w_{dt/2} - w_{dt/4}|| at fixed horizon T, HS norm.
double richardson_ratio(const HartreeSystem& sys, const Mat& omega0, double T, double dt,
                        const StepOptions& opt = {});

double sorted_spectrum_drift(const Mat& a, const Mat& b);

void write_snapshot_csv(std::ostream& os, const HartreeTrajectory& traj, const std::vector<std::string>& labels,
                        const std::string& header);

}  // namespace relhartree::hartree

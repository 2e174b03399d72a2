#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "relhartree/opcore.hpp"
#include "relhartree/space.hpp"

namespace relhartree::equilibrium {

using opcore::DensityMatrix;
using opcore::HermitianOperator;
using space::Point;

constexpr double kTolGap = 1e-9;

struct ExternalPotential {
  enum class Kind { Zero, Constant, CosineWells, SmoothedQuadratic };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;
  int wells = 1;          // cosine wells per axis
  Point center{0, 0, 0};  // smoothed quadratic minimum

  static ExternalPotential zero() { return {}; }
  static ExternalPotential constant(double c);
  // A * sum_j (1 - cos(2 pi q x_j / L))
  static ExternalPotential cosine_wells(double amplitude, int wells);
  // A * (L/pi)^2 * sum_j sin^2(pi (x_j - c_j) / L): quadratic near c, capped at A (L/pi)^2.
  static ExternalPotential smoothed_quadratic(double amplitude, const Point& center);

  double value(const space::SpaceSpec& space, const Point& x) const;
  RVec profile(const space::SpaceSpec& space) const;
  std::string name() const;
};

ExternalPotential::Kind potential_kind_from_string(const std::string& s);

struct BuiltHamiltonian {
  HermitianOperator op;
  RVec kinetic_symbol;  // FFT ordering
  RVec potential;       // grid ordering
  bool resolved = true;
  std::vector<std::string> warnings;
};

BuiltHamiltonian build_hamiltonian(const space::SpaceSpec& space, const space::EpsilonScaling& scal,
                                   const ExternalPotential& V);

enum class Method { Projection, Eigendecomposition, Contour };
std::string to_string(Method m);

struct EquilibriumState {
  DensityMatrix omega;
  double mu = 0.0;
  double beta = std::numeric_limits<double>::infinity();
  Method method = Method::Eigendecomposition;
  HermitianOperator H;
  double particle_number = 0.0;
  double contour_discrepancy = std::numeric_limits<double>::quiet_NaN();
  bool contour_within_tolerance = true;
};

double fermi_dirac_scalar(double e, double mu, double beta);

EquilibriumState fermi_projection(const HermitianOperator& H, double mu, double tol_gap = kTolGap);
EquilibriumState fermi_dirac(const HermitianOperator& H, double mu, double beta);
double fermi_dirac_trace(const HermitianOperator& H, double mu, double beta);
double solve_chemical_potential(const HermitianOperator& H, double beta, double n_target,
                                double tol = 1e-8);

struct ContourOptions {
  std::size_t nodes = 256;  // per horizontal leg
  double truncation = 40.0;  // legs end at Re z = mu + truncation / beta
  double left_edge = std::numeric_limits<double>::quiet_NaN();  // default: min spectrum - 2
  double tolerance = 1e-6;
};

EquilibriumState fermi_dirac_contour(const HermitianOperator& H, double mu, double beta,
                                     const ContourOptions& opt = {});

// tr[((beta(H - mu))^{2m} + 1)^{-1} W]
double weyl_trace(const HermitianOperator& H, double mu, double beta, int m, const RVec& weight);

// Volume of {p in R^d : sqrt(1 + |p|^2) <= E}.
double kinetic_ball_volume(int d, double E);
// (2 pi eps)^{-d} sum_x h^d w(x)^2 vol_d(nu - V(x)).
double weyl_phase_space(const space::SpaceSpec& space, const space::EpsilonScaling& scal,
                        const RVec& potential, double nu, const RVec& weight);

struct WeylRow {
  Point z{0, 0, 0};
  double n = 0;
  int m = 0;
  double eps = 0;
  double beta = 0;
  double value = 0;
  std::string kind;
  int dim = 1;
};

struct WeylReport {
  std::vector<WeylRow> rows;
  std::vector<double> nu;
  std::vector<double> counted;
  std::vector<double> phase_space;
  std::vector<double> remainder;
  double max_abs_remainder = 0.0;
};

struct WeylContext {
  space::SpaceSpec space;
  space::EpsilonScaling scal;
  RVec potential;
};

// tr W chi(H <= nu) W versus the phase-space integral with weight W^2.
WeylReport pointwise_weyl_check(const HermitianOperator& H, const WeylContext& ctx, double mu,
                                const space::Weight& w, const std::vector<double>& nu_list,
                                double alpha = 0.5);

std::vector<double> nu_window(double mu, double eps, double alpha, int count);

struct Tr2HsResult {
  double lhs = 0;
  double rhs = 0;
  double ratio() const { return lhs / rhs; }
};

Tr2HsResult tr2hs_check(const HermitianOperator& H, double mu, double beta, int m,
                        const space::SpaceSpec& space, const space::Weight& w);

struct ProjectionDistance {
  double distance = 0;  // ||W (omega_mu - omega_{mu,beta})||_tr
  double fd_overlap = 0;  // ||W omega (1 - omega)||_tr
};

ProjectionDistance projection_vs_fermidirac(const HermitianOperator& H, double mu, double beta,
                                            const RVec& weight);

struct HeatDomination {
  bool holds = false;
  double margin = 0;          // min eig(e^{-(H-mu)} - omega_{mu,beta})
  double weighted_trace = 0;  // tr W e^{-(H-mu)}
};

HeatDomination heat_domination_check(const HermitianOperator& H, double mu, double beta,
                                     const RVec& weight, double tol = 1e-10);

// Operator inequality omega(1-omega) <= C_m ((beta(H-mu))^{2m}+1)^{-1}; returns the spectral margin.
struct OverlapDomination {
  double constant = 0;
  double margin = 0;
};
OverlapDomination overlap_domination(const HermitianOperator& H, double mu, double beta, int m);

void write_weyl_csv(std::ostream& os, const std::vector<WeylRow>& rows, const std::string& header);

}  // namespace relhartree::equilibrium

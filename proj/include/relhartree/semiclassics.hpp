#pragma once

#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relhartree/hartree.hpp"
#include "relhartree/opcore.hpp"
#include "relhartree/space.hpp"

namespace relhartree::semiclassics {

using opcore::DensityMatrix;
using opcore::PiKind;
using space::Point;

enum class Quantity { Density, GradCommutator, PhaseCommutator, Overlap, RegularCommutator };
std::string to_string(Quantity q);
Quantity quantity_from_string(const std::string& s);

struct ProbeValue {
  double bare = 0;
  double prefactored = 0;
  Point p{0, 0, 0};  // maximizing momentum for the phase probe
};

double separation_prefactor(const space::SpaceSpec& space, const Point& z, const Point& zp, double power);

ProbeValue probe_density(const space::SpaceSpec& space, const Mat& omega, int n, const Point& z, const Point& zp);

// Fourier multiplier i eps k_axis (Nyquist mode set to zero so the matrix stays anti-Hermitian).
Mat scaled_gradient(const space::SpaceSpec& space, double eps, int axis);
Mat phase_multiplier(const space::SpaceSpec& space, const Point& p);

enum class CommutatorKind { Grad, Phase };
ProbeValue probe_commutators(const space::SpaceSpec& space, double eps, const Mat& pi, CommutatorKind kind, int n,
                             const Point& z, const Point& zp, const std::vector<Point>& p_list);

// Magnitudes along each axis plus one diagonal, snapped to grid frequencies.
std::vector<Point> p_ladder(const space::SpaceSpec& space,
                            const std::vector<double>& magnitudes = {0.5, 1, 2, 4, 8, 16});

ProbeValue probe_overlap(const space::SpaceSpec& space, const DensityMatrix& omega, int n, const Point& z,
                         const Point& zp);

struct RegularCommutatorValue {
  double bare = 0;         // ||W_{z'}^{(n/2)} [pi, F_z]||_tr
  double prefactored = 0;  // times (1 + |z - z'|^{2n})
  double unlocalized = 0;  // ||[pi, F_z]||_tr
};

RegularCommutatorValue probe_regular_commutator(const space::SpaceSpec& space, const Mat& pi,
                                                const space::Observable& F, int n, const Point& z,
                                                const Point& zp);

struct ScalingFit {
  std::string quantity;
  std::vector<double> eps;
  std::vector<double> values;
  double exponent = 0;
  double intercept = 0;
  double residual = 0;  // rms of log residuals
  double expected = std::numeric_limits<double>::quiet_NaN();
  double margin = 0.3;
  bool span_ok = false;  // eps range spans a factor >= 3
  bool within() const { return std::abs(exponent - expected) <= margin; }
};

ScalingFit fit_exponent(const std::vector<double>& eps, const std::vector<double>& values,
                        double expected = std::numeric_limits<double>::quiet_NaN(), double margin = 0.3);

// Expected exponents in d dimensions: density -d, everything else -(d-1).
double expected_exponent(Quantity q, int d);

struct GrowthFit {
  double A = 0;
  double c = 0;              // smallest rate with A e^{ct} >= value(t) for all samples
  double ls_rate = 0;        // least-squares slope of log value against t
  double residual = 0;       // rms log residual of the least-squares line
  double max_violation = 0;  // max_t log(value / (A e^{ct})), <= 0 means the envelope holds
  bool finite() const { return std::isfinite(A) && std::isfinite(c); }
};

// Envelope anchored at the first sample (t[0] must be the earliest time): A = value(t0).
GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& values);

struct StructureProbe {
  Quantity quantity = Quantity::Density;
  PiKind pi = PiKind::Omega;
  int n = 2;
  Point z{0, 0, 0};
  Point zp{0, 0, 0};
  std::vector<Point> p_list;
  std::optional<space::Observable> F;
  std::string label() const;
};

struct ProbeRow {
  std::string quantity;
  std::string pi;
  int n = 0;
  Point z{0, 0, 0};
  Point zp{0, 0, 0};
  Point p{0, 0, 0};
  double t = 0;
  double eps = 0;
  double value = 0;
  double prefactored = 0;
  int dim = 1;
};

// Evaluates all probes on one state; pi matrices computed once and shared.
std::vector<ProbeRow> evaluate_probes(const space::SpaceSpec& space, double eps, const DensityMatrix& omega,
                                      const std::vector<StructureProbe>& probes, double t = 0.0);

struct PropagationSeries {
  StructureProbe probe;
  std::vector<double> t;
  std::vector<double> values;
  GrowthFit fit;
};

struct PropagationReport {
  std::vector<ProbeRow> rows;
  std::vector<PropagationSeries> series;
};

PropagationReport propagation_suite(const space::SpaceSpec& space, double eps,
                                    const hartree::HartreeTrajectory& traj,
                                    const std::vector<StructureProbe>& probes);

void write_probe_csv(std::ostream& os, const std::vector<ProbeRow>& rows, const std::string& header);

}  // namespace relhartree::semiclassics

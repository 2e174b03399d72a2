#include "relhartree/equilibrium.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "relhartree/error.hpp"
#include "relhartree/kernels.hpp"

namespace relhartree::equilibrium {

namespace {

constexpr double kPi = std::numbers::pi;

// sum_x w(x) |phi_j(x)|^2 for every eigenvector column.
RVec weighted_diagonals(const Mat& vectors, const RVec& weight) {
  return vectors.cwiseAbs2().transpose() * weight;
}

Mat from_eig(const opcore::Eigendecomposition& e, const RVec& f) {
  return e.vectors * f.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

double window(double x, double beta, int power) {
  return 1.0 / (std::pow(beta * x, power) + 1.0);
}

}  // namespace

ExternalPotential ExternalPotential::constant(double c) {
  if (c < 0) throw InvalidParameter("potential: constant must be nonnegative");
  ExternalPotential p;
  p.kind = Kind::Constant;
  p.amplitude = c;
  return p;
}

ExternalPotential ExternalPotential::cosine_wells(double amplitude, int wells) {
  if (amplitude < 0 || wells < 1) throw InvalidParameter("potential: cosine wells need A >= 0, q >= 1");
  ExternalPotential p;
  p.kind = Kind::CosineWells;
  p.amplitude = amplitude;
  p.wells = wells;
  return p;
}

ExternalPotential ExternalPotential::smoothed_quadratic(double amplitude, const Point& center) {
  if (amplitude < 0) throw InvalidParameter("potential: quadratic strength must be nonnegative");
  ExternalPotential p;
  p.kind = Kind::SmoothedQuadratic;
  p.amplitude = amplitude;
  p.center = center;
  return p;
}

double ExternalPotential::value(const space::SpaceSpec& space, const Point& x) const {
  const double L = space.length();
  double v = 0.0;
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Constant: return amplitude;
    case Kind::CosineWells:
      for (int j = 0; j < space.dim(); ++j) v += 1.0 - std::cos(2.0 * kPi * wells * x[j] / L);
      return amplitude * v;
    case Kind::SmoothedQuadratic:
      for (int j = 0; j < space.dim(); ++j) {
        double s = std::sin(kPi * (x[j] - center[j]) / L);
        v += s * s;
      }
      return amplitude * (L / kPi) * (L / kPi) * v;
  }
  return 0.0;
}

RVec ExternalPotential::profile(const space::SpaceSpec& space) const {
  RVec out(space.size());
  for (Index i = 0; i < space.size(); ++i) out[i] = value(space, space.position(i));
  return out;
}

std::string ExternalPotential::name() const {
  switch (kind) {
    case Kind::Zero: return "zero";
    case Kind::Constant: return "constant";
    case Kind::CosineWells: return "cosine_wells";
    case Kind::SmoothedQuadratic: return "smoothed_quadratic";
  }
  return "?";
}

ExternalPotential::Kind potential_kind_from_string(const std::string& s) {
  if (s == "zero") return ExternalPotential::Kind::Zero;
  if (s == "constant") return ExternalPotential::Kind::Constant;
  if (s == "cosine_wells") return ExternalPotential::Kind::CosineWells;
  if (s == "smoothed_quadratic") return ExternalPotential::Kind::SmoothedQuadratic;
  throw InvalidParameter("unknown potential preset: " + s);
}

BuiltHamiltonian build_hamiltonian(const space::SpaceSpec& space, const space::EpsilonScaling& scal,
                                   const ExternalPotential& V) {
  if (scal.d != space.dim()) throw DimensionMismatch("build_hamiltonian: scaling dimension differs");
  BuiltHamiltonian out;
  out.kinetic_symbol = space::kinetic_symbol(space, scal);
  out.potential = V.profile(space);
  out.resolved = scal.resolved(space);
  if (!out.resolved) {
    std::ostringstream msg;
    msg << "resolution condition eps >= 2h violated (eps=" << scal.eps << ", h=" << space.spacing() << ")";
    out.warnings.push_back(msg.str());
  }
  Vec kernel = space::circulant_kernel(space, out.kinetic_symbol.cast<cplx>());
  Mat H = space::circulant_matrix(space, kernel);
  H.diagonal() += out.potential.cast<cplx>();
  out.op = HermitianOperator(H, 1e-10);
  return out;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Projection: return "projection";
    case Method::Eigendecomposition: return "eigendecomposition";
    case Method::Contour: return "contour";
  }
  return "?";
}

double fermi_dirac_scalar(double e, double mu, double beta) {
  double x = beta * (e - mu);
  if (x > 0) {
    double t = std::exp(-x);
    return t / (1.0 + t);
  }
  return 1.0 / (1.0 + std::exp(x));
}

EquilibriumState fermi_projection(const HermitianOperator& H, double mu, double tol_gap) {
  const auto& e = H.eig();
  std::vector<long> ambiguous;
  for (Index j = 0; j < e.values.size(); ++j)
    if (std::abs(e.values[j] - mu) <= tol_gap) ambiguous.push_back(static_cast<long>(j));
  if (!ambiguous.empty())
    throw DegenerateThreshold("fermi_projection: mu within tol_gap of an eigenvalue", ambiguous);
  RVec occ(e.values.size());
  for (Index j = 0; j < occ.size(); ++j) occ[j] = e.values[j] <= mu ? 1.0 : 0.0;
  EquilibriumState s;
  s.omega = DensityMatrix(HermitianOperator::from_spectrum(occ, e.vectors));
  s.mu = mu;
  s.beta = std::numeric_limits<double>::infinity();
  s.method = Method::Projection;
  s.H = H;
  s.particle_number = occ.sum();
  return s;
}

EquilibriumState fermi_dirac(const HermitianOperator& H, double mu, double beta) {
  if (!(beta > 0)) throw InvalidParameter("fermi_dirac: beta must be positive");
  const auto& e = H.eig();
  RVec occ(e.values.size());
  for (Index j = 0; j < occ.size(); ++j) occ[j] = fermi_dirac_scalar(e.values[j], mu, beta);
  EquilibriumState s;
  s.omega = DensityMatrix(HermitianOperator::from_spectrum(occ, e.vectors));
  s.mu = mu;
  s.beta = beta;
  s.method = Method::Eigendecomposition;
  s.H = H;
  s.particle_number = occ.sum();
  return s;
}

double fermi_dirac_trace(const HermitianOperator& H, double mu, double beta) {
  const auto& e = H.eig();
  double t = 0.0;
  for (Index j = 0; j < e.values.size(); ++j) t += fermi_dirac_scalar(e.values[j], mu, beta);
  return t;
}

double solve_chemical_potential(const HermitianOperator& H, double beta, double n_target, double tol) {
  const double D = static_cast<double>(H.dim());
  if (!(n_target > 0 && n_target < D))
    throw InvalidParameter("solve_chemical_potential: target must lie in (0, D)");
  if (!(beta > 0)) throw InvalidParameter("solve_chemical_potential: beta must be positive");
  const auto& e = H.eig();
  double span = 50.0 / beta + 1.0;
  double lo = e.values.minCoeff() - span;
  double hi = e.values.maxCoeff() + span;
  while (fermi_dirac_trace(H, lo, beta) > n_target) lo -= span;
  while (fermi_dirac_trace(H, hi, beta) < n_target) hi += span;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    double t = fermi_dirac_trace(H, mid, beta);
    if (std::abs(t - n_target) <= tol) return mid;
    if (t < n_target) lo = mid; else hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  if (std::abs(fermi_dirac_trace(H, mid, beta) - n_target) > tol)
    throw NumericalError("solve_chemical_potential: bisection stalled before reaching tolerance");
  return mid;
}

EquilibriumState fermi_dirac_contour(const HermitianOperator& H, double mu, double beta,
                                     const ContourOptions& opt) {
  if (!(beta > 0)) throw InvalidParameter("contour: beta must be positive");
  if (opt.nodes < 16) throw InvalidParameter("contour: at least 16 nodes per leg required");
  const auto& e = H.eig();
  const double emin = e.values.minCoeff();
  const double left = std::isnan(opt.left_edge) ? emin - 2.0 : opt.left_edge;
  if (left > emin - 1.0) throw InvalidParameter("contour: vertical leg must lie below min spectrum - 1");
  const double right = mu + opt.truncation / beta;
  const double a = kPi / (2.0 * beta);
  const Index D = H.dim();

  // Nodes on the top leg and the upper half of the vertical leg. The lower half of
  // the contour is the mirror image, contributing the adjoint.
  struct Node {
    cplx z;
    cplx w;
  };
  std::vector<Node> nodes;
  // Trapezoid rule after a one-sided sine map that flattens the corner end of each leg.
  // The far right end carries a negligible integrand; the bottom of the vertical leg joins
  // its mirror image smoothly, so that node is shared and gets half weight.
  auto add_leg = [&](cplx z0, cplx z1, std::size_t n, bool flat_start) {
    for (std::size_t k = 0; k <= n; ++k) {
      double s = static_cast<double>(k) / n;
      double sign = flat_start ? -1.0 : 1.0;
      double phi = s + sign * std::sin(kPi * s) / kPi;
      double dphi = 1.0 + sign * std::cos(kPi * s);
      if (dphi < 1e-300 || (flat_start && k == n)) continue;
      if (!flat_start && k == 0) dphi *= 0.5;
      cplx z = z0 + (z1 - z0) * phi;
      cplx dz = (z1 - z0) * dphi / static_cast<double>(n);
      cplx ex = std::exp(beta * (z - mu));
      cplx f = 1.0 / (1.0 + ex);
      nodes.push_back({z, dz * f / cplx(0.0, 2.0 * kPi)});
    }
  };
  add_leg(cplx(left, a), cplx(right, a), opt.nodes, true);
  add_leg(cplx(left, 0.0), cplx(left, a), std::max<std::size_t>(8, opt.nodes / 8), false);

  const Mat& Hm = H.matrix();
  Mat S = Mat::Zero(D, D);
  const long count = static_cast<long>(nodes.size());
#pragma omp parallel
  {
    Mat local = Mat::Zero(D, D);
#pragma omp for schedule(dynamic)
    for (long k = 0; k < count; ++k) {
      Mat A = Hm;
      A.diagonal().array() -= nodes[k].z;
      Eigen::PartialPivLU<Mat> lu(A);
      local += nodes[k].w * lu.inverse();
    }
#pragma omp critical
    S += local;
  }
  Mat omega = S + S.adjoint();
  EquilibriumState s;
  HermitianOperator om(omega, 1e-8);
  EquilibriumState ref = fermi_dirac(H, mu, beta);
  s.contour_discrepancy = opcore::op_norm(om.matrix() - ref.omega.matrix());
  s.contour_within_tolerance = s.contour_discrepancy <= opt.tolerance;
  // Clamp tolerance is widened to the measured discrepancy so that a reported
  // failure does not turn into an exception.
  s.omega = DensityMatrix(om, std::max(opcore::kClampTolerance, 2.0 * s.contour_discrepancy));
  s.mu = mu;
  s.beta = beta;
  s.method = Method::Contour;
  s.H = H;
  s.particle_number = om.matrix().trace().real();
  return s;
}

double weyl_trace(const HermitianOperator& H, double mu, double beta, int m, const RVec& weight) {
  if (m < 1) throw InvalidParameter("weyl_trace: need 2m >= 2");
  const auto& e = H.eig();
  RVec diag = weighted_diagonals(e.vectors, weight);
  double t = 0.0;
  for (Index j = 0; j < e.values.size(); ++j) t += window(e.values[j] - mu, beta, 2 * m) * diag[j];
  return t;
}

double kinetic_ball_volume(int d, double E) {
  if (E <= 1.0) return 0.0;
  double r = std::sqrt(E * E - 1.0);
  switch (d) {
    case 1: return 2.0 * r;
    case 2: return kPi * r * r;
    case 3: return 4.0 * kPi / 3.0 * r * r * r;
  }
  throw InvalidParameter("kinetic_ball_volume: dimension must be 1, 2 or 3");
}

double weyl_phase_space(const space::SpaceSpec& space, const space::EpsilonScaling& scal,
                        const RVec& potential, double nu, const RVec& weight) {
  const int d = space.dim();
  double acc = 0.0;
  for (Index i = 0; i < space.size(); ++i)
    acc += weight[i] * weight[i] * kinetic_ball_volume(d, nu - potential[i]);
  return acc * space.cell_volume() / std::pow(2.0 * kPi * scal.eps, d);
}

std::vector<double> nu_window(double mu, double eps, double alpha, int count) {
  if (count < 1) throw InvalidParameter("nu_window: count must be positive");
  double half = 2.0 * std::pow(eps, alpha);
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = count == 1 ? mu : mu - half + 2.0 * half * i / (count - 1);
  return out;
}

WeylReport pointwise_weyl_check(const HermitianOperator& H, const WeylContext& ctx, double mu,
                                const space::Weight& w, const std::vector<double>& nu_list, double alpha) {
  const double half = 2.0 * std::pow(ctx.scal.eps, alpha);
  const auto& e = H.eig();
  RVec wp = space::weight_profile(ctx.space, w);
  RVec w2 = wp.cwiseAbs2();
  RVec diag = weighted_diagonals(e.vectors, w2);
  WeylReport rep;
  for (double nu : nu_list) {
    if (nu < mu - half - 1e-12 || nu > mu + half + 1e-12)
      throw InvalidParameter("pointwise_weyl_check: nu outside the window around mu");
    double counted = 0.0;
    for (Index j = 0; j < e.values.size(); ++j)
      if (e.values[j] <= nu) counted += diag[j];
    double I = weyl_phase_space(ctx.space, ctx.scal, ctx.potential, nu, wp);
    rep.nu.push_back(nu);
    rep.counted.push_back(counted);
    rep.phase_space.push_back(I);
    rep.remainder.push_back(counted - I);
    rep.max_abs_remainder = std::max(rep.max_abs_remainder, std::abs(counted - I));
    std::ostringstream tag;
    tag << std::setprecision(10) << "[nu=" << nu << "]";
    const double inf = std::numeric_limits<double>::infinity();
    const int d = ctx.space.dim();
    rep.rows.push_back({w.z, w.n(), 0, ctx.scal.eps, inf, counted, "weyl_counted" + tag.str(), d});
    rep.rows.push_back({w.z, w.n(), 0, ctx.scal.eps, inf, I, "weyl_phase_space" + tag.str(), d});
    rep.rows.push_back({w.z, w.n(), 0, ctx.scal.eps, inf, counted - I, "weyl_remainder" + tag.str(), d});
  }
  return rep;
}

Tr2HsResult tr2hs_check(const HermitianOperator& H, double mu, double beta, int m,
                        const space::SpaceSpec& space, const space::Weight& w) {
  const int n2 = w.twice_n;  // 2n
  if (m % 2 != 0 || n2 % 4 != 0 || 2 * m > n2 / 2)
    throw InvalidParameter("tr2hs_check: need m, n even and m <= n/2");
  const auto& e = H.eig();
  RVec g2(e.values.size()), g1(e.values.size());
  for (Index j = 0; j < g2.size(); ++j) {
    g2[j] = window(e.values[j] - mu, beta, 2 * m);
    g1[j] = window(e.values[j] - mu, beta, m);
  }
  RVec wn = space::weight_profile(space, w);
  RVec wh = space::weight_profile(space, w.half());
  Tr2HsResult r;
  Mat left = from_eig(e, g2) * wn.cast<cplx>().asDiagonal();
  r.lhs = opcore::trace_norm(left);
  // ||g(H) W||_HS^2 = sum_j g_j^2 <phi_j, W^2 phi_j>
  RVec diag = weighted_diagonals(e.vectors, wh.cwiseAbs2());
  r.rhs = (g1.cwiseAbs2().array() * diag.array()).sum();
  return r;
}

ProjectionDistance projection_vs_fermidirac(const HermitianOperator& H, double mu, double beta,
                                            const RVec& weight) {
  const auto& e = H.eig();
  for (Index j = 0; j < e.values.size(); ++j)
    if (std::abs(e.values[j] - mu) <= kTolGap)
      throw DegenerateThreshold("projection_vs_fermidirac: mu within tol_gap of an eigenvalue",
                                {static_cast<long>(j)});
  RVec diff(e.values.size()), ov(e.values.size());
  for (Index j = 0; j < diff.size(); ++j) {
    double f = fermi_dirac_scalar(e.values[j], mu, beta);
    diff[j] = (e.values[j] <= mu ? 1.0 : 0.0) - f;
    ov[j] = f * (1.0 - f);
  }
  ProjectionDistance out;
  out.distance = opcore::trace_norm(weight.cast<cplx>().asDiagonal() * from_eig(e, diff));
  out.fd_overlap = opcore::trace_norm(weight.cast<cplx>().asDiagonal() * from_eig(e, ov));
  return out;
}

HeatDomination heat_domination_check(const HermitianOperator& H, double mu, double beta,
                                     const RVec& weight, double tol) {
  if (!(beta >= 1.0)) throw InvalidParameter("heat_domination_check: beta must be >= 1");
  const auto& e = H.eig();
  RVec heat(e.values.size()), occ(e.values.size());
  for (Index j = 0; j < heat.size(); ++j) {
    heat[j] = std::exp(-(e.values[j] - mu));
    occ[j] = std::isinf(beta) ? (e.values[j] <= mu ? 1.0 : 0.0) : fermi_dirac_scalar(e.values[j], mu, beta);
  }
  HermitianOperator A(from_eig(e, occ), 1e-10);
  HermitianOperator B(from_eig(e, heat), 1e-10);
  HeatDomination out;
  out.margin = opcore::operator_leq_margin(A, B);
  out.holds = out.margin >= -tol;
  out.weighted_trace = (heat.array() * weighted_diagonals(e.vectors, weight).array()).sum();
  return out;
}

OverlapDomination overlap_domination(const HermitianOperator& H, double mu, double beta, int m) {
  // C_m = sup_y sigma(y)(1 - sigma(y))(y^{2m} + 1), scanned on a fine grid then refined.
  double best = 0.0;
  for (int i = -60000; i <= 60000; ++i) {
    double y = i * 1e-3;
    double s = fermi_dirac_scalar(y, 0.0, 1.0);
    best = std::max(best, s * (1.0 - s) * (std::pow(y, 2 * m) + 1.0));
  }
  best *= 1.0 + 1e-6;  // grid scan slightly underestimates the supremum
  const auto& e = H.eig();
  RVec lhs(e.values.size()), rhs(e.values.size());
  for (Index j = 0; j < lhs.size(); ++j) {
    double f = fermi_dirac_scalar(e.values[j], mu, beta);
    lhs[j] = f * (1.0 - f);
    rhs[j] = best * window(e.values[j] - mu, beta, 2 * m);
  }
  OverlapDomination out;
  out.constant = best;
  out.margin = opcore::operator_leq_margin(HermitianOperator(from_eig(e, lhs), 1e-10),
                                           HermitianOperator(from_eig(e, rhs), 1e-10));
  return out;
}

void write_weyl_csv(std::ostream& os, const std::vector<WeylRow>& rows, const std::string& header) {
  os << header << "\n";
  os << "z,n,m,eps,beta,value,kind\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    for (int j = 0; j < r.dim; ++j) os << (j ? ";" : "") << r.z[j];
    os << "," << r.n << "," << r.m << "," << r.eps << "," << r.beta << "," << r.value << ","
       << r.kind << "\n";
  }
}

}  // namespace relhartree::equilibrium

#include "relhartree/semiclassics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "relhartree/error.hpp"
#include "relhartree/kernels.hpp"

namespace relhartree::semiclassics {

namespace {

RVec weight(const space::SpaceSpec& space, const Point& z, int twice_n) {
  return space::weight_profile(space, space::Weight{z, twice_n});
}

double sandwich_norm(const RVec& wl, const Mat& A, const RVec& wr) {
  return opcore::trace_norm(kernels::parallel::weighted_sandwich(wl, A, wr));
}

std::string point_string(const Point& p, int d) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (int j = 0; j < d; ++j) os << (j ? ";" : "") << p[j];
  return os.str();
}

}  // namespace

std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::Density: return "density";
    case Quantity::GradCommutator: return "grad_commutator";
    case Quantity::PhaseCommutator: return "phase_commutator";
    case Quantity::Overlap: return "overlap";
    case Quantity::RegularCommutator: return "regular_commutator";
  }
  return "?";
}

Quantity quantity_from_string(const std::string& s) {
  for (auto q : {Quantity::Density, Quantity::GradCommutator, Quantity::PhaseCommutator, Quantity::Overlap,
                 Quantity::RegularCommutator})
    if (to_string(q) == s) return q;
  throw InvalidParameter("unknown probe quantity: " + s);
}

double separation_prefactor(const space::SpaceSpec& space, const Point& z, const Point& zp, double power) {
  double r = space::periodic_distance(space, z, zp);
  return 1.0 + (power == 0.0 ? 1.0 : std::pow(r, power));
}

ProbeValue probe_density(const space::SpaceSpec& space, const Mat& omega, int n, const Point& z, const Point& zp) {
  ProbeValue v;
  v.bare = sandwich_norm(weight(space, z, 2 * n), omega, weight(space, zp, n));
  v.prefactored = separation_prefactor(space, z, zp, 2.0 * n - 4.0) * v.bare;
  return v;
}

Mat scaled_gradient(const space::SpaceSpec& space, double eps, int axis) {
  if (axis < 0 || axis >= space.dim()) throw InvalidParameter("scaled_gradient: axis out of range");
  Vec sym(space.size());
  for (Index i = 0; i < space.size(); ++i) {
    auto idx = space.multi_index(i);
    sym[i] = space.is_nyquist(idx[axis]) ? cplx(0.0) : cplx(0.0, eps * space.wavevector(i)[axis]);
  }
  return space::circulant_matrix(space, space::circulant_kernel(space, sym));
}

Mat phase_multiplier(const space::SpaceSpec& space, const Point& p) {
  Vec d(space.size());
  for (Index i = 0; i < space.size(); ++i) {
    Point x = space.position(i);
    double ph = 0.0;
    for (int j = 0; j < space.dim(); ++j) ph += p[j] * x[j];
    d[i] = std::polar(1.0, ph);
  }
  return d.asDiagonal();
}

ProbeValue probe_commutators(const space::SpaceSpec& space, double eps, const Mat& pi, CommutatorKind kind, int n,
                             const Point& z, const Point& zp, const std::vector<Point>& p_list) {
  RVec wl = weight(space, z, 2 * n);
  RVec wr = weight(space, zp, n);
  const double pref = separation_prefactor(space, z, zp, 2.0 * n);
  ProbeValue v;
  if (kind == CommutatorKind::Grad) {
    std::vector<Mat> ops;
    for (int j = 0; j < space.dim(); ++j) {
      Mat G = scaled_gradient(space, eps, j);
      ops.push_back(kernels::parallel::weighted_sandwich(wl, opcore::commutator(G, pi), wr));
    }
    auto norms = kernels::parallel::trace_norms(ops);
    v.bare = *std::max_element(norms.begin(), norms.end());
    v.prefactored = pref * v.bare;
    return v;
  }
  if (p_list.empty()) throw InvalidParameter("probe_commutators: empty momentum list");
  std::vector<Mat> ops;
  ops.reserve(p_list.size());
  for (const auto& p : p_list) {
    Vec d(space.size());
    for (Index i = 0; i < space.size(); ++i) {
      Point x = space.position(i);
      double ph = 0.0;
      for (int j = 0; j < space.dim(); ++j) ph += p[j] * x[j];
      d[i] = std::polar(1.0, ph);
    }
    // [e^{ipx}, pi](x, y) = (e^{ipx} - e^{ipy}) pi(x, y)
    Mat C(pi.rows(), pi.cols());
    for (Index y = 0; y < pi.cols(); ++y) C.col(y) = (d.array() - d[y]) * pi.col(y).array();
    ops.push_back(kernels::parallel::weighted_sandwich(wl, C, wr));
  }
  auto norms = kernels::parallel::trace_norms(ops);
  v.bare = -1.0;
  for (std::size_t k = 0; k < p_list.size(); ++k) {
    double normalized = norms[k] / (1.0 + space::norm(p_list[k], space.dim()));
    if (normalized > v.bare) {
      v.bare = normalized;
      v.p = p_list[k];
    }
  }
  v.prefactored = pref * v.bare;
  return v;
}

std::vector<Point> p_ladder(const space::SpaceSpec& space, const std::vector<double>& magnitudes) {
  const int d = space.dim();
  const double dk = space.frequency(1);
  const int mmax = space.points() / 2 - 1;
  std::set<std::array<int, 3>> seen;
  std::vector<Point> out;
  auto add = [&](const Point& p) {
    std::array<int, 3> m{0, 0, 0};
    bool nonzero = false;
    for (int j = 0; j < d; ++j) {
      m[j] = std::clamp(static_cast<int>(std::lround(p[j] / dk)), -mmax, mmax);
      nonzero = nonzero || m[j] != 0;
    }
    if (!nonzero || !seen.insert(m).second) return;
    Point q{0, 0, 0};
    for (int j = 0; j < d; ++j) q[j] = m[j] * dk;
    out.push_back(q);
  };
  for (double s : magnitudes) {
    for (int j = 0; j < d; ++j) {
      Point p{0, 0, 0};
      p[j] = s;
      add(p);
    }
    if (d > 1) {
      Point p{0, 0, 0};
      for (int j = 0; j < d; ++j) p[j] = s / std::sqrt(static_cast<double>(d));
      add(p);
    }
  }
  return out;
}

ProbeValue probe_overlap(const space::SpaceSpec& space, const DensityMatrix& omega, int n, const Point& z,
                         const Point& zp) {
  ProbeValue v;
  v.bare = sandwich_norm(weight(space, z, 2 * n), omega.overlap(), weight(space, zp, n));
  v.prefactored = separation_prefactor(space, z, zp, 2.0 * n) * v.bare;
  return v;
}

RegularCommutatorValue probe_regular_commutator(const space::SpaceSpec& space, const Mat& pi,
                                                const space::Observable& F, int n, const Point& z,
                                                const Point& zp) {
  RVec f = F.translated(space, z).profile(space);
  Mat C(pi.rows(), pi.cols());
  for (Index y = 0; y < pi.cols(); ++y) C.col(y) = pi.col(y).array() * (f[y] - f.array());
  RVec wr = weight(space, zp, n);
  RegularCommutatorValue v;
  auto norms = kernels::parallel::trace_norms({wr.cast<cplx>().asDiagonal() * C, C});
  v.bare = norms[0];
  v.unlocalized = norms[1];
  v.prefactored = separation_prefactor(space, z, zp, 2.0 * n) * v.bare;
  return v;
}

ScalingFit fit_exponent(const std::vector<double>& eps, const std::vector<double>& values, double expected,
                        double margin) {
  if (eps.size() != values.size()) throw InvalidParameter("fit_exponent: size mismatch");
  if (eps.size() < 3) throw InvalidSample("fit_exponent: need at least 3 samples");
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (!(values[i] > 0) || !(eps[i] > 0)) throw InvalidSample("fit_exponent: nonpositive sample");
  const std::size_t n = eps.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::log(eps[i]), y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0) throw InvalidSample("fit_exponent: eps samples must not coincide");
  ScalingFit fit;
  fit.eps = eps;
  fit.values = values;
  fit.exponent = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.exponent * sx) / n;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::log(values[i]) - fit.intercept - fit.exponent * std::log(eps[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  fit.expected = expected;
  fit.margin = margin;
  auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
  fit.span_ok = *hi >= 3.0 * *lo;
  return fit;
}

double expected_exponent(Quantity q, int d) {
  return q == Quantity::Density ? -static_cast<double>(d) : -static_cast<double>(d - 1);
}

GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& values) {
  if (t.size() != values.size() || t.size() < 2) throw InvalidSample("fit_growth: need >= 2 samples");
  for (double v : values)
    if (!(v > 0)) throw InvalidSample("fit_growth: nonpositive sample");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[0])) throw InvalidSample("fit_growth: times must follow the anchor");
  const std::size_t n = t.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double y = std::log(values[i]);
    sx += t[i];
    sy += y;
    sxx += t[i] * t[i];
    sxy += t[i] * y;
  }
  GrowthFit g;
  const double denom = n * sxx - sx * sx;
  g.ls_rate = denom > 0 ? (n * sxy - sx * sy) / denom : 0.0;
  const double b = (sy - g.ls_rate * sx) / n;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::log(values[i]) - b - g.ls_rate * t[i];
    ss += r * r;
  }
  g.residual = std::sqrt(ss / n);
  g.A = values[0];
  g.c = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < n; ++i) g.c = std::max(g.c, std::log(values[i] / values[0]) / (t[i] - t[0]));
  g.max_violation = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    g.max_violation = std::max(g.max_violation, std::log(values[i] / g.A) - g.c * (t[i] - t[0]));
  return g;
}

std::string StructureProbe::label() const {
  std::ostringstream os;
  os << to_string(quantity);
  if (quantity != Quantity::Density) os << "/" << opcore::to_string(pi);
  os << "/n=" << n << "/z=" << z[0] << "/zp=" << zp[0];
  return os.str();
}

std::vector<ProbeRow> evaluate_probes(const space::SpaceSpec& space, double eps, const DensityMatrix& omega,
                                      const std::vector<StructureProbe>& probes, double t) {
  for (const auto& pr : probes)
    if (pr.quantity == Quantity::RegularCommutator && !pr.F)
      throw InvalidParameter("regular commutator probe needs an observable");
  std::map<PiKind, Mat> pis;
  for (const auto& pr : probes) {
    if (pr.quantity == Quantity::GradCommutator || pr.quantity == Quantity::PhaseCommutator ||
        pr.quantity == Quantity::RegularCommutator)
      if (!pis.count(pr.pi)) pis.emplace(pr.pi, omega.pi(pr.pi));
  }
  Mat overlap;
  for (const auto& pr : probes)
    if (pr.quantity == Quantity::Overlap) {
      overlap = omega.overlap();
      break;
    }
  std::vector<ProbeRow> rows(probes.size());
  const long count = static_cast<long>(probes.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < count; ++k) {
    const auto& pr = probes[k];
    ProbeRow row;
    row.quantity = to_string(pr.quantity);
    row.pi = pr.quantity == Quantity::Density || pr.quantity == Quantity::Overlap ? "-" : opcore::to_string(pr.pi);
    row.n = pr.n;
    row.z = pr.z;
    row.zp = pr.zp;
    row.t = t;
    row.eps = eps;
    row.dim = space.dim();
    switch (pr.quantity) {
      case Quantity::Density: {
        auto v = probe_density(space, omega.matrix(), pr.n, pr.z, pr.zp);
        row.value = v.bare;
        row.prefactored = v.prefactored;
        break;
      }
      case Quantity::GradCommutator:
      case Quantity::PhaseCommutator: {
        auto kind = pr.quantity == Quantity::GradCommutator ? CommutatorKind::Grad : CommutatorKind::Phase;
        auto v = probe_commutators(space, eps, pis.at(pr.pi), kind, pr.n, pr.z, pr.zp, pr.p_list);
        row.value = v.bare;
        row.prefactored = v.prefactored;
        row.p = v.p;
        break;
      }
      case Quantity::Overlap: {
        row.value = sandwich_norm(weight(space, pr.z, 2 * pr.n), overlap, weight(space, pr.zp, pr.n));
        row.prefactored = separation_prefactor(space, pr.z, pr.zp, 2.0 * pr.n) * row.value;
        break;
      }
      case Quantity::RegularCommutator: {
        auto v = probe_regular_commutator(space, pis.at(pr.pi), *pr.F, pr.n, pr.z, pr.zp);
        row.value = v.bare;
        row.prefactored = v.prefactored;
        break;
      }
    }
    rows[k] = std::move(row);
  }
  return rows;
}

PropagationReport propagation_suite(const space::SpaceSpec& space, double eps,
                                    const hartree::HartreeTrajectory& traj,
                                    const std::vector<StructureProbe>& probes) {
  PropagationReport rep;
  rep.series.resize(probes.size());
  for (std::size_t k = 0; k < probes.size(); ++k) rep.series[k].probe = probes[k];
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    DensityMatrix omega(traj.states[s], 1e-8);
    auto rows = evaluate_probes(space, eps, omega, probes, traj.times[s]);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      rep.series[k].t.push_back(traj.times[s]);
      rep.series[k].values.push_back(rows[k].prefactored);
    }
    rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
  }
  for (auto& ser : rep.series) {
    if (ser.t.size() < 2) continue;
    try {
      ser.fit = fit_growth(ser.t, ser.values);
    } catch (const InvalidSample&) {
      // a vanishing probe admits no exponential envelope
      ser.fit.A = ser.fit.c = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rep;
}

void write_probe_csv(std::ostream& os, const std::vector<ProbeRow>& rows, const std::string& header) {
  os << header << "\n";
  os << "quantity,pi,n,z,zprime,p,t,eps,value,prefactored_value\n";
  os << std::setprecision(17);
  for (const auto& r : rows)
    os << r.quantity << "," << r.pi << "," << r.n << "," << point_string(r.z, r.dim) << ","
       << point_string(r.zp, r.dim) << "," << point_string(r.p, r.dim) << "," << r.t << "," << r.eps << ","
       << r.value << "," << r.prefactored << "\n";
}

}  // namespace relhartree::semiclassics

#include "relhartree/space.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "relhartree/error.hpp"

namespace relhartree::space {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void run_fft(const SpaceSpec& space, Vec& data, int sign) {
  if (data.size() != space.size()) throw DimensionMismatch("fft: data size does not match grid");
  int dims[3] = {space.points(), space.points(), space.points()};
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft(space.dim(), dims, ptr, ptr, sign, FFTW_ESTIMATE);
  }
  if (!plan) throw NumericalError("fft: planner failed");
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

double wrap_coord(double x, double L) {
  double r = std::fmod(x, L);
  if (r < 0) r += L;
  return r;
}

}  // namespace

SpaceSpec::SpaceSpec(int d, double L, int N) : d_(d), L_(L), N_(N) {
  if (d < 1 || d > 3) throw InvalidParameter("space: dimension must be 1, 2 or 3");
  if (!(L > 0)) throw InvalidParameter("space: box length must be positive");
  if (N < 4 || N % 2 != 0) throw InvalidParameter("space: points per axis must be even and >= 4");
  size_ = 1;
  for (int j = 0; j < d; ++j) size_ *= N;
}

double SpaceSpec::cell_volume() const { return std::pow(spacing(), d_); }

std::array<int, 3> SpaceSpec::multi_index(Index flat) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int j = 0; j < d_; ++j) {
    idx[j] = static_cast<int>(flat % N_);
    flat /= N_;
  }
  return idx;
}

Index SpaceSpec::flat_index(const std::array<int, 3>& idx) const {
  Index flat = 0;
  for (int j = d_ - 1; j >= 0; --j) {
    int i = ((idx[j] % N_) + N_) % N_;
    flat = flat * N_ + i;
  }
  return flat;
}

Point SpaceSpec::position(Index flat) const {
  auto idx = multi_index(flat);
  Point p{0.0, 0.0, 0.0};
  for (int j = 0; j < d_; ++j) p[j] = idx[j] * spacing();
  return p;
}

Point SpaceSpec::wavevector(Index flat) const {
  auto idx = multi_index(flat);
  Point k{0.0, 0.0, 0.0};
  for (int j = 0; j < d_; ++j) k[j] = frequency(signed_mode(idx[j]));
  return k;
}

double SpaceSpec::frequency(int m) const { return 2.0 * std::numbers::pi * m / L_; }

Point SpaceSpec::displacement(const Point& x, const Point& z) const {
  Point r{0.0, 0.0, 0.0};
  for (int j = 0; j < d_; ++j) {
    double t = wrap_coord(x[j] - z[j], L_);
    if (t > 0.5 * L_) t -= L_;
    r[j] = t;
  }
  return r;
}

Point SpaceSpec::wrap(const Point& x) const {
  Point r{0.0, 0.0, 0.0};
  for (int j = 0; j < d_; ++j) r[j] = wrap_coord(x[j], L_);
  return r;
}

double norm(const Point& p, int d) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) s += p[j] * p[j];
  return std::sqrt(s);
}

double periodic_distance(const SpaceSpec& space, const Point& x, const Point& z) {
  return norm(space.displacement(x, z), space.dim());
}

Weight Weight::half() const {
  if (twice_n % 2 != 0) throw InvalidParameter("weight: n/2 requires an integer n");
  return Weight{z, twice_n / 2};
}

double weight_value(const SpaceSpec& space, const Weight& w, const Point& x) {
  if (w.twice_n < 1) throw InvalidParameter("weight: 2n must be a positive integer");
  double r = periodic_distance(space, x, w.z);
  return 1.0 / (1.0 + std::pow(r, 2.0 * w.twice_n));
}

RVec weight_profile(const SpaceSpec& space, const Weight& w) {
  RVec out(space.size());
  for (Index i = 0; i < space.size(); ++i) out[i] = weight_value(space, w, space.position(i));
  return out;
}

double weight_product_constant(const SpaceSpec& space, int twice_n, const Point& z1, const Point& z2) {
  Weight w1{z1, twice_n}, w2{z2, twice_n};
  RVec a = weight_profile(space, w1);
  RVec b = weight_profile(space, w2);
  double denom = weight_value(space, w1, z2);
  return (a.array() * b.array()).maxCoeff() / denom;
}

EpsilonScaling::EpsilonScaling(double eps_, double b_, int d_) : eps(eps_), b(b_), d(d_) {
  if (!(eps > 0)) throw InvalidParameter("scaling: eps must be positive");
  if (!(b > 0)) throw InvalidParameter("scaling: b must be positive");
  if (d < 1 || d > 3) throw InvalidParameter("scaling: dimension must be 1, 2 or 3");
}

double EpsilonScaling::coupling() const { return std::pow(eps, d); }
double EpsilonScaling::target_density() const { return std::pow(eps, -d); }

double kinetic_multiplier(const EpsilonScaling& scal, const Point& k) {
  double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
  return std::sqrt(1.0 + scal.eps * scal.eps * k2);
}

RVec kinetic_symbol(const SpaceSpec& space, const EpsilonScaling& scal) {
  RVec s(space.size());
  for (Index i = 0; i < space.size(); ++i) s[i] = kinetic_multiplier(scal, space.wavevector(i));
  return s;
}

double Observable::value(const SpaceSpec& space, const Point& x) const {
  double r = periodic_distance(space, x, z);
  return std::exp(-r * r / (2.0 * sigma * sigma));
}

RVec Observable::profile(const SpaceSpec& space) const {
  RVec out(space.size());
  for (Index i = 0; i < space.size(); ++i) out[i] = value(space, space.position(i));
  return out;
}

Observable Observable::translated(const SpaceSpec& space, const Point& new_z) const {
  Observable o = *this;
  o.z = space.wrap(new_z);
  return o;
}

Observable gaussian_observable(const SpaceSpec& space, double sigma, const Point& z, int ell,
                               int bound_twice_n) {
  if (!(sigma > 0)) throw InvalidParameter("gaussian_observable: sigma must be positive");
  if (ell < 0) throw InvalidParameter("gaussian_observable: ell must be nonnegative");
  Observable o;
  o.z = space.wrap(z);
  o.sigma = sigma;
  o.ell = ell;
  o.bound_twice_n = bound_twice_n;

  const int d = space.dim();
  const Index n = space.size();
  const double h_d = space.cell_volume();
  const double dp = std::pow(2.0 * std::numbers::pi / space.length(), d);
  const double norm_ft = std::pow(2.0 * std::numbers::pi, -0.5 * d);

  // Centered profile and displacements; translation only changes the phase of O-hat.
  std::vector<Point> disp(n);
  RVec base(n);
  RVec pnorm(n);
  for (Index i = 0; i < n; ++i) {
    disp[i] = space.displacement(space.position(i), Point{0, 0, 0});
    double r = norm(disp[i], d);
    base[i] = std::exp(-r * r / (2.0 * sigma * sigma));
    pnorm[i] = norm(space.wavevector(i), d);
  }

  o.certificate.assign(ell + 1, 0.0);
  std::array<int, 3> alpha{0, 0, 0};
  // Enumerate multi-indices with |alpha| <= ell.
  for (alpha[0] = 0; alpha[0] <= ell; ++alpha[0]) {
    for (alpha[1] = 0; alpha[1] <= (d > 1 ? ell - alpha[0] : 0); ++alpha[1]) {
      for (alpha[2] = 0; alpha[2] <= (d > 2 ? ell - alpha[0] - alpha[1] : 0); ++alpha[2]) {
        int order = alpha[0] + alpha[1] + alpha[2];
        if (order > ell) continue;
        Vec g(n);
        for (Index i = 0; i < n; ++i) {
          double m = base[i];
          for (int j = 0; j < d; ++j) m *= std::pow(disp[i][j], alpha[j]);
          g[i] = m;
        }
        fft_forward(space, g);
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) acc += (1.0 + pnorm[i]) * std::abs(g[i]);
        acc *= norm_ft * h_d * dp;
        o.certificate[order] = std::max(o.certificate[order], acc);
      }
    }
  }

  Weight w{o.z, bound_twice_n};
  RVec prof = o.profile(space);
  RVec wp = weight_profile(space, w);
  o.bound_constant = (prof.array() / wp.array()).maxCoeff();
  return o;
}

void fft_forward(const SpaceSpec& space, Vec& data) { run_fft(space, data, FFTW_FORWARD); }

void fft_inverse(const SpaceSpec& space, Vec& data) {
  run_fft(space, data, FFTW_BACKWARD);
  data /= static_cast<double>(space.size());
}

Vec circulant_kernel(const SpaceSpec& space, const Vec& symbol) {
  Vec c = symbol;
  fft_inverse(space, c);
  return c;
}

Mat circulant_matrix(const SpaceSpec& space, const Vec& kernel) {
  const Index n = space.size();
  Mat A(n, n);
  const int d = space.dim();
  for (Index x = 0; x < n; ++x) {
    auto ix = space.multi_index(x);
    for (Index y = 0; y < n; ++y) {
      auto iy = space.multi_index(y);
      std::array<int, 3> diff{0, 0, 0};
      for (int j = 0; j < d; ++j) diff[j] = ix[j] - iy[j];
      A(x, y) = kernel[space.flat_index(diff)];
    }
  }
  return A;
}

Mat dft_matrix(const SpaceSpec& space) {
  const Index n = space.size();
  const int d = space.dim();
  Mat F(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index k = 0; k < n; ++k) {
    Point kv = space.wavevector(k);
    for (Index x = 0; x < n; ++x) {
      Point xv = space.position(x);
      double phase = 0.0;
      for (int j = 0; j < d; ++j) phase += kv[j] * xv[j];
      F(k, x) = std::polar(scale, -phase);
    }
  }
  return F;
}

}  // namespace relhartree::space

#pragma once

#include <array>
#include <vector>

#include "relhartree/types.hpp"

namespace relhartree::space {

using Point = std::array<double, 3>;

// Periodic grid [0, L)^d with N points per axis. Flat index i0 + N*i1 + N^2*i2.
class SpaceSpec {
 public:
  SpaceSpec(int d, double L, int N);

  int dim() const { return d_; }
  double length() const { return L_; }
  int points() const { return N_; }
  double spacing() const { return L_ / N_; }
  double cell_volume() const;
  Index size() const { return size_; }

  std::array<int, 3> multi_index(Index flat) const;
  Index flat_index(const std::array<int, 3>& idx) const;  // wraps each axis mod N
  Point position(Index flat) const;
  // Wavevector of flat Fourier index in FFT ordering (m = i for i < N/2, else i - N).
  Point wavevector(Index flat) const;
  int signed_mode(int i) const { return i < N_ / 2 ? i : i - N_; }
  double frequency(int m) const;  // 2 pi m / L
  bool is_nyquist(int i) const { return i == N_ / 2; }

  // Minimum-image displacement x - z per axis.
  Point displacement(const Point& x, const Point& z) const;
  Point wrap(const Point& x) const;

  friend bool operator==(const SpaceSpec& a, const SpaceSpec& b) {
    return a.d_ == b.d_ && a.L_ == b.L_ && a.N_ == b.N_;
  }

 private:
  int d_;
  double L_;
  int N_;
  Index size_;
};

double norm(const Point& p, int d);
double periodic_distance(const SpaceSpec& space, const Point& x, const Point& z);

// (1 + dist(x, z)^{4n})^{-1}, n = twice_n / 2.
struct Weight {
  Point z{0.0, 0.0, 0.0};
  int twice_n = 2;

  double n() const { return 0.5 * twice_n; }
  Weight half() const;  // index n/2; requires twice_n even
};

double weight_value(const SpaceSpec& space, const Weight& w, const Point& x);
RVec weight_profile(const SpaceSpec& space, const Weight& w);
// max_x W_{z1}(x) W_{z2}(x) / W_{z1}(z2) over the grid.
double weight_product_constant(const SpaceSpec& space, int twice_n, const Point& z1, const Point& z2);

struct EpsilonScaling {
  double eps = 0.1;
  double b = 1.0;
  int d = 1;

  EpsilonScaling() = default;
  EpsilonScaling(double eps, double b, int d);

  double beta() const { return b / eps; }
  double coupling() const;           // eps^d
  double target_density() const;     // eps^{-d}
  bool resolved(const SpaceSpec& space) const { return eps >= 2.0 * space.spacing(); }
};

double kinetic_multiplier(const EpsilonScaling& scal, const Point& k);
RVec kinetic_symbol(const SpaceSpec& space, const EpsilonScaling& scal);

struct Observable {
  Point z{0.0, 0.0, 0.0};
  double sigma = 1.0;
  int ell = 0;
  // certificate[k] = max over |alpha| = k of the (1+|p|)-weighted L1 norm of D^alpha O-hat.
  std::vector<double> certificate;
  double bound_constant = 0.0;  // |O_z| <= C W_z^{(n)} on the grid
  int bound_twice_n = 2;

  double value(const SpaceSpec& space, const Point& x) const;
  RVec profile(const SpaceSpec& space) const;
  Observable translated(const SpaceSpec& space, const Point& new_z) const;
};

Observable gaussian_observable(const SpaceSpec& space, double sigma, const Point& z, int ell = 4,
                               int bound_twice_n = 2);

// Unnormalized forward and 1/N^d-normalized inverse d-dimensional DFT on the flat grid.
void fft_forward(const SpaceSpec& space, Vec& data);
void fft_inverse(const SpaceSpec& space, Vec& data);

// Kernel c(x) of the circulant operator with Fourier symbol s(k): A(x,y) = c(x - y).
Vec circulant_kernel(const SpaceSpec& space, const Vec& symbol);
Mat circulant_matrix(const SpaceSpec& space, const Vec& kernel);
// Unitary DFT matrix F(k, x) = exp(-i k.x) / sqrt(N^d).
Mat dft_matrix(const SpaceSpec& space);

}  // namespace relhartree::space

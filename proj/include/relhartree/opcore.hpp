#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>

#include "relhartree/space.hpp"
#include "relhartree/types.hpp"

namespace relhartree::opcore {

struct Eigendecomposition {
  RVec values;  // ascending
  Mat vectors;  // columns orthonormal
};

class HermitianOperator {
 public:
  HermitianOperator() = default;
  // Validates Hermiticity to tol * scale and symmetrizes the stored matrix.
  explicit HermitianOperator(const Mat& a, double tol = 1e-12);
  static HermitianOperator from_real(const RMat& a, double tol = 1e-12);
  static HermitianOperator from_spectrum(const RVec& values, const Mat& vectors);
  static HermitianOperator diagonal(const RVec& d);
  // Stored matrix kept as given; eig seeds the cache.
  static HermitianOperator with_eig(const Mat& a, Eigendecomposition eig);

  const Mat& matrix() const { return a_; }
  Index dim() const { return a_.rows(); }
  // Computed once on first use; copies share the cache.
  const Eigendecomposition& eig() const;
  bool has_eig() const;

 private:
  struct Cache {
    std::once_flag once;
    Eigendecomposition eig;
    bool ready = false;
  };
  Mat a_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

double hermiticity_defect(const Mat& a);

HermitianOperator op_function(const std::function<double(double)>& f, const HermitianOperator& A);

double trace_norm(const Mat& A);
double hs_norm(const Mat& A);
double op_norm(const Mat& A);
RVec singular_values(const Mat& A);

Mat commutator(const Mat& A, const Mat& B);
Mat weighted_sandwich(const RVec& wl, const Mat& A, const RVec& wr);
Mat weighted_sandwich(const space::SpaceSpec& space, const space::Weight& wl, const Mat& A,
                      const space::Weight& wr);

double min_eigenvalue(const HermitianOperator& A);
// min eig(B - A) >= -tol
bool operator_leq(const HermitianOperator& A, const HermitianOperator& B, double tol);
double operator_leq_margin(const HermitianOperator& A, const HermitianOperator& B);

constexpr double kClampTolerance = 1e-10;

enum class PiKind { Omega, SqrtOmega, OneMinusSqrtOneMinusOmega };
std::string to_string(PiKind k);
PiKind pi_kind_from_string(const std::string& s);

// One-particle density matrix with spectrum clamped into [0, 1].
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(const HermitianOperator& omega, double tau = kClampTolerance);
  explicit DensityMatrix(const Mat& omega, double tau = kClampTolerance)
      : DensityMatrix(HermitianOperator(omega, 1e-10), tau) {}

  const HermitianOperator& op() const { return omega_; }
  const Mat& matrix() const { return omega_.matrix(); }
  Index dim() const { return omega_.dim(); }
  const RVec& occupations() const { return omega_.eig().values; }
  const Mat& orbitals() const { return omega_.eig().vectors; }
  double trace() const;

  Mat function(const std::function<double(double)>& f) const;
  Mat u() const;        // sqrt(1 - omega)
  Mat v() const;        // sqrt(omega)
  Mat overlap() const;  // sqrt(omega) sqrt(1 - omega)
  Mat pi(PiKind k) const;

 private:
  HermitianOperator omega_;
};

// Binary round trip. Header: 4-byte magic, uint32 flags, uint64 D; little-endian.
constexpr std::uint32_t kFlagHasEig = 1u;
void write_operator(std::ostream& os, const HermitianOperator& A, bool include_eig);
HermitianOperator read_operator(std::istream& is);
void save_operator(const std::string& path, const HermitianOperator& A, bool include_eig);
HermitianOperator load_operator(const std::string& path);

}  // namespace relhartree::opcore

#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "relhartree/fock.hpp"

namespace relhartree::fock {

struct IdentityCheck {
  std::string name;
  double residual = 0;
  double tolerance = 0;
  int instances = 0;
  int modes = 0;
  nlohmann::json params = nlohmann::json::object();
  bool passed() const { return residual <= tolerance; }
  nlohmann::json to_json() const;
};

// Elementary operator in a product string.
struct Elementary {
  int mode = 0;
  Sector sector = Sector::Left;
  bool dagger = false;
};
using OpString = std::vector<Elementary>;

// <psi, c_1 ... c_n psi>
cplx string_expectation(const FockEngine& engine, const Vec& psi, const OpString& s);
// Signed sum over pairings of two-point functions <c_i c_j>, i < j.
cplx wick_pairing_sum(const FockEngine& engine, const Vec& psi, const OpString& s);

// Max deviation of {a_i, a*_j} = delta_ij and {a_i, a_j} = 0 over all modes (both sectors),
// plus the smeared form {a(f), a*(g)} = <f, g> on random vectors.
IdentityCheck check_car(const FockEngine& engine, std::mt19937_64& rng, int random_pairs = 8);

// Random strings of each even length up to max_len compared with the pairing sum;
// odd lengths must vanish.
IdentityCheck check_wick(const FockEngine& engine, const Vec& psi, const std::string& label, std::mt19937_64& rng,
                         int strings_per_length = 40, int max_len = 6);

// max over random J of ||dGamma_*(J)||_op / (2 ||J||_tr); passes when <= 1.
IdentityCheck check_dgamma_bound(int M, int instances, std::mt19937_64& rng);

// Conjugation of dGamma_l(O) by the Araki-Wyss unitary.
IdentityCheck check_bogoliubov_dgamma(int M, int instances, std::mt19937_64& rng);

// Commutators of dGamma_rho(J) with the quartic convolution terms, on a ring of M sites.
IdentityCheck check_convolution_commutators(int M, int instances, std::mt19937_64& rng);

// dGamma commutator algebra and commutators with a single creation operator.
IdentityCheck check_dgamma_commutators(int M, int instances, std::mt19937_64& rng);

IdentityCheck check_araki_wyss_rules(int M, int instances, std::mt19937_64& rng);
IdentityCheck check_slater_rules(int M, int instances, std::mt19937_64& rng);

// Expectations of left-sector operators in the purification equal traces against the
// quasi-free density matrix with the same one-particle density.
IdentityCheck check_exponential_law(int M, int instances, std::mt19937_64& rng);
IdentityCheck check_unitarity(int M, std::mt19937_64& rng);
IdentityCheck check_parity(int M, std::mt19937_64& rng);

// Explicit generator of the fluctuation dynamics: dGamma_l(h_H) - dGamma_r(conj h_H) + C + Q.
Mat fluctuation_generator(const FockEngine& engine, const Mat& H0, const RMat& V, double g, const Mat& omega);
// D + R* (L - D) R, which the explicit form must reproduce.
Mat fluctuation_generator_reference(const FockEngine& engine, const Mat& H0, const RMat& V, double g,
                                    const Mat& omega);

struct GeneratorCheck {
  std::vector<double> dt;
  std::vector<double> residual;  // max over test vectors of ||(G_explicit - G_fd) Xi||
  double slope = 0;
  double reference_residual = 0;  // ||G_explicit - reference||_max
};

GeneratorCheck fluctuation_generator_check(int M, double g, const std::vector<double>& dts, int vectors,
                                           std::mt19937_64& rng);

enum class InitialState { Slater, ArakiWyss };

struct ManyBodyComparison {
  std::vector<double> t;
  std::vector<double> discrepancy;    // |tr O (gamma_t - omega_t)|
  std::vector<double> normalization;  // |tr O omega_t|
  std::vector<double> hs_distance;    // ||gamma_t - omega_t||_HS
  double terminal() const { return discrepancy.back(); }
};

struct ManyBodySetup {
  InitialState kind = InitialState::Slater;
  Mat H0;
  RMat V;
  Mat omega0;
  Mat observable;
  double T = 1.0;
  double dt = 5e-3;
  double eps = 1.0;
  int snapshot_every = 20;
};

ManyBodyComparison manybody_vs_hartree(const ManyBodySetup& setup, double g);

// Ring of M sites: nearest-neighbour hopping and an even, zero-diagonal interaction.
Mat ring_hopping(int M, double hop = 1.0);
RMat ring_interaction(int M, double range = 1.0);

struct VerifyOptions {
  unsigned long seed = 1;
  int car_modes = 8;
  int wick_modes = 6;
  int lemma32_modes = 3;
  int lemma_modes = 4;
  int lemma_instances = 20;
  int bound_instances = 50;
  int generator_modes = 3;
};

std::vector<IdentityCheck> run_verification(const VerifyOptions& opt);
nlohmann::json verification_report(const std::vector<IdentityCheck>& checks);

}  // namespace relhartree::fock

#include "relhartree/fock_checks.hpp"

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <functional>
#include <memory>

#include "relhartree/error.hpp"
#include "relhartree/hartree.hpp"
#include "relhartree/opcore.hpp"

namespace relhartree::fock {

namespace {

double max_abs(const SpMat& A) {
  double m = 0.0;
  for (Index r = 0; r < A.outerSize(); ++r)
    for (SpMat::InnerIterator it(A, r); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double max_abs(const Mat& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

Vec apply_elementary(const FockEngine& e, const Elementary& el, const Vec& v) {
  const SpMat& a = e.mode_annihilation(el.mode, el.sector);
  return el.dagger ? Vec(a.adjoint() * v) : Vec(a * v);
}

std::vector<Sector> sectors(const FockEngine& e) {
  if (e.is_doubled()) return {Sector::Left, Sector::Right};
  return {Sector::Left};
}

RVec even_ring_vector(int M, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  RVec c(M);
  for (int i = 0; i < M; ++i) c[i] = n(rng);
  RVec e(M);
  for (int i = 0; i < M; ++i) e[i] = 0.5 * (c[i] + c[(M - i) % M]);
  return e;
}

RMat ring_circulant(const RVec& c) {
  const int M = static_cast<int>(c.size());
  RMat C(M, M);
  for (int x = 0; x < M; ++x)
    for (int y = 0; y < M; ++y) C(x, y) = c[((x - y) % M + M) % M];
  return C;
}

Mat ring_diag(const RVec& c, int z) {
  const int M = static_cast<int>(c.size());
  Vec d(M);
  for (int x = 0; x < M; ++x) d[x] = c[((x - z) % M + M) % M];
  return d.asDiagonal();
}

Mat matrix_function(const Mat& A, const std::function<double(double)>& f) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.adjoint()));
  RVec v = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * v.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}


}  // namespace

nlohmann::json IdentityCheck::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["residual"] = residual;
  j["tolerance"] = tolerance;
  j["passed"] = passed();
  j["instances"] = instances;
  j["modes"] = modes;
  j["params"] = params;
  return j;
}

cplx string_expectation(const FockEngine& engine, const Vec& psi, const OpString& s) {
  Vec v = psi;
  for (auto it = s.rbegin(); it != s.rend(); ++it) v = apply_elementary(engine, *it, v);
  return psi.dot(v);
}

cplx wick_pairing_sum(const FockEngine& engine, const Vec& psi, const OpString& s) {
  const int n = static_cast<int>(s.size());
  if (n % 2) return 0.0;
  Mat two = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) two(i, j) = string_expectation(engine, psi, {s[i], s[j]});
  std::function<cplx(std::vector<int>&)> rec = [&](std::vector<int>& idx) -> cplx {
    if (idx.empty()) return 1.0;
    cplx total = 0.0;
    const int first = idx[0];
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const int partner = idx[k];
      std::vector<int> rest;
      rest.reserve(idx.size() - 2);
      for (std::size_t q = 1; q < idx.size(); ++q)
        if (q != k) rest.push_back(idx[q]);
      const double sign = (k - 1) % 2 ? -1.0 : 1.0;
      total += sign * two(first, partner) * rec(rest);
    }
    return total;
  };
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return rec(idx);
}

IdentityCheck check_car(const FockEngine& engine, std::mt19937_64& rng, int random_pairs) {
  IdentityCheck c;
  c.name = engine.is_doubled() ? "car_doubled" : "car";
  c.tolerance = 1e-12;
  c.modes = engine.total_modes();
  const SpMat I = engine.identity().mat;
  std::vector<const SpMat*> ops;
  for (Sector s : sectors(engine))
    for (int k = 0; k < engine.modes(); ++k) ops.push_back(&engine.mode_annihilation(k, s));
  double worst = 0.0;
  for (std::size_t i = 0; i < ops.size(); ++i)
    for (std::size_t j = 0; j < ops.size(); ++j) {
      SpMat ai = *ops[i], ajc = ops[j]->adjoint();
      SpMat mixed = SpMat(ai * ajc) + SpMat(ajc * ai);
      if (i == j) mixed -= I;
      SpMat same = SpMat(ai * *ops[j]) + SpMat(*ops[j] * ai);
      worst = std::max({worst, max_abs(mixed), max_abs(same)});
      ++c.instances;
    }
  for (int k = 0; k < random_pairs; ++k) {
    for (Sector s : sectors(engine)) {
      Vec f = random_vector(engine.modes(), rng), g = random_vector(engine.modes(), rng);
      FockOperator af = engine.annihilation(f, s), cg = engine.creation(g, s), cf = engine.creation(f, s);
      SpMat lhs = anticommutator(af, cg).mat - f.dot(g) * I;
      worst = std::max({worst, max_abs(lhs) / (f.norm() * g.norm()), max_abs(anticommutator(cf, cg).mat)});
      ++c.instances;
    }
  }
  c.residual = worst;
  return c;
}

IdentityCheck check_wick(const FockEngine& engine, const Vec& psi, const std::string& label, std::mt19937_64& rng,
                         int strings_per_length, int max_len) {
  IdentityCheck c;
  c.name = "wick_" + label;
  c.tolerance = 1e-10;
  c.modes = engine.total_modes();
  auto secs = sectors(engine);
  std::uniform_int_distribution<int> mode(0, engine.modes() - 1), sec(0, static_cast<int>(secs.size()) - 1),
      dag(0, 1);
  double even = 0.0, odd = 0.0;
  for (int len = 1; len <= max_len; ++len) {
    for (int k = 0; k < strings_per_length; ++k) {
      OpString s(len);
      for (auto& e : s) e = Elementary{mode(rng), secs[sec(rng)], dag(rng) == 1};
      cplx direct = string_expectation(engine, psi, s);
      if (len % 2)
        odd = std::max(odd, std::abs(direct));
      else
        even = std::max(even, std::abs(direct - wick_pairing_sum(engine, psi, s)));
      ++c.instances;
    }
  }
  c.residual = std::max(even, odd);
  c.params["max_len"] = max_len;
  c.params["even_residual"] = even;
  c.params["odd_residual"] = odd;
  return c;
}

IdentityCheck check_dgamma_bound(int M, int instances, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "dgamma_trace_norm_bound";
  c.tolerance = 1.0;
  c.modes = M;
  FockEngine e = FockEngine::doubled(M);
  std::uniform_int_distribution<int> rank(1, M);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  double worst = 0.0, dgamma_worst = 0.0, pm_worst = 0.0;
  for (int k = 0; k < instances; ++k) {
    const int r = rank(rng);
    Mat J = scale(rng) * random_matrix(M, r, rng) * random_matrix(r, M, rng) / double(M);
    const double tr = opcore::trace_norm(J);
    const std::array<Mat, 6> ops = {
        e.dGamma(J, Sector::Left).dense(),           e.dGamma(J, Sector::Right).dense(),
        e.dGamma_plus(J, Sector::Left).dense(),      e.dGamma_minus(J, Sector::Left).dense(),
        e.dGamma_plus(J, Sector::Left, Sector::Right).dense(), e.dGamma_minus(J, Sector::Right, Sector::Left).dense()};
    for (std::size_t q = 0; q < ops.size(); ++q) {
      double ratio = opcore::op_norm(ops[q]) / (2.0 * tr);
      worst = std::max(worst, ratio);
      (q < 2 ? dgamma_worst : pm_worst) = std::max(q < 2 ? dgamma_worst : pm_worst, ratio);
    }
    ++c.instances;
  }
  c.residual = worst;
  c.params["dgamma_max_ratio"] = dgamma_worst;
  c.params["dgamma_pm_max_ratio"] = pm_worst;
  return c;
}

IdentityCheck check_bogoliubov_dgamma(int M, int instances, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "bogoliubov_dgamma";
  c.tolerance = 1e-10;
  c.modes = M;
  FockEngine e = FockEngine::doubled(M);
  const Index D = e.dim();
  double worst = 0.0, literal_sym = 0.0, literal_gen = 0.0;
  for (int k = 0; k < instances; ++k) {
    Mat omega = random_density(M, rng);
    ArakiWyss aw(e, omega);
    Mat R = aw.dense();
    const Mat& u = aw.u();
    const Mat& v = aw.v();
    Mat vb = v.conjugate();
    auto rhs = [&](const Mat& O, bool literal) {
      Mat right = literal ? Mat(vb * O * vb.adjoint()) : Mat(vb * O.transpose() * vb.adjoint());
      Mat out = (O * v.adjoint() * v).trace() * Mat::Identity(D, D);
      out += e.dGamma(u * O * u.adjoint(), Sector::Left).dense();
      out -= e.dGamma(right, Sector::Right).dense();
      out -= e.dGamma_plus(u * O * v.adjoint(), Sector::Left, Sector::Right).dense();
      out -= e.dGamma_minus(v * O * u.adjoint(), Sector::Right, Sector::Left).dense();
      return out;
    };
    Mat O = random_matrix(M, M, rng);
    Mat lhs = R.adjoint() * e.dGamma(O, Sector::Left).dense() * R;
    worst = std::max(worst, max_abs(lhs - rhs(O, false)));
    literal_gen = std::max(literal_gen, max_abs(lhs - rhs(O, true)));
    Mat Os = 0.5 * (O + O.transpose());
    Mat lhs_s = R.adjoint() * e.dGamma(Os, Sector::Left).dense() * R;
    literal_sym = std::max(literal_sym, max_abs(lhs_s - rhs(Os, true)));
    worst = std::max(worst, max_abs(lhs_s - rhs(Os, false)));
    ++c.instances;
  }
  c.residual = worst;
  c.params["right_sector_uses_transpose"] = true;
  c.params["untransposed_residual_symmetric_O"] = literal_sym;
  c.params["untransposed_residual_general_O"] = literal_gen;
  return c;
}

IdentityCheck check_convolution_commutators(int M, int instances, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "convolution_commutators";
  c.tolerance = 1e-10;
  c.modes = M;
  FockEngine e = FockEngine::doubled(M);
  const Sector S[2] = {Sector::Left, Sector::Right};
  double worst_I = 0.0, worst_dec = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    RVec v1 = even_ring_vector(M, rng), v2 = even_ring_vector(M, rng);
    RMat V = ring_circulant(v1) * ring_circulant(v2);
    Mat J = random_matrix(M, M, rng), A = random_matrix(M, M, rng), B = random_matrix(M, M, rng),
        C = random_matrix(M, M, rng), Dm = random_matrix(M, M, rng);
    for (Sector rho : S)
      for (Sector s : S)
        for (Sector sp : S) {
          FockOperator dJ = e.dGamma(J, rho);
          std::vector<FockOperator> cA, cB, aC, aD;
          for (int x = 0; x < M; ++x) {
            cA.push_back(e.creation(A.col(x), s));
            cB.push_back(e.creation(B.col(x), sp));
            aC.push_back(e.annihilation(C.col(x), sp));
            aD.push_back(e.annihilation(Dm.col(x), s));
          }
          // Form I: V(x, y) a*_s(A_x) a*_s'(B_y) a_s'(C_y) a_s(D_x)
          {
            SpMat Q(e.dim(), e.dim());
            for (int x = 0; x < M; ++x)
              for (int y = 0; y < M; ++y)
                if (V(x, y) != 0.0) Q += V(x, y) * (cA[x] * cB[y] * aC[y] * aD[x]).mat;
            SpMat lhs = commutator(dJ, FockOperator{Q, Tag::Quartic, 0}).mat;
            SpMat rhs(e.dim(), e.dim());
            for (int z = 0; z < M; ++z) {
              Mat V2z = ring_diag(v2, z);
              if (rho == s) {
                FockOperator inner = e.dGamma(opcore::commutator(J, A * V2z * Dm.adjoint()), s);
                for (int y = 0; y < M; ++y)
                  rhs += v1[((y - z) % M + M) % M] * (cB[y] * inner * aC[y]).mat;
              }
              if (rho == sp) {
                FockOperator inner = e.dGamma(opcore::commutator(J, B * V2z * C.adjoint()), sp);
                for (int x = 0; x < M; ++x)
                  rhs += v1[((x - z) % M + M) % M] * (cA[x] * inner * aD[x]).mat;
              }
            }
            worst_I = std::max(worst_I, max_abs(SpMat(lhs - rhs)));
          }
          // Decomposed form: V(x, y) a*_s(A_x) a*_s'(B_x) a_s'(C_y) a_s(D_y)
          {
            std::vector<FockOperator> cBs;
            for (int x = 0; x < M; ++x) cBs.push_back(e.creation(B.col(x), sp));
            SpMat Q(e.dim(), e.dim());
            for (int x = 0; x < M; ++x)
              for (int y = 0; y < M; ++y)
                if (V(x, y) != 0.0) Q += V(x, y) * (cA[x] * cBs[x] * aC[y] * aD[y]).mat;
            SpMat lhs = commutator(dJ, FockOperator{Q, Tag::Quartic, 0}).mat;
            SpMat rhs(e.dim(), e.dim());
            for (int z = 0; z < M; ++z) {
              Mat V1d = ring_diag(v1, z), V2z = ring_diag(v2, z);
              Mat left = A * V1d * B.transpose();
              Mat right = C.conjugate() * V2z * Dm.adjoint();
              Mat P1 = Mat::Zero(M, M), P2 = Mat::Zero(M, M);
              if (rho == s) {
                P1 += J * left;
                P2 += right * J;
              }
              if (rho == sp) {
                P1 += left * J.transpose();
                P2 += J.transpose() * right;
              }
              rhs += (e.dGamma_plus(P1, s, sp) * e.dGamma_minus(right, sp, s)).mat;
              rhs -= (e.dGamma_plus(left, s, sp) * e.dGamma_minus(P2, sp, s)).mat;
            }
            worst_dec = std::max(worst_dec, max_abs(SpMat(lhs - rhs)));
          }
        }
    ++c.instances;
  }
  c.residual = std::max(worst_I, worst_dec);
  c.params["form_I_residual"] = worst_I;
  c.params["decomposed_residual"] = worst_dec;
  c.params["sector_triples"] = 8;
  return c;
}

IdentityCheck check_dgamma_commutators(int M, int instances, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "dgamma_commutators";
  c.tolerance = 1e-10;
  c.modes = M;
  FockEngine e = FockEngine::doubled(M);
  const Sector S[2] = {Sector::Left, Sector::Right};
  double w[4] = {0, 0, 0, 0};
  double literal = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    for (Sector sb : S)
      for (Sector s : S)
        for (Sector sp : S) {
          Mat A = random_matrix(M, M, rng), B = random_matrix(M, M, rng);
          FockOperator dA = e.dGamma(A, sb);
          {
            SpMat lhs = commutator(dA, e.dGamma(B, s)).mat;
            SpMat rhs = sb == s ? e.dGamma(opcore::commutator(A, B), s).mat : SpMat(e.dim(), e.dim());
            w[0] = std::max(w[0], max_abs(SpMat(lhs - rhs)));
          }
          {
            Mat P = Mat::Zero(M, M);
            if (sb == s) P += A * B;
            if (sb == sp) P += B * A.transpose();
            SpMat lhs = commutator(dA, e.dGamma_plus(B, s, sp)).mat;
            w[1] = std::max(w[1], max_abs(SpMat(lhs - e.dGamma_plus(P, s, sp).mat)));
          }
          {
            Mat P = Mat::Zero(M, M);
            if (sb == s) P += A.transpose() * B;
            if (sb == sp) P += B * A;
            SpMat lhs = commutator(dA, e.dGamma_minus(B, s, sp)).mat;
            w[2] = std::max(w[2], max_abs(SpMat(lhs + e.dGamma_minus(P, s, sp).mat)));
          }
        }
    for (Sector s : S) {
      Mat A = random_matrix(M, M, rng);
      Vec f = random_vector(M, rng);
      FockOperator cf = e.creation(f, s), af = e.annihilation(f, s);
      SpMat l1 = commutator(e.dGamma(A, s), cf).mat - e.creation(A * f, s).mat;
      SpMat l2 = commutator(e.dGamma(A, s), af).mat + e.annihilation(A.adjoint() * f, s).mat;
      SpMat comm = commutator(e.dGamma_minus(A, s), cf).mat;
      SpMat l3 = comm - e.annihilation(((A - A.transpose()) * f).conjugate(), s).mat;
      SpMat lit = comm + e.annihilation(A * f.conjugate(), s).mat;
      w[3] = std::max({w[3], max_abs(l1), max_abs(l2), max_abs(l3)});
      literal = std::max(literal, max_abs(lit));
    }
    ++c.instances;
  }
  c.residual = std::max({w[0], w[1], w[2], w[3]});
  c.params["dgamma_dgamma"] = w[0];
  c.params["dgamma_dgamma_plus"] = w[1];
  c.params["dgamma_dgamma_minus"] = w[2];
  c.params["single_operator_lines"] = w[3];
  c.params["dgamma_minus_creation_unsymmetrized_residual"] = literal;
  return c;
}

IdentityCheck check_araki_wyss_rules(int M, int instances, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "araki_wyss_rules";
  c.tolerance = 1e-10;
  c.modes = M;
  FockEngine e = FockEngine::doubled(M);
  double worst = 0.0, gamma_err = 0.0, pair_err = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    Mat omega = random_density(M, rng, inst == 0 ? 0.0 : 0.05, inst == 0 ? 1.0 : 0.95);
    ArakiWyss aw(e, omega);
    const Mat &u = aw.u(), &v = aw.v();
    std::vector<Vec> xs;
    for (int k = 0; k < 3; ++k) {
      Vec x = random_vector(e.dim(), rng);
      xs.push_back(x / x.norm());
    }
    for (const Vec& x : xs) {
      Vec Rx = aw.apply(x);
      for (int q = 0; q < M; ++q) {
        Vec lhs_l = aw.apply_adjoint(e.mode_annihilation(q, Sector::Left) * Rx);
        Vec rhs_l = e.annihilation(u.col(q), Sector::Left).apply(x) -
                    e.creation(v.col(q).conjugate(), Sector::Right).apply(x);
        Vec lhs_r = aw.apply_adjoint(e.mode_annihilation(q, Sector::Right) * Rx);
        Vec rhs_r = e.annihilation(u.col(q).conjugate(), Sector::Right).apply(x) +
                    e.creation(v.col(q), Sector::Left).apply(x);
        worst = std::max({worst, (lhs_l - rhs_l).norm(), (lhs_r - rhs_r).norm()});
      }
    }
    Vec psi = aw.state();
    gamma_err = std::max(gamma_err, max_abs(Mat(reduced_density(e, psi) - aw.omega())));
    pair_err = std::max(pair_err, max_abs(pairing_density(e, psi)));
    ++c.instances;
  }
  c.residual = std::max({worst, gamma_err, pair_err});
  c.params["conjugation_residual"] = worst;
  c.params["one_particle_density_residual"] = gamma_err;
  c.params["pairing_residual"] = pair_err;
  return c;
}

IdentityCheck check_slater_rules(int M, int instances, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "slater_rules";
  c.tolerance = 1e-10;
  c.modes = M;
  FockEngine e = FockEngine::single(M);
  std::uniform_int_distribution<int> rank(0, M);
  double worst = 0.0, literal_real = 0.0, literal_complex = 0.0, state_err = 0.0, gamma_err = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    for (bool real : {false, true}) {
      Mat omega = random_projection(M, rank(rng), rng, real);
      SlaterTransform st = slater_bogoliubov(e, omega);
      std::vector<Vec> fs;
      for (int k = 0; k < M; ++k) fs.push_back(Vec::Unit(M, k));
      fs.push_back(random_vector(M, rng));
      for (const Vec& f : fs) {
        SpMat lhs = st.R.adjoint().mat * e.annihilation(f).mat * st.R.mat;
        SpMat rhs = e.annihilation(st.u * f).mat + e.creation(st.v.conjugate() * f.conjugate()).mat;
        SpMat lit = e.annihilation(st.u * f).mat + e.creation(st.v * f.conjugate()).mat;
        worst = std::max(worst, max_abs(SpMat(lhs - rhs)));
        (real ? literal_real : literal_complex) =
            std::max(real ? literal_real : literal_complex, max_abs(SpMat(lhs - lit)));
      }
      Vec target = e.vacuum();
      for (Index j = st.orbitals.cols() - 1; j >= 0; --j) target = e.creation(st.orbitals.col(j)).apply(target);
      state_err = std::max(state_err, (st.state - target).norm());
      gamma_err = std::max(gamma_err, max_abs(Mat(reduced_density(e, st.state) - omega)));
    }
    ++c.instances;
  }
  c.residual = std::max({worst, literal_real, state_err, gamma_err});
  c.params["conjugation_residual"] = worst;
  c.params["unconjugated_form_real_orbitals"] = literal_real;
  c.params["unconjugated_form_complex_orbitals"] = literal_complex;
  c.params["state_residual"] = state_err;
  c.params["one_particle_density_residual"] = gamma_err;
  return c;
}

IdentityCheck check_exponential_law(int M, int instances, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "exponential_law";
  c.tolerance = 1e-10;
  c.modes = M;
  FockEngine e1 = FockEngine::single(M), e2 = FockEngine::doubled(M);
  const Index d1 = e1.dim();
  double embed = 0.0;
  for (int k = 0; k < M; ++k) {
    Mat a1 = Mat(e1.mode_annihilation(k));
    Mat kron = Mat::Zero(d1 * d1, d1 * d1);
    for (Index r = 0; r < d1; ++r) kron.block(r * d1, r * d1, d1, d1) = a1;
    embed = std::max(embed, max_abs(Mat(Mat(e2.mode_annihilation(k, Sector::Left)) - kron)));
  }
  double worst = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    Mat omega = random_density(M, rng);
    ArakiWyss aw(e2, omega);
    Vec psi = aw.state();
    Mat K = matrix_function(omega, [](double l) { return std::log((1.0 - l) / l); });
    Mat H = e1.dGamma(K).dense();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.adjoint()));
    RVec w = (-es.eigenvalues().array()).exp();
    Mat rho = es.eigenvectors() * (w / w.sum()).cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    Mat B1 = random_hermitian(M, rng), B2 = random_matrix(M, M, rng), B3 = random_hermitian(M, rng);
    FockOperator O = e1.dGamma(B1) + e1.dGamma_plus(B2) + e1.dGamma_plus(B2).adjoint() + e1.dGamma(B1) * e1.dGamma(B3);
    Mat Od = O.dense();
    Eigen::Map<const Mat> P(psi.data(), d1, d1);
    cplx doubled = (P.adjoint() * Od * P).trace();
    cplx mixed = (Od * rho).trace();
    worst = std::max(worst, std::abs(doubled - mixed));
    ++c.instances;
  }
  c.residual = std::max(worst, embed);
  c.params["expectation_residual"] = worst;
  c.params["left_embedding_residual"] = embed;
  return c;
}

IdentityCheck check_unitarity(int M, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "unitarity";
  c.tolerance = 1e-10;
  c.modes = M;
  FockEngine e1 = FockEngine::single(M);
  SlaterTransform st = slater_bogoliubov(e1, random_projection(M, M / 2, rng));
  Mat R = st.R.dense();
  double slater = max_abs(Mat(R.adjoint() * R - Mat::Identity(R.rows(), R.cols())));
  const int Md = std::min(M, 4);
  FockEngine e2 = FockEngine::doubled(Md);
  ArakiWyss aw(e2, random_density(Md, rng));
  Mat A = aw.dense();
  double araki = max_abs(Mat(A.adjoint() * A - Mat::Identity(A.rows(), A.cols())));
  double expo = max_abs(Mat(A - aw.dense_exponential()));
  FockOperator L = liouvillian(e2, random_hermitian(Md, rng), ring_interaction(Md), 0.3);
  Vec x = random_vector(e2.dim(), rng);
  x /= x.norm();
  double prop = std::abs(evolve_exact(L, x, 1.3, 1.0).norm() - 1.0);
  c.residual = std::max({slater, araki, expo, prop});
  c.instances = 4;
  c.params["slater"] = slater;
  c.params["araki_wyss"] = araki;
  c.params["araki_wyss_vs_exponential"] = expo;
  c.params["propagator_norm"] = prop;
  return c;
}

IdentityCheck check_parity(int M, std::mt19937_64& rng) {
  IdentityCheck c;
  c.name = "parity";
  c.tolerance = 1e-12;
  c.modes = M;
  FockEngine e1 = FockEngine::single(M), e2 = FockEngine::doubled(M);
  double worst = 0.0;
  for (int N = 0; N <= M; ++N) {
    SlaterTransform st = slater_bogoliubov(e1, random_projection(M, N, rng));
    Vec p = e1.parity().apply(st.state);
    worst = std::max(worst, (p - (N % 2 ? -1.0 : 1.0) * st.state).norm());
  }
  Vec psi = ArakiWyss(e2, random_density(M, rng)).state();
  worst = std::max(worst, (e2.parity().apply(psi) - psi).norm());
  std::uniform_int_distribution<int> mode(0, M - 1), sec(0, 1), dag(0, 1);
  for (int k = 0; k < 60; ++k) {
    OpString s(1 + 2 * (k % 3));
    for (auto& el : s) el = Elementary{mode(rng), sec(rng) ? Sector::Right : Sector::Left, dag(rng) == 1};
    worst = std::max(worst, std::abs(string_expectation(e2, psi, s)));
  }
  c.residual = worst;
  c.instances = M + 62;
  return c;
}

Mat fluctuation_generator(const FockEngine& e, const Mat& H0, const RMat& V, double g, const Mat& omega) {
  if (!e.is_doubled()) throw InvalidParameter("fluctuation_generator: needs a doubled engine");
  const int M = e.modes();
  Mat om = 0.5 * (omega + omega.adjoint());
  Mat u = matrix_function(om, [](double l) { return std::sqrt(std::clamp(1.0 - l, 0.0, 1.0)); });
  Mat v = matrix_function(om, [](double l) { return std::sqrt(std::clamp(l, 0.0, 1.0)); });
  Mat ub = u.conjugate(), vb = v.conjugate();
  RVec rho = om.diagonal().real();
  Mat hH = H0;
  hH.diagonal() += (g * (V * rho)).cast<cplx>();
  SpMat G = e.dGamma(hH, Sector::Left).mat - e.dGamma(hH.conjugate(), Sector::Right).mat;
  if (g == 0.0) return Mat(G);

  const Sector l = Sector::Left, r = Sector::Right;
  struct Factor {
    Sector s;
    bool dag;
    const Mat* m;
    int which;  // 0: column x, 1: column y
  };
  auto term = [&](std::initializer_list<Factor> fs, int x, int y) {
    SpMat out = e.identity().mat;
    for (const auto& f : fs) {
      Vec vec = f.m->col(f.which == 0 ? x : y);
      out = out * (f.dag ? e.creation(vec, f.s).mat : e.annihilation(vec, f.s).mat);
    }
    return out;
  };
  constexpr int X = 0, Y = 1;
  for (int x = 0; x < M; ++x)
    for (int y = 0; y < M; ++y) {
      const double W = V(x, y);
      if (W == 0.0) continue;
      const cplx pre = 0.5 * g * W;
      SpMat C(e.dim(), e.dim());
      C += 1.0 * term({{l, true, &u, X}, {l, true, &u, Y}, {l, false, &u, Y}, {l, false, &u, X}}, x, y);
      C += 2.0 * term({{l, true, &u, X}, {r, true, &vb, X}, {r, false, &vb, Y}, {l, false, &u, Y}}, x, y);
      C += -2.0 * term({{l, true, &u, X}, {r, true, &vb, Y}, {r, false, &vb, Y}, {l, false, &u, X}}, x, y);
      C += 1.0 * term({{r, true, &vb, Y}, {r, true, &vb, X}, {r, false, &vb, X}, {r, false, &vb, Y}}, x, y);
      C += -1.0 * term({{r, true, &ub, X}, {r, true, &ub, Y}, {r, false, &ub, Y}, {r, false, &ub, X}}, x, y);
      C += -2.0 * term({{r, true, &ub, X}, {l, true, &v, X}, {l, false, &v, Y}, {r, false, &ub, Y}}, x, y);
      C += 2.0 * term({{r, true, &ub, X}, {l, true, &v, Y}, {l, false, &v, Y}, {r, false, &ub, X}}, x, y);
      C += -1.0 * term({{l, true, &v, Y}, {l, true, &v, X}, {l, false, &v, X}, {l, false, &v, Y}}, x, y);
      C += 2.0 * om(y, x) * term({{r, true, &ub, X}, {r, false, &ub, Y}}, x, y);
      C += -2.0 * om(y, x) * term({{l, true, &v, Y}, {l, false, &v, X}}, x, y);
      C += 2.0 * om(x, y) * term({{r, true, &vb, Y}, {r, false, &vb, X}}, x, y);
      C += -2.0 * om(x, y) * term({{l, true, &u, X}, {l, false, &u, Y}}, x, y);
      SpMat Q(e.dim(), e.dim());
      Q += 1.0 * term({{l, true, &u, X}, {l, true, &u, Y}, {r, true, &vb, Y}, {r, true, &vb, X}}, x, y);
      Q += 2.0 * term({{l, true, &u, X}, {l, true, &u, Y}, {r, true, &vb, X}, {l, false, &u, Y}}, x, y);
      Q += -2.0 * term({{l, true, &u, X}, {r, true, &vb, Y}, {r, true, &vb, X}, {r, false, &vb, Y}}, x, y);
      Q += -1.0 * term({{r, true, &ub, X}, {r, true, &ub, Y}, {l, true, &v, Y}, {l, true, &v, X}}, x, y);
      Q += 2.0 * term({{r, true, &ub, X}, {r, true, &ub, Y}, {l, true, &v, X}, {r, false, &ub, Y}}, x, y);
      Q += -2.0 * term({{r, true, &ub, X}, {l, true, &v, Y}, {l, true, &v, X}, {l, false, &v, Y}}, x, y);
      Q += 2.0 * om(x, y) * term({{l, true, &u, X}, {r, true, &vb, Y}}, x, y);
      Q += 2.0 * om(y, x) * term({{r, true, &ub, X}, {l, true, &v, Y}}, x, y);
      G += pre * C;
      G += pre * Q;
      G += std::conj(pre) * SpMat(Q.adjoint());
    }
  return Mat(G);
}

Mat fluctuation_generator_reference(const FockEngine& e, const Mat& H0, const RMat& V, double g, const Mat& omega) {
  RVec rho = omega.diagonal().real();
  Mat hH = H0;
  hH.diagonal() += (g * (V * rho)).cast<cplx>();
  Mat D = e.dGamma(hH, Sector::Left).dense() - e.dGamma(hH.conjugate(), Sector::Right).dense();
  Mat L = liouvillian(e, H0, V, g).dense();
  Mat R = ArakiWyss(e, omega).dense();
  return D + R.adjoint() * (L - D) * R;
}

GeneratorCheck fluctuation_generator_check(int M, double g, const std::vector<double>& dts, int vectors,
                                           std::mt19937_64& rng) {
  if (M > 4) throw InvalidParameter("fluctuation_generator_check: at most 4 modes");
  if (dts.size() < 2) throw InvalidParameter("fluctuation_generator_check: need at least two time steps");
  FockEngine e = FockEngine::doubled(M);
  Mat H0 = ring_hopping(M) + random_hermitian(M, rng) * 0.3;
  RMat V = ring_interaction(M);
  Mat omega0 = random_density(M, rng, 0.1, 0.9);

  GeneratorCheck out;
  Mat G = fluctuation_generator(e, H0, V, g, omega0);
  out.reference_residual = max_abs(Mat(G - fluctuation_generator_reference(e, H0, V, g, omega0)));

  Mat L = liouvillian(e, H0, V, g).dense();
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (L + L.adjoint()));
  hartree::HartreeSystem sys{opcore::HermitianOperator(H0), std::make_shared<hartree::KernelInteraction>(V), 1.0, g};
  hartree::EvolveOptions eo;
  eo.snapshot_every = 1 << 20;
  eo.step.tolerance = 1e-13;
  eo.step.max_iterations = 60;
  Mat R0 = ArakiWyss(e, omega0).dense();

  std::vector<Vec> xis;
  for (int k = 0; k < vectors; ++k) {
    Vec x = random_vector(e.dim(), rng);
    xis.push_back(x / x.norm());
  }
  for (double dt : dts) {
    auto traj = hartree::evolve(sys, omega0, dt, dt / 64.0, eo);
    if (traj.aborted) throw StepError("fluctuation_generator_check: " + traj.error, traj.error_residual);
    Mat R1 = ArakiWyss(e, traj.states.back()).dense();
    Vec ph(es.eigenvalues().size());
    for (Index j = 0; j < ph.size(); ++j) ph[j] = std::polar(1.0, -es.eigenvalues()[j] * dt);
    Mat U = R1.adjoint() * es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint() * R0;
    double worst = 0.0;
    for (const Vec& xi : xis) {
      Vec fd = cplx(0.0, 1.0) * (U * xi - xi) / dt;
      worst = std::max(worst, (G * xi - fd).norm());
    }
    out.dt.push_back(dt);
    out.residual.push_back(worst);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(dts.size());
  for (std::size_t k = 0; k < dts.size(); ++k) {
    double lx = std::log(out.dt[k]), ly = std::log(out.residual[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

ManyBodyComparison manybody_vs_hartree(const ManyBodySetup& su, double g) {
  const int M = static_cast<int>(su.H0.rows());
  const bool slater = su.kind == InitialState::Slater;
  FockEngine e = slater ? FockEngine::single(M) : FockEngine::doubled(M);
  Vec psi = slater ? slater_bogoliubov(e, su.omega0).state : ArakiWyss(e, su.omega0).state();
  FockOperator G = slater ? build_hamiltonian_fock(e, su.H0, su.V, g) : liouvillian(e, su.H0, su.V, g);

  hartree::HartreeSystem sys{opcore::HermitianOperator(su.H0), std::make_shared<hartree::KernelInteraction>(su.V),
                             su.eps, g};
  hartree::EvolveOptions eo;
  eo.snapshot_every = su.snapshot_every;
  eo.step.tolerance = 1e-12;
  eo.step.max_iterations = 60;
  auto traj = hartree::evolve(sys, su.omega0, su.T, su.dt, eo);
  if (traj.aborted) throw StepError("manybody_vs_hartree: " + traj.error, traj.error_residual);

  ManyBodyComparison out;
  double t_prev = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double t = traj.times[k];
    if (t != t_prev) psi = evolve_exact(G, psi, t - t_prev, su.eps);
    t_prev = t;
    Mat gamma = reduced_density(e, psi, Sector::Left);
    const Mat& w = traj.states[k];
    out.t.push_back(t);
    out.discrepancy.push_back(std::abs((su.observable * (gamma - w)).trace()));
    out.normalization.push_back(std::abs((su.observable * w).trace()));
    out.hs_distance.push_back((gamma - w).norm());
  }
  return out;
}

Mat ring_hopping(int M, double hop) {
  Mat H = Mat::Zero(M, M);
  if (M == 1) return H;
  for (int x = 0; x < M; ++x) {
    int y = (x + 1) % M;
    if (y == x) continue;
    H(x, y) -= hop;
    H(y, x) -= hop;
  }
  if (M == 2) H /= 2.0;
  return H;
}

RMat ring_interaction(int M, double range) {
  RMat V = RMat::Zero(M, M);
  for (int x = 0; x < M; ++x)
    for (int y = 0; y < M; ++y) {
      if (x == y) continue;
      int d = std::abs(x - y);
      d = std::min(d, M - d);
      V(x, y) = std::exp(-0.5 * d * d / (range * range));
    }
  return V;
}

std::vector<IdentityCheck> run_verification(const VerifyOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<IdentityCheck> out;
  out.push_back(check_car(FockEngine::single(opt.car_modes), rng));
  out.push_back(check_car(FockEngine::doubled(opt.car_modes / 2), rng));
  {
    FockEngine e = FockEngine::single(opt.wick_modes);
    Vec psi = slater_bogoliubov(e, random_projection(opt.wick_modes, opt.wick_modes / 2, rng)).state;
    out.push_back(check_wick(e, psi, "slater", rng));
  }
  {
    FockEngine e = FockEngine::doubled(opt.wick_modes);
    Vec psi = ArakiWyss(e, random_density(opt.wick_modes, rng)).state();
    out.push_back(check_wick(e, psi, "araki_wyss", rng));
  }
  out.push_back(check_dgamma_bound(3, opt.bound_instances, rng));
  out.push_back(check_bogoliubov_dgamma(opt.lemma32_modes, 5, rng));
  out.push_back(check_convolution_commutators(opt.lemma_modes, opt.lemma_instances, rng));
  out.push_back(check_dgamma_commutators(opt.lemma_modes, opt.lemma_instances, rng));
  out.push_back(check_araki_wyss_rules(opt.wick_modes, 3, rng));
  out.push_back(check_slater_rules(opt.wick_modes, 4, rng));
  {
    IdentityCheck c;
    c.name = "fluctuation_generator";
    c.tolerance = 1e-10;
    c.modes = opt.generator_modes;
    const int M = opt.generator_modes;
    FockEngine e = FockEngine::doubled(M);
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      Mat H0 = random_hermitian(M, rng);
      RMat V = ring_interaction(M) + RMat::Identity(M, M) * 0.5;
      Mat omega = random_density(M, rng);
      worst = std::max(worst, max_abs(Mat(fluctuation_generator(e, H0, V, 0.7, omega) -
                                          fluctuation_generator_reference(e, H0, V, 0.7, omega))));
      ++c.instances;
    }
    c.residual = worst;
    c.params["coupling"] = 0.7;
    out.push_back(c);
  }
  out.push_back(check_exponential_law(std::min(opt.lemma_modes, 4), 4, rng));
  out.push_back(check_unitarity(opt.wick_modes, rng));
  out.push_back(check_parity(std::min(opt.wick_modes, 4), rng));
  return out;
}

nlohmann::json verification_report(const std::vector<IdentityCheck>& checks) {
  nlohmann::json j;
  j["checks"] = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    j["checks"].push_back(c.to_json());
    all = all && c.passed();
  }
  j["all_passed"] = all;
  return j;
}

}  // namespace relhartree::fock

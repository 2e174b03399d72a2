#include "relhartree/harness.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "relhartree/error.hpp"
#include "relhartree/hartree.hpp"

namespace relhartree::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
// Probe values below this fraction of tr W omega are treated as numerically zero.
constexpr double kRoundoffFraction = 1e-9;

// ---------------- config parsing ----------------

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

[[noreturn]] void bad(const std::string& field, const YAML::Node& n, const std::string& what) {
  throw ConfigError(field + ": " + what, field, line_of(n));
}

template <class T>
T scalar(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) bad(field, n, "expected a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    bad(field, n, "cannot parse '" + n.Scalar() + "'");
  }
}

template <class T>
std::vector<T> list(const YAML::Node& n, const std::string& field) {
  std::vector<T> out;
  if (n.IsScalar()) {
    out.push_back(scalar<T>(n, field));
    return out;
  }
  if (!n.IsSequence()) bad(field, n, "expected a list");
  for (const auto& e : n) out.push_back(scalar<T>(e, field));
  return out;
}

// A list of points; in d = 1 a bare number is a point.
std::vector<std::vector<double>> point_list(const YAML::Node& n, const std::string& field) {
  std::vector<std::vector<double>> out;
  if (n.IsScalar()) {
    out.push_back({scalar<double>(n, field)});
    return out;
  }
  if (!n.IsSequence()) bad(field, n, "expected a list of points");
  for (const auto& e : n) {
    if (e.IsScalar())
      out.push_back({scalar<double>(e, field)});
    else
      out.push_back(list<double>(e, field));
  }
  return out;
}

using KeyHandler = std::function<void(const YAML::Node&, const std::string&)>;

void section(const YAML::Node& node, const std::string& name, const std::map<std::string, KeyHandler>& keys) {
  if (node.IsNull()) return;
  if (!node.IsMap()) bad(name, node, "section must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string field = name + "." + key;
    auto it = keys.find(key);
    if (it == keys.end()) bad(field, kv.first, "unknown key");
    it->second(kv.second, field);
  }
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool in_box(double x, double L) { return x >= 0.0 && x <= L; }

// ---------------- output helpers ----------------

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json fit_json(const semiclassics::ScalingFit& f) {
  json j;
  j["quantity"] = f.quantity;
  j["eps"] = f.eps;
  j["values"] = f.values;
  j["exponent"] = f.exponent;
  j["intercept"] = f.intercept;
  j["residual"] = f.residual;
  j["expected"] = finite_or_null(f.expected);
  j["margin"] = f.margin;
  j["span_ok"] = f.span_ok;
  j["within"] = std::isfinite(f.expected) ? json(f.within()) : json(nullptr);
  return j;
}

std::string fits_csv(const std::string& header, const std::vector<semiclassics::ScalingFit>& fits) {
  std::ostringstream os;
  os << header << "\n" << "quantity,exponent,expected,margin,within,residual,span_ok\n";
  for (const auto& f : fits)
    os << f.quantity << "," << fmt(f.exponent) << "," << fmt(f.expected) << "," << fmt(f.margin) << ","
       << (std::isfinite(f.expected) ? (f.within() ? "true" : "false") : "") << "," << fmt(f.residual) << ","
       << (f.span_ok ? "true" : "false") << "\n";
  return os.str();
}

std::string records_csv(const std::string& header, const std::vector<EpsRecord>& records) {
  std::ostringstream os;
  os << header << "\n"
     << "eps,beta,mu,resolved,particle_number,density_trace,weyl_trace,projection_distance,tr2hs_ratio,"
        "weyl_remainder\n";
  for (const auto& r : records)
    os << fmt(r.eps) << "," << fmt(r.beta) << "," << fmt(r.mu) << "," << (r.resolved ? "true" : "false") << ","
       << fmt(r.particle_number) << "," << fmt(r.density_trace) << "," << fmt(r.weyl_trace) << ","
       << fmt(r.projection_distance) << "," << fmt(r.tr2hs_ratio) << "," << fmt(r.weyl_remainder) << "\n";
  return os.str();
}

// A Fermi level sitting on an eigenvalue is moved up in steps of 10 tol_gap.
double resolve_mu(const opcore::HermitianOperator& H, double mu) {
  const auto& ev = H.eig().values;
  for (int guard = 0; guard < 100; ++guard) {
    bool hit = false;
    for (Index j = 0; j < ev.size(); ++j)
      if (std::abs(ev[j] - mu) <= equilibrium::kTolGap) hit = true;
    if (!hit) break;
    mu += 10 * equilibrium::kTolGap;
  }
  return mu;
}

std::string eps_tag(std::size_t i) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

// ---------------- ExperimentConfig ----------------

space::SpaceSpec ExperimentConfig::space_spec() const { return space::SpaceSpec(space.dim, space.length, space.points); }

space::EpsilonScaling ExperimentConfig::scaling_for(double eps) const {
  return space::EpsilonScaling(eps, scaling.b, space.dim);
}

equilibrium::ExternalPotential ExperimentConfig::external_potential() const {
  using EP = equilibrium::ExternalPotential;
  switch (equilibrium::potential_kind_from_string(potential.kind)) {
    case EP::Kind::Zero: return EP::zero();
    case EP::Kind::Constant: return EP::constant(potential.amplitude);
    case EP::Kind::CosineWells: return EP::cosine_wells(potential.amplitude, potential.wells);
    case EP::Kind::SmoothedQuadratic: return EP::smoothed_quadratic(potential.amplitude, point(potential.center));
  }
  return EP::zero();
}

double ExperimentConfig::beta_for(double eps) const {
  if (equilibrium.beta == "inf") return kInf;
  if (equilibrium.beta == "1/eps") return scaling.b / eps;
  char* end = nullptr;
  double b = std::strtod(equilibrium.beta.c_str(), &end);
  if (end == equilibrium.beta.c_str() || *end != '\0' || !(b > 0))
    throw ConfigError("equilibrium.beta: expected inf, 1/eps or a positive number", "equilibrium.beta");
  return b;
}

double ExperimentConfig::coupling_for(double eps) const {
  return interaction.coupling ? *interaction.coupling : std::pow(eps, space.dim);
}

space::Point ExperimentConfig::point(const std::vector<double>& v) const {
  space::Point p{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < v.size() && i < 3; ++i) p[i] = v[i];
  return p;
}

json ExperimentConfig::canonical() const {
  json j;
  j["space"] = {{"dim", space.dim}, {"points", space.points}, {"length", space.length}};
  j["scaling"] = {{"eps", scaling.eps}, {"b", scaling.b}};
  j["potential"] = {{"kind", potential.kind},
                    {"amplitude", potential.amplitude},
                    {"wells", potential.wells},
                    {"center", potential.center}};
  j["interaction"] = {{"kind", interaction.kind},
                      {"strength", interaction.strength},
                      {"range", interaction.range},
                      {"coupling", interaction.coupling ? json(*interaction.coupling) : json(nullptr)}};
  j["lambda"] = {{"lower", lambda.lower}, {"upper", lambda.upper}};
  j["equilibrium"] = {{"method", equilibrium.method},
                      {"beta", equilibrium.beta},
                      {"mu", equilibrium.mu},
                      {"contour_nodes", equilibrium.contour_nodes},
                      {"weyl_m", equilibrium.weyl_m},
                      {"weight_twice_n", equilibrium.weight_twice_n},
                      {"weyl_nu_count", equilibrium.weyl_nu_count},
                      {"weyl_alpha", equilibrium.weyl_alpha}};
  j["probes"] = {{"z", probes.z},
                 {"zprime", probes.zprime},
                 {"n", probes.n},
                 {"p", probes.p},
                 {"quantities", probes.quantities},
                 {"pi", probes.pi},
                 {"observable_sigma", probes.observable_sigma}};
  j["dynamics"] = {{"T", dynamics.T},
                   {"dt", dynamics.dt},
                   {"snapshot_every", dynamics.snapshot_every},
                   {"coupling_factors", dynamics.coupling_factors}};
  j["fock"] = {{"modes", fock.modes},
               {"generator_modes", fock.generator_modes},
               {"lemma_modes", fock.lemma_modes},
               {"lemma_instances", fock.lemma_instances},
               {"bound_instances", fock.bound_instances}};
  j["sweep"] = {{"probe", sweep.probe}, {"synthetic_exponent", sweep.synthetic_exponent}};
  j["run"] = {{"seed", run.seed}};
  return j;
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical().dump()); }

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("syntax error: ") + e.msg, "", e.mark.line + 1);
  }
  ExperimentConfig c;
  if (root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError("top level must be a mapping of sections", "", line_of(root));

  std::map<std::string, std::function<void(const YAML::Node&)>> sections;
  sections["space"] = [&](const YAML::Node& n) {
    section(n, "space",
            {{"dim", [&](auto& v, auto& f) { c.space.dim = scalar<int>(v, f); }},
             {"points", [&](auto& v, auto& f) { c.space.points = scalar<int>(v, f); }},
             {"length", [&](auto& v, auto& f) { c.space.length = scalar<double>(v, f); }}});
  };
  sections["scaling"] = [&](const YAML::Node& n) {
    section(n, "scaling",
            {{"eps", [&](auto& v, auto& f) { c.scaling.eps = list<double>(v, f); }},
             {"b", [&](auto& v, auto& f) { c.scaling.b = scalar<double>(v, f); }}});
  };
  sections["potential"] = [&](const YAML::Node& n) {
    section(n, "potential",
            {{"kind", [&](auto& v, auto& f) { c.potential.kind = scalar<std::string>(v, f); }},
             {"amplitude", [&](auto& v, auto& f) { c.potential.amplitude = scalar<double>(v, f); }},
             {"wells", [&](auto& v, auto& f) { c.potential.wells = scalar<int>(v, f); }},
             {"center", [&](auto& v, auto& f) { c.potential.center = list<double>(v, f); }}});
  };
  sections["interaction"] = [&](const YAML::Node& n) {
    section(n, "interaction",
            {{"kind", [&](auto& v, auto& f) { c.interaction.kind = scalar<std::string>(v, f); }},
             {"strength", [&](auto& v, auto& f) { c.interaction.strength = scalar<double>(v, f); }},
             {"range", [&](auto& v, auto& f) { c.interaction.range = scalar<double>(v, f); }},
             {"coupling", [&](auto& v, auto& f) {
                if (v.IsScalar() && v.Scalar() == "auto")
                  c.interaction.coupling.reset();
                else
                  c.interaction.coupling = scalar<double>(v, f);
              }}});
  };
  sections["lambda"] = [&](const YAML::Node& n) {
    section(n, "lambda",
            {{"lower", [&](auto& v, auto& f) { c.lambda.lower = list<double>(v, f); }},
             {"upper", [&](auto& v, auto& f) { c.lambda.upper = list<double>(v, f); }}});
  };
  sections["equilibrium"] = [&](const YAML::Node& n) {
    auto& e = c.equilibrium;
    section(n, "equilibrium",
            {{"method", [&](auto& v, auto& f) { e.method = scalar<std::string>(v, f); }},
             {"beta", [&](auto& v, auto& f) { e.beta = scalar<std::string>(v, f); }},
             {"mu", [&](auto& v, auto& f) { e.mu = scalar<double>(v, f); }},
             {"contour_nodes", [&](auto& v, auto& f) { e.contour_nodes = scalar<int>(v, f); }},
             {"weyl_m", [&](auto& v, auto& f) { e.weyl_m = scalar<int>(v, f); }},
             {"weight_twice_n", [&](auto& v, auto& f) { e.weight_twice_n = scalar<int>(v, f); }},
             {"weyl_nu_count", [&](auto& v, auto& f) { e.weyl_nu_count = scalar<int>(v, f); }},
             {"weyl_alpha", [&](auto& v, auto& f) { e.weyl_alpha = scalar<double>(v, f); }}});
  };
  sections["probes"] = [&](const YAML::Node& n) {
    auto& p = c.probes;
    section(n, "probes",
            {{"z", [&](auto& v, auto& f) { p.z = point_list(v, f); }},
             {"zprime", [&](auto& v, auto& f) { p.zprime = point_list(v, f); }},
             {"n", [&](auto& v, auto& f) { p.n = list<int>(v, f); }},
             {"p", [&](auto& v, auto& f) { p.p = list<double>(v, f); }},
             {"quantities", [&](auto& v, auto& f) { p.quantities = list<std::string>(v, f); }},
             {"pi", [&](auto& v, auto& f) { p.pi = list<std::string>(v, f); }},
             {"observable_sigma", [&](auto& v, auto& f) { p.observable_sigma = scalar<double>(v, f); }}});
  };
  sections["dynamics"] = [&](const YAML::Node& n) {
    auto& d = c.dynamics;
    section(n, "dynamics",
            {{"T", [&](auto& v, auto& f) { d.T = scalar<double>(v, f); }},
             {"dt", [&](auto& v, auto& f) { d.dt = scalar<double>(v, f); }},
             {"snapshot_every", [&](auto& v, auto& f) { d.snapshot_every = scalar<int>(v, f); }},
             {"coupling_factors", [&](auto& v, auto& f) { d.coupling_factors = list<double>(v, f); }}});
  };
  sections["fock"] = [&](const YAML::Node& n) {
    auto& k = c.fock;
    section(n, "fock",
            {{"modes", [&](auto& v, auto& f) { k.modes = scalar<int>(v, f); }},
             {"generator_modes", [&](auto& v, auto& f) { k.generator_modes = scalar<int>(v, f); }},
             {"lemma_modes", [&](auto& v, auto& f) { k.lemma_modes = scalar<int>(v, f); }},
             {"lemma_instances", [&](auto& v, auto& f) { k.lemma_instances = scalar<int>(v, f); }},
             {"bound_instances", [&](auto& v, auto& f) { k.bound_instances = scalar<int>(v, f); }}});
  };
  sections["sweep"] = [&](const YAML::Node& n) {
    section(n, "sweep",
            {{"probe", [&](auto& v, auto& f) { c.sweep.probe = scalar<std::string>(v, f); }},
             {"synthetic_exponent", [&](auto& v, auto& f) { c.sweep.synthetic_exponent = scalar<double>(v, f); }}});
  };
  sections["run"] = [&](const YAML::Node& n) {
    section(n, "run",
            {{"seed", [&](auto& v, auto& f) { c.run.seed = scalar<unsigned long>(v, f); }},
             {"workers", [&](auto& v, auto& f) { c.run.workers = scalar<int>(v, f); }},
             {"out", [&](auto& v, auto& f) { c.run.out = scalar<std::string>(v, f); }}});
  };

  for (const auto& kv : root) {
    const std::string name = kv.first.as<std::string>();
    auto it = sections.find(name);
    if (it == sections.end()) bad(name, kv.first, "unknown section");
    it->second(kv.second);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path, "--config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<double> parse_eps_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_tokens(s)) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ConfigError("cannot parse eps value '" + tok + "'", "--eps-override");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& field, const std::string& what) { throw ConfigError(field + ": " + what, field); };
  std::vector<std::string> warnings;
  const int d = c.space.dim;
  const double L = c.space.length;
  if (d < 1 || d > 3) fail("space.dim", "must be 1, 2 or 3");
  if (c.space.points < 4 || c.space.points % 2) fail("space.points", "must be an even number >= 4");
  if (!(L > 0)) fail("space.length", "must be positive");
  if (std::pow(double(c.space.points), d) > 4096) fail("space.points", "grid exceeds 4096 points in total");

  if (c.scaling.eps.empty()) fail("scaling.eps", "list is empty");
  for (double e : c.scaling.eps)
    if (!(e > 0 && e < 1)) fail("scaling.eps", "values must lie in (0, 1)");
  if (std::set<double>(c.scaling.eps.begin(), c.scaling.eps.end()).size() != c.scaling.eps.size())
    fail("scaling.eps", "duplicate values");
  if (!(c.scaling.b > 0)) fail("scaling.b", "must be positive");
  const auto sp = c.space_spec();
  for (double e : c.scaling.eps)
    if (!c.scaling_for(e).resolved(sp))
      warnings.push_back("eps = " + fmt(e) + " is below twice the grid spacing (" + fmt(sp.spacing()) +
                         "); results at this eps are flagged unresolved");

  try {
    equilibrium::potential_kind_from_string(c.potential.kind);
  } catch (const InvalidParameter&) {
    fail("potential.kind", "unknown preset '" + c.potential.kind + "'");
  }
  if (c.potential.kind != "constant" && c.potential.amplitude < 0) fail("potential.amplitude", "must be >= 0");
  if (c.potential.wells < 1) fail("potential.wells", "must be >= 1");
  if (c.potential.center.size() > std::size_t(d)) fail("potential.center", "more coordinates than dimensions");

  if (c.interaction.kind != "none" && c.interaction.kind != "gaussian")
    fail("interaction.kind", "must be none or gaussian");
  if (!(c.interaction.range > 0)) fail("interaction.range", "must be positive");
  if (c.interaction.coupling && !std::isfinite(*c.interaction.coupling)) fail("interaction.coupling", "not finite");

  std::vector<double> lo = c.lambda.lower, hi = c.lambda.upper;
  if (lo.empty() != hi.empty()) fail("lambda", "give both lower and upper, or neither");
  if (lo.empty()) {
    lo.assign(d, 0.0);
    hi.assign(d, L);
  }
  if (int(lo.size()) != d || int(hi.size()) != d) fail("lambda", "corners need one coordinate per dimension");
  for (int a = 0; a < d; ++a)
    if (!(in_box(lo[a], L) && in_box(hi[a], L) && lo[a] < hi[a])) fail("lambda", "sub-box must lie inside [0, L]^d");

  const auto& e = c.equilibrium;
  if (e.method != "projection" && e.method != "eigendecomposition" && e.method != "contour")
    fail("equilibrium.method", "must be projection, eigendecomposition or contour");
  for (double eps : c.scaling.eps) {
    double beta = c.beta_for(eps);
    if (e.method == "contour" && std::isinf(beta)) fail("equilibrium.method", "contour needs finite beta");
    if (e.method == "projection" && std::isfinite(beta)) fail("equilibrium.beta", "projection needs beta = inf");
  }
  if (e.contour_nodes < 8) fail("equilibrium.contour_nodes", "must be >= 8");
  if (e.weyl_m < 1) fail("equilibrium.weyl_m", "must be >= 1");
  if (e.weight_twice_n < 2 || e.weight_twice_n % 2) fail("equilibrium.weight_twice_n", "must be even and >= 2");
  if (e.weyl_m % 2 == 0 && (e.weight_twice_n % 4 || 4 * e.weyl_m > e.weight_twice_n))
    warnings.push_back("tr2hs ratio skipped: needs weight_twice_n divisible by 4 and >= 4 weyl_m");
  if (e.weyl_nu_count < 1) fail("equilibrium.weyl_nu_count", "must be >= 1");
  if (!(e.weyl_alpha > 0 && e.weyl_alpha <= 1)) fail("equilibrium.weyl_alpha", "must lie in (0, 1]");

  const auto& p = c.probes;
  if (p.z.empty()) fail("probes.z", "list is empty");
  for (const auto& z : p.z) {
    if (int(z.size()) != d) fail("probes.z", "points need one coordinate per dimension");
    for (int a = 0; a < d; ++a)
      if (z[a] < lo[a] || z[a] > hi[a]) fail("probes.z", "centres must lie in the declared sub-box");
  }
  for (const auto& z : p.zprime) {
    if (int(z.size()) != d) fail("probes.zprime", "points need one coordinate per dimension");
    for (int a = 0; a < d; ++a)
      if (!in_box(z[a], L)) fail("probes.zprime", "points must lie in the box");
  }
  if (p.zprime.empty()) fail("probes.zprime", "list is empty");
  if (p.n.empty()) fail("probes.n", "list is empty");
  for (int n : p.n)
    if (n < 1) fail("probes.n", "values must be >= 1");
  for (double m : p.p)
    if (!(m > 0)) fail("probes.p", "magnitudes must be positive");
  for (const auto& q : p.quantities) {
    try {
      semiclassics::quantity_from_string(q);
    } catch (const InvalidParameter&) {
      fail("probes.quantities", "unknown quantity '" + q + "'");
    }
  }
  for (const auto& k : p.pi) {
    try {
      opcore::pi_kind_from_string(k);
    } catch (const InvalidParameter&) {
      fail("probes.pi", "unknown pi '" + k + "'");
    }
  }
  if (p.pi.empty()) fail("probes.pi", "list is empty");
  if (!(p.observable_sigma > 0)) fail("probes.observable_sigma", "must be positive");

  const auto& dy = c.dynamics;
  if (!(dy.T >= 0)) fail("dynamics.T", "must be >= 0");
  if (!(dy.dt > 0)) fail("dynamics.dt", "must be positive");
  for (double eps : c.scaling.eps)
    if (dy.dt / eps > hartree::StepOptions{}.max_ratio)
      fail("dynamics.dt", "dt / eps exceeds " + fmt(hartree::StepOptions{}.max_ratio) + " for eps = " + fmt(eps));
  if (dy.snapshot_every < 1) fail("dynamics.snapshot_every", "must be >= 1");
  if (dy.coupling_factors.empty()) fail("dynamics.coupling_factors", "list is empty");

  const auto& f = c.fock;
  if (f.modes < 2 || f.modes > fock::FockEngine::kMaxDoubledModes) fail("fock.modes", "must lie in [2, 6]");
  if (f.generator_modes < 1 || f.generator_modes > fock::FockEngine::kMaxDoubledModes)
    fail("fock.generator_modes", "must lie in [1, 6]");
  if (f.lemma_modes < 2 || f.lemma_modes > fock::FockEngine::kMaxDoubledModes)
    fail("fock.lemma_modes", "must lie in [2, 6]");
  if (f.lemma_instances < 1) fail("fock.lemma_instances", "must be >= 1");
  if (f.bound_instances < 1) fail("fock.bound_instances", "must be >= 1");

  if (c.sweep.probe != "all" && c.sweep.probe != "synthetic") fail("sweep.probe", "must be all or synthetic");
  if (c.run.workers < 1) fail("run.workers", "must be >= 1");
  return warnings;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

void parallel_for_tasks(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(1, workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < w; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// ---------------- OutputSink ----------------

OutputSink::OutputSink(fs::path dir, std::string command, std::string config_hash, unsigned long seed)
    : dir_(std::move(dir)), command_(std::move(command)), hash_(std::move(config_hash)), seed_(seed) {
  fs::create_directories(dir_);
}

std::string OutputSink::csv_header(const std::string& kind) const {
  return "# relhartree-csv v" + std::to_string(kCsvSchemaVersion) + " kind=" + kind + " config=" + hash_;
}

void OutputSink::write(const std::string& rel, const std::string& content) {
  fs::path p = dir_ / rel;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
  if (!out) throw Error("write failed for " + p.string());
  if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
}

void OutputSink::write_json(const std::string& rel, json j) {
  j["config_hash"] = hash_;
  j["artifact_version"] = kArtifactVersion;
  write(rel, j.dump(2) + "\n");
}

bool OutputSink::required_failed() const {
  return std::any_of(tasks_.begin(), tasks_.end(), [](const TaskStatus& t) { return t.required && !t.ok; });
}

void OutputSink::finalize(const std::vector<std::string>& warnings) {
  json m;
  m["artifact_version"] = kArtifactVersion;
  m["csv_schema_version"] = kCsvSchemaVersion;
  m["command"] = command_;
  m["config_hash"] = hash_;
  m["seed"] = seed_;
  // Wall-clock stamps would break byte-identical reruns; SOURCE_DATE_EPOCH pins them when wanted.
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  m["timestamps"] = {{"source_date_epoch", epoch ? json(std::string(epoch)) : json(nullptr)}};
  m["tasks"] = json::array();
  for (const auto& t : tasks_)
    m["tasks"].push_back({{"name", t.name}, {"ok", t.ok}, {"required", t.required}, {"message", t.message}});
  m["warnings"] = warnings;
  std::vector<std::string> files = files_;
  std::sort(files.begin(), files.end());
  m["files"] = json::array();
  for (const auto& rel : files) {
    std::ifstream in(dir_ / rel, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    m["files"].push_back({{"path", rel}, {"bytes", data.size()}, {"sha256", sha256_hex(data)}});
  }
  m["status"] = required_failed() ? "failed" : "ok";
  std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
  out << m.dump(2) << "\n";
}

// ---------------- studies ----------------

std::vector<semiclassics::StructureProbe> configured_probes(const ExperimentConfig& cfg, double eps) {
  using semiclassics::Quantity;
  const auto sp = cfg.space_spec();
  const auto ladder = semiclassics::p_ladder(sp, cfg.probes.p);
  std::vector<semiclassics::StructureProbe> out;
  for (const auto& zv : cfg.probes.z)
    for (const auto& zpv : cfg.probes.zprime)
      for (int n : cfg.probes.n)
        for (const auto& qs : cfg.probes.quantities) {
          const Quantity q = semiclassics::quantity_from_string(qs);
          semiclassics::StructureProbe base;
          base.quantity = q;
          base.n = n;
          base.z = cfg.point(zv);
          base.zp = cfg.point(zpv);
          if (q == Quantity::Density || q == Quantity::Overlap) {
            out.push_back(base);
            continue;
          }
          if (q == Quantity::PhaseCommutator) base.p_list = ladder;
          if (q == Quantity::RegularCommutator)
            base.F = space::gaussian_observable(sp, cfg.probes.observable_sigma, base.z);
          for (const auto& ps : cfg.probes.pi) {
            auto pr = base;
            pr.pi = opcore::pi_kind_from_string(ps);
            out.push_back(pr);
          }
        }
  (void)eps;
  return out;
}

double probe_supremum(const EpsRecord& r, const std::string& quantity, const std::string& pi) {
  double best = -kInf;
  for (const auto& row : r.probe_rows) {
    if (row.quantity != quantity) continue;
    if (row.pi != "-" && row.pi != pi) continue;
    best = std::max(best, row.prefactored);
  }
  return std::isfinite(best) ? best : kNaN;
}

EpsRecord equilibrium_record(const ExperimentConfig& cfg, double eps, bool with_probes) {
  const auto sp = cfg.space_spec();
  const auto scal = cfg.scaling_for(eps);
  auto built = equilibrium::build_hamiltonian(sp, scal, cfg.external_potential());
  EpsRecord r;
  r.eps = eps;
  r.beta = cfg.beta_for(eps);
  r.resolved = built.resolved;
  r.warnings = built.warnings;

  const double mu = resolve_mu(built.op, cfg.equilibrium.mu);
  if (mu != cfg.equilibrium.mu)
    r.warnings.push_back("eps = " + fmt(eps) + ": mu moved to " + fmt(mu) + " off a degenerate level");
  r.mu = mu;

  equilibrium::EquilibriumState st;
  if (std::isinf(r.beta)) {
    st = equilibrium::fermi_projection(built.op, mu);
  } else if (cfg.equilibrium.method == "contour") {
    equilibrium::ContourOptions co;
    co.nodes = cfg.equilibrium.contour_nodes;
    st = equilibrium::fermi_dirac_contour(built.op, mu, r.beta, co);
    if (!st.contour_within_tolerance)
      r.warnings.push_back("eps = " + fmt(eps) + ": contour discrepancy " + fmt(st.contour_discrepancy));
  } else {
    st = equilibrium::fermi_dirac(built.op, mu, r.beta);
  }
  r.particle_number = st.particle_number;

  const space::Weight w{cfg.point(cfg.probes.z.front()), cfg.equilibrium.weight_twice_n};
  const RVec wp = space::weight_profile(sp, w);
  const Mat& om = st.omega.matrix();
  r.density_trace = 0;
  for (Index x = 0; x < om.rows(); ++x) r.density_trace += wp[x] * om(x, x).real();

  const int m = cfg.equilibrium.weyl_m;
  if (std::isfinite(r.beta)) {
    r.weyl_trace = equilibrium::weyl_trace(built.op, mu, r.beta, m, wp);
    r.projection_distance = equilibrium::projection_vs_fermidirac(built.op, mu, r.beta, wp).distance;
    const bool tr2hs_ok = m % 2 == 0 && w.twice_n % 4 == 0 && 4 * m <= w.twice_n;
    r.tr2hs_ratio = tr2hs_ok ? equilibrium::tr2hs_check(built.op, mu, r.beta, m, sp, w).ratio() : kNaN;
  } else {
    r.weyl_trace = r.projection_distance = r.tr2hs_ratio = kNaN;
  }

  const auto nu = equilibrium::nu_window(mu, eps, cfg.equilibrium.weyl_alpha, cfg.equilibrium.weyl_nu_count);
  auto weyl = equilibrium::pointwise_weyl_check(built.op, equilibrium::WeylContext{sp, scal, built.potential}, mu, w,
                                                nu, cfg.equilibrium.weyl_alpha);
  r.weyl_remainder = weyl.max_abs_remainder;
  r.weyl_rows = std::move(weyl.rows);

  if (with_probes) r.probe_rows = semiclassics::evaluate_probes(sp, eps, st.omega, configured_probes(cfg, eps));
  return r;
}

namespace {

void add_fit(ScalingStudy& s, const std::string& name, std::vector<double> values, double expected, double margin,
             const std::vector<double>& scale) {
  std::vector<double> eps;
  for (const auto& r : s.records) eps.push_back(r.eps);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      s.failures.push_back(name + ": not available at eps = " + fmt(eps[i]));
      return;
    }
  }
  double vmax = 0, smax = 0;
  bool all_floor = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    vmax = std::max(vmax, std::abs(values[i]));
    smax = std::max(smax, scale[i]);
    if (std::abs(values[i]) > kRoundoffFraction * scale[i]) all_floor = false;
  }
  if (all_floor) {
    s.failures.push_back(name + ": values at roundoff level (max " + fmt(vmax) + " against tr W omega " +
                         fmt(smax) + "); the quantity vanishes identically for this configuration");
    return;
  }
  try {
    auto f = semiclassics::fit_exponent(eps, values, expected, margin);
    f.quantity = name;
    s.fits.push_back(std::move(f));
  } catch (const InvalidSample& e) {
    s.failures.push_back(name + ": " + e.what());
  }
}

}  // namespace

ScalingStudy scaling_study(const ExperimentConfig& cfg, bool with_probes, int workers) {
  using semiclassics::Quantity;
  ScalingStudy s;
  const auto& eps = cfg.scaling.eps;
  s.records.resize(eps.size());
  parallel_for_tasks(eps.size(), workers,
                     [&](std::size_t i) { s.records[i] = equilibrium_record(cfg, eps[i], with_probes); });
  const int d = cfg.space.dim;
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : s.records) v.push_back(get(r));
    return v;
  };
  const auto scale = column([](const EpsRecord& r) { return r.density_trace; });
  add_fit(s, "density_trace", scale, -double(d), 0.3, scale);
  add_fit(s, "weyl_trace", column([](const EpsRecord& r) { return r.weyl_trace; }), -double(d - 1), 0.3, scale);
  add_fit(s, "projection_distance", column([](const EpsRecord& r) { return r.projection_distance; }),
          -double(d - 1), 0.3, scale);
  add_fit(s, "weyl_remainder", column([](const EpsRecord& r) { return r.weyl_remainder; }), -double(d - 1), 0.4,
          scale);
  if (with_probes) {
    for (const auto& qs : cfg.probes.quantities) {
      const Quantity q = semiclassics::quantity_from_string(qs);
      const double expected = semiclassics::expected_exponent(q, d);
      if (q == Quantity::Density || q == Quantity::Overlap) {
        add_fit(s, "probe:" + qs, column([&](const EpsRecord& r) { return probe_supremum(r, qs); }), expected, 0.3,
                scale);
        continue;
      }
      for (const auto& ps : cfg.probes.pi)
        add_fit(s, "probe:" + qs + ":" + ps, column([&](const EpsRecord& r) { return probe_supremum(r, qs, ps); }),
                expected, 0.3, scale);
    }
  }
  return s;
}

PropagationRun propagation_run(const ExperimentConfig& cfg, double eps, double g) {
  const auto sp = cfg.space_spec();
  auto built = equilibrium::build_hamiltonian(sp, cfg.scaling_for(eps), cfg.external_potential());
  const double beta = cfg.beta_for(eps);
  const double mu = resolve_mu(built.op, cfg.equilibrium.mu);
  auto st = std::isinf(beta) ? equilibrium::fermi_projection(built.op, mu) : equilibrium::fermi_dirac(built.op, mu, beta);

  hartree::HartreeSystem sys;
  sys.h0 = built.op;
  sys.eps = eps;
  sys.coupling = g;
  if (cfg.interaction.kind == "gaussian")
    sys.interaction = std::make_shared<hartree::GridInteraction>(
        hartree::GridInteraction::gaussian(sp, cfg.interaction.strength, cfg.interaction.range));

  hartree::EvolveOptions eo;
  eo.snapshot_every = cfg.dynamics.snapshot_every;
  PropagationRun run;
  run.g = g;
  run.trajectory = hartree::evolve(sys, st.omega.matrix(), cfg.dynamics.T, cfg.dynamics.dt, eo);
  run.report = semiclassics::propagation_suite(sp, eps, run.trajectory, configured_probes(cfg, eps));
  run.c = -kInf;
  for (const auto& ser : run.report.series) {
    if (ser.t.size() < 2) continue;
    if (!ser.fit.finite()) {
      run.finite = false;
      continue;
    }
    run.c = std::max(run.c, ser.fit.c);
    if (ser.fit.max_violation > 1e-12) run.envelope_holds = false;
  }
  if (!std::isfinite(run.c)) run.c = kNaN;
  if (run.trajectory.aborted) run.finite = false;
  return run;
}

// ---------------- commands ----------------

namespace {

std::vector<std::string> merged_warnings(const std::vector<std::string>& base, const ScalingStudy& s) {
  std::vector<std::string> w = base;
  for (const auto& r : s.records) w.insert(w.end(), r.warnings.begin(), r.warnings.end());
  return w;
}

json records_json(const std::vector<EpsRecord>& recs) {
  json a = json::array();
  for (const auto& r : recs)
    a.push_back({{"eps", r.eps},
                 {"beta", finite_or_null(r.beta)},
                 {"mu", r.mu},
                 {"resolved", r.resolved},
                 {"particle_number", r.particle_number},
                 {"density_trace", r.density_trace},
                 {"weyl_trace", finite_or_null(r.weyl_trace)},
                 {"projection_distance", finite_or_null(r.projection_distance)},
                 {"tr2hs_ratio", finite_or_null(r.tr2hs_ratio)},
                 {"weyl_remainder", r.weyl_remainder}});
  return a;
}

json study_json(const ScalingStudy& s) {
  json j;
  j["records"] = records_json(s.records);
  j["fits"] = json::array();
  for (const auto& f : s.fits) j["fits"].push_back(fit_json(f));
  j["fit_failures"] = s.failures;
  double lo = kInf, hi = 0;
  for (const auto& r : s.records)
    if (std::isfinite(r.tr2hs_ratio)) {
      lo = std::min(lo, r.tr2hs_ratio);
      hi = std::max(hi, r.tr2hs_ratio);
    }
  if (hi > 0)
    j["tr2hs"] = {{"min_ratio", lo}, {"max_ratio", hi}, {"constant", hi}, {"bounded", hi <= 2 * lo}};
  return j;
}

void write_study(OutputSink& sink, const ScalingStudy& s, const std::string& stem, bool probes) {
  sink.write(stem + "_summary.csv", records_csv(sink.csv_header(stem + "_summary"), s.records));
  {
    std::vector<equilibrium::WeylRow> rows;
    for (const auto& r : s.records) rows.insert(rows.end(), r.weyl_rows.begin(), r.weyl_rows.end());
    std::ostringstream os;
    equilibrium::write_weyl_csv(os, rows, sink.csv_header("weyl"));
    sink.write(stem + "_weyl.csv", os.str());
  }
  if (probes) {
    std::vector<semiclassics::ProbeRow> rows;
    for (const auto& r : s.records) rows.insert(rows.end(), r.probe_rows.begin(), r.probe_rows.end());
    std::ostringstream os;
    semiclassics::write_probe_csv(os, rows, sink.csv_header("probes"));
    sink.write(stem + "_probes.csv", os.str());
  }
  sink.write(stem + "_fits.csv", fits_csv(sink.csv_header(stem + "_fits"), s.fits));
  sink.write_json(stem + ".json", study_json(s));
}

int finish(OutputSink& sink, const std::vector<std::string>& warnings) {
  sink.finalize(warnings);
  return sink.required_failed() ? 1 : 0;
}

void study_tasks(OutputSink& sink, const ScalingStudy& s) {
  for (const auto& r : s.records)
    sink.task({"eps=" + fmt(r.eps), true, true, r.resolved ? "" : "unresolved"});
  for (const auto& f : s.fits)
    sink.task({"fit:" + f.quantity, !std::isfinite(f.expected) || f.within(), false,
               "exponent " + fmt(f.exponent) + ", expected " + fmt(f.expected) + " +- " + fmt(f.margin)});
  for (const auto& msg : s.failures) sink.task({"fit", false, false, msg});
}

}  // namespace

int cmd_equilibrium(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto warnings = validate(cfg);
  OutputSink sink(opt.out, "equilibrium", cfg.hash(), cfg.run.seed);
  ScalingStudy s;
  try {
    s = scaling_study(cfg, false, opt.workers);
  } catch (const std::exception& e) {
    sink.task({"equilibrium", false, true, e.what()});
    return finish(sink, warnings);
  }
  study_tasks(sink, s);
  write_study(sink, s, "equilibrium", false);
  return finish(sink, merged_warnings(warnings, s));
}

int cmd_semiclassics(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto warnings = validate(cfg);
  OutputSink sink(opt.out, "semiclassics", cfg.hash(), cfg.run.seed);
  ScalingStudy s;
  try {
    s = scaling_study(cfg, true, opt.workers);
  } catch (const std::exception& e) {
    sink.task({"semiclassics", false, true, e.what()});
    return finish(sink, warnings);
  }
  study_tasks(sink, s);
  write_study(sink, s, "semiclassics", true);
  return finish(sink, merged_warnings(warnings, s));
}

int cmd_evolve(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto warnings = validate(cfg);
  OutputSink sink(opt.out, "evolve", cfg.hash(), cfg.run.seed);
  const double eps = cfg.scaling.eps.front();
  const auto& factors = cfg.dynamics.coupling_factors;
  std::vector<PropagationRun> runs(factors.size());
  std::vector<std::string> errors(factors.size());
  parallel_for_tasks(factors.size(), opt.workers, [&](std::size_t i) {
    try {
      runs[i] = propagation_run(cfg, eps, factors[i] * cfg.coupling_for(eps));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  json summary;
  summary["eps"] = eps;
  summary["runs"] = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string tag = "g" + eps_tag(i);
    if (!errors[i].empty()) {
      sink.task({"evolve:" + tag, false, true, errors[i]});
      continue;
    }
    const auto& run = runs[i];
    const auto& tr = run.trajectory;
    sink.task({"evolve:" + tag, !tr.aborted, true, tr.error});
    {
      std::ostringstream os;
      hartree::write_snapshot_csv(os, tr, {}, sink.csv_header("trajectory"));
      sink.write("evolve_" + tag + "_trajectory.csv", os.str());
    }
    {
      std::ostringstream os;
      semiclassics::write_probe_csv(os, run.report.rows, sink.csv_header("propagation_probes"));
      sink.write("evolve_" + tag + "_probes.csv", os.str());
    }
    json series = json::array();
    for (const auto& ser : run.report.series)
      series.push_back({{"probe", ser.probe.label()},
                        {"A", finite_or_null(ser.fit.A)},
                        {"c", finite_or_null(ser.fit.c)},
                        {"ls_rate", finite_or_null(ser.fit.ls_rate)},
                        {"max_violation", finite_or_null(ser.fit.max_violation)}});
    summary["runs"].push_back({{"coupling", run.g},
                               {"coupling_factor", factors[i]},
                               {"steps", tr.steps_done},
                               {"aborted", tr.aborted},
                               {"c", finite_or_null(run.c)},
                               {"finite", run.finite},
                               {"envelope_holds", run.envelope_holds},
                               {"series", series}});
  }
  sink.write_json("evolve.json", summary);
  return finish(sink, warnings);
}

int cmd_fock_verify(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto warnings = validate(cfg);
  OutputSink sink(opt.out, "fock-verify", cfg.hash(), cfg.run.seed);
  fock::VerifyOptions vo;
  vo.seed = cfg.run.seed;
  vo.wick_modes = cfg.fock.modes;
  vo.lemma_modes = cfg.fock.lemma_modes;
  vo.lemma_instances = cfg.fock.lemma_instances;
  vo.bound_instances = cfg.fock.bound_instances;
  vo.generator_modes = cfg.fock.generator_modes;
  json report;
  try {
    auto checks = fock::run_verification(vo);
    for (const auto& c : checks)
      sink.task({"fock:" + c.name, c.passed(), true, "residual " + fmt(c.residual) + " <= " + fmt(c.tolerance)});
    report = fock::verification_report(checks);
    std::ostringstream os;
    os << sink.csv_header("fock_identities") << "\n" << "name,modes,instances,residual,tolerance,passed\n";
    for (const auto& c : checks)
      os << c.name << "," << c.modes << "," << c.instances << "," << fmt(c.residual) << "," << fmt(c.tolerance)
         << "," << (c.passed() ? "true" : "false") << "\n";
    sink.write("fock_identities.csv", os.str());
  } catch (const std::exception& e) {
    sink.task({"fock:identities", false, true, e.what()});
  }
  try {
    std::mt19937_64 rng(cfg.run.seed + 1);
    auto gc = fock::fluctuation_generator_check(cfg.fock.generator_modes, 0.5, {1e-2, 5e-3, 2.5e-3}, 5, rng);
    const bool ok = std::abs(gc.slope - 1.0) <= 0.2;
    sink.task({"fock:generator_slope", ok, true, "slope " + fmt(gc.slope)});
    report["generator"] = {{"dt", gc.dt},
                           {"residual", gc.residual},
                           {"slope", gc.slope},
                           {"reference_residual", gc.reference_residual}};
  } catch (const std::exception& e) {
    sink.task({"fock:generator_slope", false, true, e.what()});
  }
  sink.write_json("fock_verification.json", report);
  return finish(sink, warnings);
}

int cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt) {
  auto warnings = validate(cfg);
  OutputSink sink(opt.out, "sweep", cfg.hash(), cfg.run.seed);
  json summary;
  if (cfg.sweep.probe == "synthetic") {
    // Plumbing check: a probe whose value is eps^k must fit exponent k.
    const auto& eps = cfg.scaling.eps;
    std::vector<double> values(eps.size());
    parallel_for_tasks(eps.size(), opt.workers,
                       [&](std::size_t i) { values[i] = std::pow(eps[i], cfg.sweep.synthetic_exponent); });
    ScalingStudy s;
    for (double e : eps) {
      EpsRecord r;
      r.eps = e;
      s.records.push_back(r);
    }
    add_fit(s, "synthetic", values, cfg.sweep.synthetic_exponent, 1e-6, std::vector<double>(eps.size(), 1.0));
    study_tasks(sink, s);
    std::ostringstream os;
    os << sink.csv_header("sweep_synthetic") << "\n" << "eps,value\n";
    for (std::size_t i = 0; i < eps.size(); ++i) os << fmt(eps[i]) << "," << fmt(values[i]) << "\n";
    sink.write("sweep_values.csv", os.str());
    sink.write("sweep_fits.csv", fits_csv(sink.csv_header("sweep_fits"), s.fits));
    summary["fits"] = json::array();
    for (const auto& f : s.fits) summary["fits"].push_back(fit_json(f));
    summary["fit_failures"] = s.failures;
    sink.write_json("sweep.json", summary);
    return finish(sink, warnings);
  }

  ScalingStudy s;
  try {
    s = scaling_study(cfg, true, opt.workers);
  } catch (const std::exception& e) {
    sink.task({"sweep:eps", false, true, e.what()});
    return finish(sink, warnings);
  }
  study_tasks(sink, s);
  write_study(sink, s, "sweep", true);
  warnings = merged_warnings(warnings, s);

  const auto& factors = cfg.dynamics.coupling_factors;
  if (factors.size() > 1) {
    const double eps = cfg.scaling.eps.front();
    std::vector<PropagationRun> runs(factors.size());
    std::vector<std::string> errors(factors.size());
    parallel_for_tasks(factors.size(), opt.workers, [&](std::size_t i) {
      try {
        runs[i] = propagation_run(cfg, eps, factors[i] * cfg.coupling_for(eps));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    std::ostringstream os;
    os << sink.csv_header("coupling_sweep") << "\n" << "coupling,c,finite,envelope_holds\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (!errors[i].empty()) {
        sink.task({"sweep:g=" + fmt(factors[i]), false, true, errors[i]});
        continue;
      }
      sink.task({"sweep:g=" + fmt(runs[i].g), !runs[i].trajectory.aborted, true, runs[i].trajectory.error});
      os << fmt(runs[i].g) << "," << fmt(runs[i].c) << "," << (runs[i].finite ? "true" : "false") << ","
         << (runs[i].envelope_holds ? "true" : "false") << "\n";
    }
    sink.write("sweep_coupling.csv", os.str());
  }
  return finish(sink, warnings);
}

}  // namespace relhartree::harness

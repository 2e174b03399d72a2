#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relhartree/equilibrium.hpp"
#include "relhartree/fock_checks.hpp"
#include "relhartree/semiclassics.hpp"
#include "relhartree/space.hpp"

namespace relhartree::harness {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr int kCsvSchemaVersion = 1;

struct ExperimentConfig {
  struct Space {
    int dim = 1;
    int points = 512;
    double length = 40.0;
  } space;
  struct Scaling {
    std::vector<double> eps{0.2, 0.14, 0.1, 0.07, 0.05};
    double b = 1.0;
  } scaling;
  struct Potential {
    std::string kind = "zero";
    double amplitude = 0.0;
    int wells = 1;
    std::vector<double> center{0.0};
  } potential;
  struct Interaction {
    std::string kind = "gaussian";  // none | gaussian
    double strength = 1.0;
    double range = 1.0;
    std::optional<double> coupling;  // unset: eps^d
  } interaction;
  struct Lambda {
    std::vector<double> lower;  // empty: whole box
    std::vector<double> upper;
  } lambda;
  struct Equilibrium {
    std::string method = "eigendecomposition";
    std::string beta = "1/eps";  // inf | 1/eps | number
    double mu = 1.5;
    int contour_nodes = 256;
    int weyl_m = 2;
    int weight_twice_n = 8;
    int weyl_nu_count = 201;
    double weyl_alpha = 0.5;
  } equilibrium;
  struct Probes {
    std::vector<std::vector<double>> z{{20.0}};
    std::vector<std::vector<double>> zprime{{20.0}, {21.0}, {22.0}, {24.0}};
    std::vector<int> n{2};
    std::vector<double> p{0.5, 1, 2, 4, 8, 16};
    std::vector<std::string> quantities{"density", "grad_commutator", "phase_commutator", "overlap"};
    std::vector<std::string> pi{"omega"};
    double observable_sigma = 1.0;
  } probes;
  struct Dynamics {
    double T = 2.0;
    double dt = 5e-3;
    int snapshot_every = 40;
    std::vector<double> coupling_factors{1.0};
  } dynamics;
  struct Fock {
    int modes = 6;
    int generator_modes = 3;
    int lemma_modes = 4;
    int lemma_instances = 20;
    int bound_instances = 50;
  } fock;
  struct Sweep {
    std::string probe = "all";  // all | synthetic
    double synthetic_exponent = -2.0;
  } sweep;
  struct Run {
    unsigned long seed = 1;
    int workers = 1;
    std::string out = "out";
  } run;

  space::SpaceSpec space_spec() const;
  space::EpsilonScaling scaling_for(double eps) const;
  equilibrium::ExternalPotential external_potential() const;
  double beta_for(double eps) const;
  double coupling_for(double eps) const;
  space::Point point(const std::vector<double>& v) const;

  // Canonical JSON of everything that influences outputs (excludes out dir and workers).
  nlohmann::json canonical() const;
  std::string hash() const;  // sha256 hex of canonical().dump()
};

ExperimentConfig default_config();
// Sections map to the struct above; unknown sections or keys raise ConfigError with field and line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Range checks; returns warnings (unresolved eps values). Throws ConfigError.
std::vector<std::string> validate(const ExperimentConfig& cfg);
std::vector<double> parse_eps_list(const std::string& s);

std::string sha256_hex(const std::string& data);

// Runs fn(i) for i in [0, n) on at most `workers` threads; results land in slot i.
void parallel_for_tasks(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

struct TaskStatus {
  std::string name;
  bool ok = true;
  bool required = true;
  std::string message;
};

// Single writer for all files of one command; keeps the manifest inventory.
class OutputSink {
 public:
  OutputSink(std::filesystem::path dir, std::string command, std::string config_hash, unsigned long seed);
  std::string csv_header(const std::string& kind) const;
  void write(const std::string& rel, const std::string& content);
  void write_json(const std::string& rel, nlohmann::json j);  // adds config_hash
  void task(TaskStatus s) { tasks_.push_back(std::move(s)); }
  const std::vector<TaskStatus>& tasks() const { return tasks_; }
  bool required_failed() const;
  void finalize(const std::vector<std::string>& warnings);  // writes manifest.json
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::string hash_;
  unsigned long seed_;
  std::vector<std::string> files_;
  std::vector<TaskStatus> tasks_;
};

// ---- studies shared by the commands and the acceptance suite ----

struct EpsRecord {
  double eps = 0;
  double beta = 0;
  double mu = 0;
  bool resolved = true;
  double particle_number = 0;
  double density_trace = 0;  // tr W_z omega
  double weyl_trace = 0;
  double projection_distance = 0;
  double tr2hs_ratio = 0;
  double weyl_remainder = 0;  // max |counted - phase space| over the nu window
  std::vector<semiclassics::ProbeRow> probe_rows;
  std::vector<equilibrium::WeylRow> weyl_rows;
  std::vector<std::string> warnings;
};

// Max of the prefactored probe value over z' for each (quantity, pi) label.
double probe_supremum(const EpsRecord& r, const std::string& quantity, const std::string& pi = "omega");

struct ScalingStudy {
  std::vector<EpsRecord> records;
  std::vector<semiclassics::ScalingFit> fits;
  std::vector<std::string> failures;  // fits that could not be formed, with reasons
};

EpsRecord equilibrium_record(const ExperimentConfig& cfg, double eps, bool with_probes);
ScalingStudy scaling_study(const ExperimentConfig& cfg, bool with_probes, int workers);

struct PropagationRun {
  double g = 0;
  double c = 0;  // max over probes of the envelope rate
  bool finite = true;
  bool envelope_holds = true;
  hartree::HartreeTrajectory trajectory;
  semiclassics::PropagationReport report;
};

std::vector<semiclassics::StructureProbe> configured_probes(const ExperimentConfig& cfg, double eps);
PropagationRun propagation_run(const ExperimentConfig& cfg, double eps, double g);

// ---- commands; return the process exit code ----
struct RunOptions {
  std::filesystem::path out;
  int workers = 1;
};

int cmd_equilibrium(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_evolve(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_semiclassics(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_fock_verify(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt);

}  // namespace relhartree::harness

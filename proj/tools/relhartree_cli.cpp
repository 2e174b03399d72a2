#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "relhartree/error.hpp"
#include "relhartree/harness.hpp"

namespace h = relhartree::harness;

int main(int argc, char** argv) {
  CLI::App app{"relhartree: semiclassical Hartree dynamics, equilibrium diagnostics and Fock-space checks"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<unsigned long> seed;
  std::optional<int> workers;
  std::optional<std::string> eps_override;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"equilibrium", "Build equilibrium states over the eps list; Weyl, tr2HS and projection reports"},
      {"evolve", "Propagate the Hartree equation and track structure probes"},
      {"semiclassics", "Evaluate structure probes and fit their eps exponents"},
      {"fock-verify", "Run the Fock-space identity suite"},
      {"sweep", "Fan out over eps (and coupling factors) and aggregate scaling fits"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "YAML configuration file (defaults apply when omitted)");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--workers", workers, "Worker threads for independent tasks")->check(CLI::PositiveNumber);
    sub->add_option("--eps-override", eps_override, "Comma-separated eps list replacing the configured one");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    h::ExperimentConfig cfg = config_path.empty() ? h::default_config() : h::load_config(config_path);
    if (seed) cfg.run.seed = *seed;
    if (workers) cfg.run.workers = *workers;
    if (out_dir) cfg.run.out = *out_dir;
    if (eps_override) cfg.scaling.eps = h::parse_eps_list(*eps_override);
    for (const auto& w : h::validate(cfg)) std::cerr << "warning: " << w << "\n";

    h::RunOptions opt{cfg.run.out, cfg.run.workers};
    int rc = 0;
    if (cmd == "equilibrium") rc = h::cmd_equilibrium(cfg, opt);
    else if (cmd == "evolve") rc = h::cmd_evolve(cfg, opt);
    else if (cmd == "semiclassics") rc = h::cmd_semiclassics(cfg, opt);
    else if (cmd == "fock-verify") rc = h::cmd_fock_verify(cfg, opt);
    else rc = h::cmd_sweep(cfg, opt);
    std::cout << cmd << ": " << (rc == 0 ? "ok" : "required task failed") << " (manifest: "
              << (opt.out / "manifest.json").string() << ")\n";
    return rc;
  } catch (const relhartree::ConfigError& e) {
    std::cerr << "config error";
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    if (e.line() > 0) std::cerr << " at line " << e.line();
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

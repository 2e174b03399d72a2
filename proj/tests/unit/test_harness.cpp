#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "relhartree/error.hpp"
#include "relhartree/harness.hpp"

using namespace relhartree;
using namespace relhartree::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("relhartree_unit_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config() {
  return parse_config(R"(
space: {dim: 1, points: 64, length: 10.0}
scaling: {eps: [0.4, 0.3, 0.2]}
probes: {z: [5.0], zprime: [5.0, 6.0], p: [1, 2]}
dynamics: {T: 0.1, dt: 0.01, snapshot_every: 5}
)");
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("defaults are the desk-scale preset") {
    auto c = default_config();
    CHECK(c.space.dim == 1);
    CHECK(c.space.points == 512);
    CHECK(c.space.length == 40.0);
    CHECK(c.scaling.eps == std::vector<double>{0.2, 0.14, 0.1, 0.07, 0.05});
    CHECK(c.dynamics.T == 2.0);
    CHECK(c.dynamics.dt == 5e-3);
    CHECK(c.fock.modes == 6);
    CHECK_NOTHROW(validate(c));
    CHECK(c.beta_for(0.1) == doctest::Approx(10.0));
    CHECK(c.coupling_for(0.1) == doctest::Approx(0.1));
  }

  TEST_CASE("shipped config equals the defaults") {
    auto c = load_config(std::string(RELHARTREE_SOURCE_DIR) + "/configs/default.yaml");
    CHECK(c.hash() == default_config().hash());
  }

  TEST_CASE("unknown keys and sections are errors with line numbers") {
    try {
      parse_config("space:\n  dim: 1\n  pionts: 8\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "space.pionts");
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_config("spaec:\n  dim: 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("space:\n  dim: one\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("space: [1, 2"), ConfigError);
  }

  TEST_CASE("validation") {
    auto c = default_config();
    c.scaling.eps.clear();
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_config();
    c.lambda.lower = {10};
    c.lambda.upper = {50};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_config();
    c.lambda.lower = {0};
    c.lambda.upper = {10};
    CHECK_THROWS_AS(validate(c), ConfigError);  // probe centre 20 outside the sub-box
    c = default_config();
    c.dynamics.dt = 0.1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = default_config();
    auto warnings = validate(c);
    CHECK(warnings.size() == 4);  // eps below twice the spacing are flagged
  }

  TEST_CASE("eps override parsing") {
    CHECK(parse_eps_list("0.2, 0.1 0.05") == std::vector<double>{0.2, 0.1, 0.05});
    CHECK(parse_eps_list("").empty());
    CHECK_THROWS_AS(parse_eps_list("0.2,x"), ConfigError);
  }

  TEST_CASE("hash ignores output location and workers") {
    auto a = default_config(), b = default_config();
    b.run.out = "elsewhere";
    b.run.workers = 3;
    CHECK(a.hash() == b.hash());
    b.run.seed = 2;
    CHECK(a.hash() != b.hash());
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("worker pool fills every slot") {
    std::vector<int> out(37, -1);
    parallel_for_tasks(out.size(), 4, [&](std::size_t i) { out[i] = int(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == int(i * i));
    CHECK_THROWS(parallel_for_tasks(5, 2, [](std::size_t i) {
      if (i == 3) throw std::runtime_error("boom");
    }));
  }

  TEST_CASE("synthetic sweep recovers the exponent") {
    auto c = small_config();
    c.sweep.probe = "synthetic";
    c.sweep.synthetic_exponent = -2;
    auto dir = scratch("sweep");
    CHECK(cmd_sweep(c, {dir, 1}) == 0);
    auto j = nlohmann::json::parse(slurp(dir / "sweep.json"));
    CHECK(j["fits"][0]["exponent"].get<double>() == doctest::Approx(-2).epsilon(1e-12));
    CHECK(j["config_hash"] == c.hash());
  }

  TEST_CASE("manifest lists every file and reruns are byte identical") {
    auto c = small_config();
    auto d1 = scratch("eq1"), d2 = scratch("eq2");
    CHECK(cmd_equilibrium(c, {d1, 1}) == 0);
    CHECK(cmd_equilibrium(c, {d2, 2}) == 0);
    auto m = nlohmann::json::parse(slurp(d1 / "manifest.json"));
    std::size_t listed = 0;
    for (const auto& f : m["files"]) {
      const auto rel = f["path"].get<std::string>();
      REQUIRE(fs::exists(d1 / rel));
      CHECK(f["sha256"] == sha256_hex(slurp(d1 / rel)));
      CHECK(slurp(d1 / rel) == slurp(d2 / rel));
      ++listed;
    }
    std::size_t on_disk = 0;
    for (const auto& e : fs::recursive_directory_iterator(d1))
      if (e.is_regular_file() && e.path().filename() != "manifest.json") ++on_disk;
    CHECK(listed == on_disk);
    CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
    CHECK(slurp(d1 / "equilibrium_summary.csv").rfind("# relhartree-csv v1", 0) == 0);
  }

  TEST_CASE("free equilibrium weyl rows match the Fourier spectrum") {
    auto c = small_config();
    c.scaling.eps = {0.3};
    auto r = equilibrium_record(c, 0.3, false);
    CHECK(r.weyl_rows.size() == 3 * std::size_t(c.equilibrium.weyl_nu_count));
    CHECK(r.density_trace > 0);
  }

  TEST_CASE("evolve with T = 0 returns the input state") {
    auto c = small_config();
    c.dynamics.T = 0;
    auto run = propagation_run(c, 0.3, 0.1);
    REQUIRE(run.trajectory.states.size() == 1);
    auto b = equilibrium::build_hamiltonian(c.space_spec(), c.scaling_for(0.3), c.external_potential());
    Mat om = equilibrium::fermi_dirac(b.op, c.equilibrium.mu, c.beta_for(0.3)).omega.matrix();
    CHECK((run.trajectory.states[0] - om).norm() == 0.0);
  }

  TEST_CASE("fock verify exits cleanly") {
    auto c = default_config();
    c.fock.lemma_instances = 3;
    c.fock.bound_instances = 5;
    auto dir = scratch("fock");
    CHECK(cmd_fock_verify(c, {dir, 1}) == 0);
    auto j = nlohmann::json::parse(slurp(dir / "fock_verification.json"));
    CHECK(j["all_passed"].get<bool>());
  }
}

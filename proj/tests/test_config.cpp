#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "amcmc/config.hpp"
#include "amcmc/io.hpp"
#include "amcmc/validate.hpp"

using namespace amcmc;

namespace {

json small_config() {
  return {{"graph", c3_graph_json()},
          {"target", c3_target_json()},
          {"method", "chi_squared"},
          {"dt", 0.1},
          {"steps", 20},
          {"particles", 500},
          {"damping", 1.4}};
}

std::string error_of(const json& cfg) {
  try {
    parse_config(cfg);
  } catch (const config_error& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST(Presets, AllNamesParse) {
  for (const auto& name : preset_names()) {
    const auto cfg = preset_config(name);
    EXPECT_EQ(cfg.output, "out/" + name);
    EXPECT_EQ(cfg.mode, RunMode::both);
    EXPECT_LE(cfg.warm_start, cfg.steps);
  }
  EXPECT_THROW(preset_json("nope"), config_error);
}

TEST(Presets, TriangleParameters) {
  const auto cfg = preset_config("c3-chi");
  EXPECT_EQ(cfg.chain.size(), 3u);
  EXPECT_EQ(cfg.method.method, Method::chi_squared);
  EXPECT_EQ(cfg.dt, 0.1);
  EXPECT_EQ(cfg.steps, 650u);
  EXPECT_EQ(cfg.particles, 1000000u);
  EXPECT_EQ(cfg.damping(0.0), 1.4220);
  const auto fine = preset_config("c3-chi-fine");
  EXPECT_EQ(fine.dt, 0.01);
  EXPECT_EQ(fine.steps, 6500u);
}

TEST(Presets, TriangleOdeSpansSixtyFive) {
  const auto cfg = preset_config("c3-chi");
  const auto p0 = uniform_density(3);
  EXPECT_NEAR(integrate(cfg.chain, p0, cfg.ode_options(false)).records.back().t, 65.0, 1e-9);
  EXPECT_NEAR(integrate(cfg.chain, p0, cfg.ode_options(true)).records.back().t, 65.0, 1e-9);
}

TEST(Presets, TwoLoopParameters) {
  for (const auto* name : {"twoloop-logfisher", "twoloop-confisher"}) {
    const auto cfg = preset_config(name);
    EXPECT_EQ(cfg.chain.size(), 8u);
    EXPECT_EQ(cfg.particles, 10000u);
    EXPECT_EQ(cfg.dt, 0.1);
    EXPECT_EQ(cfg.steps, 1000u);
    EXPECT_EQ(cfg.warm_start, 0u);
    EXPECT_EQ(cfg.damping(1.0), 0.5);
    EXPECT_DOUBLE_EQ(cfg.damping(5.0), 1.0);
    EXPECT_DOUBLE_EQ(cfg.damping(100.0), 0.6);
  }
  EXPECT_EQ(preset_config("twoloop-confisher").method.method, Method::con_fisher);
}

TEST(Presets, HypercubeAndLattice) {
  const auto cube = preset_config("hypercube-logfisher");
  EXPECT_EQ(cube.chain.size(), 64u);
  EXPECT_EQ(cube.warm_start, 100u);
  EXPECT_DOUBLE_EQ(cube.damping(2.0), std::sqrt(0.0468));
  EXPECT_DOUBLE_EQ(cube.damping(50.0), 0.17);
  const auto lattice = preset_config("lattice-logfisher");
  EXPECT_EQ(lattice.chain.size(), 625u);
  EXPECT_EQ(lattice.warm_start, 2999u);
  EXPECT_EQ(lattice.damping(40.0), 0.0065);
  EXPECT_EQ(lattice.steps, 150000u);
  const auto reduced = preset_config("lattice-logfisher-reduced");
  EXPECT_EQ(reduced.steps, 10000u);
  EXPECT_EQ(reduced.particles, 10000u);
}

TEST(ParseConfig, Defaults) {
  const auto cfg = parse_config(small_config());
  EXPECT_EQ(cfg.mode, RunMode::both);
  EXPECT_EQ(cfg.seed, 0u);
  EXPECT_EQ(cfg.warm_start, 0u);
  EXPECT_EQ(cfg.restart_threshold, 0.0);
  EXPECT_EQ(cfg.damping(3.0), 1.4);
  const auto jc = cfg.jump_config();
  EXPECT_EQ(jc.particles, 500u);
  EXPECT_EQ(jc.steps, 20u);
  EXPECT_FALSE(cfg.ode_options(false).method.has_value());
  EXPECT_TRUE(cfg.ode_options(true).method.has_value());
}

TEST(ParseConfig, ErrorsNameTheKey) {
  EXPECT_TRUE(starts_with(error_of(json::object()), "config:"));
  json c = small_config();
  c.erase("graph");
  EXPECT_TRUE(starts_with(error_of(c), "config.graph: missing"));
  c = small_config();
  c["method"] = "hmc";
  EXPECT_TRUE(starts_with(error_of(c), "method:"));
  c = small_config();
  c["dt"] = -0.1;
  EXPECT_TRUE(starts_with(error_of(c), "dt:"));
  c = small_config();
  c["steps"] = 1.5;
  EXPECT_TRUE(starts_with(error_of(c), "steps:"));
  c = small_config();
  c["particles"] = 0;
  EXPECT_TRUE(starts_with(error_of(c), "particles:"));
  c = small_config();
  c["warm_start"] = 21;
  EXPECT_TRUE(starts_with(error_of(c), "warm_start:"));
  c = small_config();
  c["target"]["weights"] = {1, 2};
  EXPECT_TRUE(starts_with(error_of(c), "target.weights:"));
  c = small_config();
  c["target"]["weights"] = {1, -2, 3};
  EXPECT_TRUE(starts_with(error_of(c), "target:"));
  c = small_config();
  c["graph"] = {{"kind", "torus"}};
  EXPECT_TRUE(starts_with(error_of(c), "graph.kind:"));
  c = small_config();
  c["mode"] = "all";
  EXPECT_TRUE(starts_with(error_of(c), "mode:"));
  c = small_config();
  c["damping"] = {{"kind", "piecewise"}, {"pieces", {{{"start", 1.0}, {"schedule", 0.5}}}}};
  EXPECT_TRUE(starts_with(error_of(c), "damping:"));
}

TEST(ParseConfig, ConstantThetaMatrix) {
  json c = small_config();
  c["method"] = "con_fisher";
  c["con_theta"] = {{1, 2, 2}, {2, 1, 2}, {2, 2, 1}};
  const auto cfg = parse_config(c);
  EXPECT_EQ(cfg.method.mobility.theta(0, 1), 2.0);
  c["con_theta"] = {{1, 2}, {2, 1}};
  EXPECT_TRUE(starts_with(error_of(c), "con_theta:"));
}

TEST(ParseGraph, Kinds) {
  EXPECT_EQ(parse_graph({{"kind", "cycle"}, {"n", 5}}).size(), 5u);
  EXPECT_EQ(parse_graph({{"kind", "hypercube"}, {"dimension", 3}}).size(), 8u);
  EXPECT_EQ(parse_graph({{"kind", "lattice"}, {"rows", 3}, {"cols", 4}}).edges().size(), 17u);
  EXPECT_EQ(parse_graph(two_loop_graph_json()).size(), 8u);
  EXPECT_THROW(parse_graph({{"kind", "cycle"}}), config_error);
  EXPECT_THROW(parse_graph({{"kind", "cycle"}, {"n", 1}}), config_error);
}

TEST(ParseTarget, OverridesAndMixture) {
  const auto g = parse_graph(hypercube_graph_json());
  const auto t = parse_target(hypercube_target_json(), g);
  EXPECT_EQ(t.unnormalized()[0], 16.0);
  EXPECT_EQ(t.unnormalized()[63], 16.0);
  EXPECT_EQ(t.unnormalized()[5], 1.0);
  EXPECT_NEAR(t.z(), 94.0, 1e-12);
  const auto lg = parse_graph(lattice_graph_json());
  EXPECT_EQ(parse_target(lattice_target_json(), lg).probabilities().size(), 625);
  EXPECT_THROW(parse_target({{"kind", "explicit"}, {"default", 1.0}, {"overrides", {{99, 2.0}}}}, g), config_error);
}

TEST(Damping, JsonRoundTrip) {
  const auto s = parse_damping(two_loop_damping_json());
  const auto back = parse_damping(damping_to_json(s));
  for (double t : {0.0, 1.0, 2.99, 3.0, 4.0, 7.5, 100.0}) EXPECT_EQ(s(t), back(t));
  EXPECT_EQ(parse_damping(json(0.25))(10.0), 0.25);
}

TEST(JsonText, SyntaxErrorsCarryLineAndColumn) {
  try {
    parse_json_text("{\n  \"dt\": 0.1,\n  \"steps\": ]\n}", "cfg.json");
    FAIL() << "expected a config_error";
  } catch (const config_error& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(starts_with(msg, "cfg.json:"));
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
  }
  EXPECT_THROW(read_json_file("/nonexistent/config.json"), config_error);
}

TEST(JsonText, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "amcmc_config_roundtrip.json";
  std::ofstream(path) << preset_json("c3-chi").dump(2);
  EXPECT_EQ(read_json_file(path.string()), preset_json("c3-chi"));
  std::filesystem::remove(path);
}

TEST(TrajectoryCsv, JumpColumns) {
  JumpConfig cfg;
  cfg.particles = 100;
  cfg.steps = 3;
  const auto r = run_mh_jump(cfg, preset_config("c3-chi").chain);
  std::ostringstream out;
  write_trajectory_csv(out, r.trajectory);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,t,dt,l2_error,hamiltonian,potential,min_p,restarts,total_particles,restarts_this_iter");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 9);
    EXPECT_NE(line.find(",100,0"), std::string::npos);
  }
  EXPECT_EQ(rows, 4);
}

TEST(TrajectoryCsv, RoundTripsDoubles) {
  const auto cfg = preset_config("c3-chi");
  auto opt = cfg.ode_options(true);
  opt.steps = 5;
  const auto traj = integrate(cfg.chain, uniform_density(3), opt);
  std::ostringstream out;
  write_trajectory_csv(out, traj);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  for (const auto& rec : traj.records) {
    std::getline(in, line);
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 8u);
    EXPECT_EQ(std::stod(cells[3]), rec.l2_error);
    EXPECT_EQ(std::stod(cells[4]), rec.hamiltonian);
    EXPECT_EQ(std::stod(cells[6]), rec.min_p);
  }
}

TEST(Manifest, Fields) {
  const auto m = run_manifest(small_config(), "abc123", 9, {"mh_ode.csv"});
  EXPECT_EQ(m["hash"], "abc123");
  EXPECT_EQ(m["seed"], 9);
  EXPECT_EQ(m["config"], small_config());
  EXPECT_EQ(m["files"][0], "mh_ode.csv");
}

TEST(ReportJson, TriangleValues) {
  const auto chain = preset_config("c3-chi").chain;
  const auto j = to_json(spectral_report(chain));
  EXPECT_NEAR(j["alpha_star"].get<double>(), -0.5044, 5e-4);
  EXPECT_NEAR(j["recommended_d"].get<double>(), 1.4204, 1e-3);
  EXPECT_NEAR(j["mu_star"].get<double>(), -0.7102, 1e-3);
  EXPECT_EQ(j["q_eigenvalues"].size(), 3u);
  EXPECT_EQ(j["l_eigenvalues"].size(), 6u);
  EXPECT_EQ(j["l_eigenvalues"][0].size(), 2u);
}

TEST(ReportJson, UniformTriangle) {
  const auto g = parse_graph(c3_graph_json());
  const auto chain = make_mh_chain(g, parse_target({{"kind", "explicit"}, {"default", 1.0}}, g));
  const auto j = to_json(spectral_report(chain, std::nullopt, false));
  EXPECT_NEAR(j["alpha_star"].get<double>(), -1.5, 1e-14);
  EXPECT_TRUE(j["mu_star"].is_null());
}

TEST(Validation, FreshBuildPasses) {
  for (const auto& r : run_validation()) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Validation, SignFlippedGradientFails) {
  ValidationOptions opt;
  opt.gradient = [](const MethodSpec& s, const ReversibleChain& c, const Vector& p) { return Vector(-potential_grad(s, c, p)); };
  const auto results = run_validation(opt);
  const auto it = std::find_if(results.begin(), results.end(), [](const CheckResult& r) { return r.name == "gradient_finite_difference"; });
  ASSERT_NE(it, results.end());
  EXPECT_FALSE(it->passed);
  for (const auto& r : results)
    if (r.name != "gradient_finite_difference") EXPECT_TRUE(r.passed) << r.name;
}

TEST(Validation, SeedRobust) {
  const auto base = run_validation();
  for (std::uint64_t seed : {2u, 17u, 12345u}) {
    ValidationOptions opt;
    opt.seed = seed;
    const auto other = run_validation(opt);
    ASSERT_EQ(other.size(), base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
      EXPECT_EQ(other[k].name, base[k].name);
      EXPECT_EQ(other[k].passed, base[k].passed) << other[k].name << " seed " << seed;
    }
  }
}

// amcmc command line: run experiments, print spectral reports, validate invariants.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include "CLI11.hpp"

#include "amcmc/amcmc.hpp"
#include "amcmc/config.hpp"
#include "amcmc/io.hpp"
#include "amcmc/validate.hpp"

namespace fs = std::filesystem;
using namespace amcmc;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool blank(const std::string& s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

/// SHA-1 of "blob <size>\0<content>", as git hashes file contents.
std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

/// Inline JSON when the argument starts with '{', otherwise a file path.
json spec_argument(const std::string& arg, const std::string& what) {
  if (blank(arg)) throw config_error(what + ": empty specification");
  std::size_t k = 0;
  while (k < arg.size() && std::isspace(static_cast<unsigned char>(arg[k]))) ++k;
  if (arg[k] == '{') return parse_json_text(arg, what);
  return read_json_file(arg);
}

int cmd_run(const std::string& config_path, const std::string& preset, const std::optional<std::uint64_t>& seed) {
  const auto text = slurp(config_path);
  if (blank(text)) {
    std::cerr << "usage error: config file '" << config_path << "' is empty\n";
    return kExitUsage;
  }
  json cfg = parse_json_text(text, config_path);
  if (!preset.empty()) {
    json base = preset_json(preset);
    base.merge_patch(cfg);
    cfg = std::move(base);
  }
  if (seed) cfg["seed"] = *seed;
  const auto exp = parse_config(cfg);

  const fs::path out_dir(exp.output);
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  const auto method = to_string(exp.method.method);
  auto emit = [&](const std::string& name, const Trajectory& traj) {
    const auto path = (out_dir / name).string();
    write_trajectory_csv(path, traj);
    files.push_back(name);
    const auto& last = traj.records.back();
    std::cout << name << ": final l2_error " << last.l2_error << ", restarts " << last.restarts << '\n';
  };
  const auto p0 = uniform_density(exp.chain.size());
  if (exp.mode != RunMode::jump) {
    emit("mh_ode.csv", integrate(exp.chain, p0, exp.ode_options(false)));
    emit(method + "_ode.csv", integrate(exp.chain, p0, exp.ode_options(true)));
  }
  if (exp.mode != RunMode::ode) {
    emit("mh_jump.csv", run_mh_jump(exp.jump_config(), exp.chain).trajectory);
    emit(method + "_jump.csv", run_amcmc_jump(exp.jump_config(), exp.chain, exp.method, exp.damping).trajectory);
  }
  const auto manifest = run_manifest(cfg, git_blob_hash(cfg.dump()), exp.seed, files);
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return 0;
}

int cmd_spectrum(const std::string& graph_arg, const std::string& target_arg, const std::optional<double>& damping, bool skip_l) {
  const auto g = parse_graph(spec_argument(graph_arg, "graph"));
  auto target = parse_target(spec_argument(target_arg, "target"), g);
  const auto chain = make_mh_chain(g, std::move(target));
  std::cout << to_json(spectral_report(chain, damping, !skip_l)).dump(2) << '\n';
  return 0;
}

int cmd_validate(std::uint64_t seed) {
  ValidationOptions opt;
  opt.seed = seed;
  bool ok = true;
  for (const auto& r : run_validation(opt)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accelerated MCMC on finite state spaces"};
  app.require_subcommand(1);

  std::string config_path, preset;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--preset", preset, "Base preset the config is merged onto");
  run->add_option("--seed", seed, "Override the random seed");

  std::string graph_arg, target_arg;
  std::optional<double> damping;
  bool skip_l = false;
  auto* spectrum = app.add_subcommand("spectrum", "Print the spectral report of an MH chain as JSON");
  spectrum->add_option("--graph", graph_arg, "Graph spec: inline JSON or file")->required();
  spectrum->add_option("--target", target_arg, "Target spec: inline JSON or file")->required();
  spectrum->add_option("--damping", damping, "Damping d for the accelerated system matrix");
  spectrum->add_flag("--skip-l", skip_l, "Skip the 2n x 2n system spectrum");

  std::uint64_t validate_seed = 1;
  auto* validate = app.add_subcommand("validate", "Run the fast invariant suite");
  validate->add_option("--seed", validate_seed, "Seed for the random test points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, preset, seed);
    if (*spectrum) return cmd_spectrum(graph_arg, target_arg, damping, skip_l);
    if (*validate) return cmd_validate(validate_seed);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

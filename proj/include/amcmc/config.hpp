#ifndef AMCMC_CONFIG_HPP
#define AMCMC_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynamics.hpp"
#include "particles.hpp"

namespace amcmc {

using json = nlohmann::json;

/// Bad configuration; the message starts with the offending key path.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RunMode { ode, jump, both };

inline RunMode parse_mode(const std::string& s) {
  if (s == "ode") return RunMode::ode;
  if (s == "jump") return RunMode::jump;
  if (s == "both") return RunMode::both;
  throw config_error("mode: expected one of ode, jump, both; got '" + s + "'");
}

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::ode: return "ode";
    case RunMode::jump: return "jump";
    case RunMode::both: return "both";
  }
  return "both";
}

namespace config_detail {

inline const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) throw config_error(path + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw config_error(path + "." + key + ": missing");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw config_error(path + ": expected a number");
  return v.get<double>();
}

inline double positive(const json& v, const std::string& path) {
  const double x = number(v, path);
  if (!(x > 0.0) || !std::isfinite(x)) throw config_error(path + ": expected a positive number");
  return x;
}

inline std::uint64_t count(const json& v, const std::string& path, bool allow_zero = false) {
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x < 0.0 || x != std::floor(x) || x > 1.8e19) throw config_error(path + ": expected a nonnegative integer");
    if (!allow_zero && x == 0.0) throw config_error(path + ": expected a positive integer");
    return static_cast<std::uint64_t>(x);
  }
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw config_error(path + ": expected a nonnegative integer");
  const auto n = v.get<std::uint64_t>();
  if (!allow_zero && n == 0) throw config_error(path + ": expected a positive integer");
  return n;
}

inline std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw config_error(path + ": expected a string");
  return v.get<std::string>();
}

template <class F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& ex) {
    throw config_error(path + ": " + ex.what());
  }
}

}  // namespace config_detail

/// {"kind": "cycle" | "two_loop" | "hypercube" | "lattice", ...}
inline StateGraph parse_graph(const json& spec, const std::string& path = "graph") {
  using namespace config_detail;
  const auto kind = text(field(spec, path, "kind"), path + ".kind");
  return wrap(path, [&]() {
    if (kind == "cycle") return make_cycle(count(field(spec, path, "n"), path + ".n"));
    if (kind == "two_loop") {
      const auto& loops = field(spec, path, "loops");
      if (!loops.is_array() || loops.size() != 2) throw config_error(path + ".loops: expected two loop sizes");
      std::size_t interior = 0;
      if (spec.contains("bridge_interior")) interior = count(spec["bridge_interior"], path + ".bridge_interior", true);
      return make_two_loop({count(loops[0], path + ".loops[0]"), count(loops[1], path + ".loops[1]")}, interior);
    }
    if (kind == "hypercube") return make_hypercube(count(field(spec, path, "dimension"), path + ".dimension"));
    if (kind == "lattice") {
      const bool periodic = spec.value("periodic", false);
      return make_lattice(count(field(spec, path, "rows"), path + ".rows"), count(field(spec, path, "cols"), path + ".cols"), periodic);
    }
    throw config_error(path + ".kind: unknown graph kind '" + kind + "'");
  });
}

/**
 * {"kind": "explicit", "weights": [...]} or
 * {"kind": "explicit", "default": w, "overrides": [[index, w], ...]} or
 * {"kind": "gaussian_mixture", "centers": [[x, y], [x, y]], "scales": [s1, s2]}.
 */
inline TargetDistribution parse_target(const json& spec, const StateGraph& g, const std::string& path = "target") {
  using namespace config_detail;
  const auto kind = text(field(spec, path, "kind"), path + ".kind");
  return wrap(path, [&]() {
    if (kind == "explicit") {
      Vector w(static_cast<Eigen::Index>(g.size()));
      if (spec.contains("weights")) {
        const auto& ws = spec["weights"];
        if (!ws.is_array() || ws.size() != g.size())
          throw config_error(path + ".weights: expected " + std::to_string(g.size()) + " weights");
        for (std::size_t i = 0; i < ws.size(); ++i) w[static_cast<Eigen::Index>(i)] = number(ws[i], path + ".weights[" + std::to_string(i) + "]");
      } else {
        w.setConstant(positive(field(spec, path, "default"), path + ".default"));
        if (spec.contains("overrides")) {
          for (const auto& o : spec["overrides"]) {
            if (!o.is_array() || o.size() != 2) throw config_error(path + ".overrides: expected [index, weight] pairs");
            const auto idx = count(o[0], path + ".overrides", true);
            if (idx >= g.size()) throw config_error(path + ".overrides: index out of range");
            w[static_cast<Eigen::Index>(idx)] = number(o[1], path + ".overrides");
          }
        }
      }
      return TargetDistribution::from_weights(std::move(w));
    }
    if (kind == "gaussian_mixture") {
      const auto& c = field(spec, path, "centers");
      const auto& s = field(spec, path, "scales");
      if (!c.is_array() || c.size() != 2 || !s.is_array() || s.size() != 2)
        throw config_error(path + ": expected two centers and two scales");
      std::array<Point2, 2> centers{};
      for (std::size_t k = 0; k < 2; ++k) {
        if (!c[k].is_array() || c[k].size() != 2) throw config_error(path + ".centers: expected [x, y] points");
        centers[k] = {number(c[k][0], path + ".centers"), number(c[k][1], path + ".centers")};
      }
      return gaussian_mixture_target(g, centers, {number(s[0], path + ".scales"), number(s[1], path + ".scales")});
    }
    throw config_error(path + ".kind: unknown target kind '" + kind + "'");
  });
}

/**
 * {"kind": "constant", "value": d}
 * {"kind": "nesterov_floor", "numerator": a, "offset": t0, "floor": f}
 * {"kind": "piecewise", "pieces": [{"start": t, "schedule": {...}}, ...]}
 */
inline DampingSchedule parse_damping(const json& spec, const std::string& path = "damping") {
  using namespace config_detail;
  if (spec.is_number()) return DampingSchedule::constant(number(spec, path));
  const auto kind = text(field(spec, path, "kind"), path + ".kind");
  return wrap(path, [&]() {
    if (kind == "constant") return DampingSchedule::constant(number(field(spec, path, "value"), path + ".value"));
    if (kind == "nesterov_floor")
      return DampingSchedule::nesterov_floor(number(field(spec, path, "numerator"), path + ".numerator"),
                                             spec.contains("offset") ? number(spec["offset"], path + ".offset") : 0.0,
                                             number(field(spec, path, "floor"), path + ".floor"));
    if (kind == "piecewise") {
      const auto& pieces = field(spec, path, "pieces");
      if (!pieces.is_array() || pieces.empty()) throw config_error(path + ".pieces: expected a nonempty array");
      std::vector<double> starts;
      std::vector<DampingSchedule> scheds;
      for (std::size_t k = 0; k < pieces.size(); ++k) {
        const auto sub = path + ".pieces[" + std::to_string(k) + "]";
        starts.push_back(number(field(pieces[k], sub, "start"), sub + ".start"));
        scheds.push_back(parse_damping(field(pieces[k], sub, "schedule"), sub + ".schedule"));
      }
      return DampingSchedule::piecewise(std::move(starts), std::move(scheds));
    }
    throw config_error(path + ".kind: unknown damping kind '" + kind + "'");
  });
}

inline json damping_to_json(const DampingSchedule& s) {
  switch (s.kind()) {
    case DampingSchedule::Kind::constant: return {{"kind", "constant"}, {"value", s.value()}};
    case DampingSchedule::Kind::nesterov_floor:
      return {{"kind", "nesterov_floor"}, {"numerator", s.numerator()}, {"offset", s.offset()}, {"floor", s.value()}};
    case DampingSchedule::Kind::piecewise: {
      json pieces = json::array();
      for (std::size_t k = 0; k < s.starts().size(); ++k)
        pieces.push_back({{"start", s.starts()[k]}, {"schedule", damping_to_json(s.pieces()[k])}});
      return {{"kind", "piecewise"}, {"pieces", pieces}};
    }
  }
  return {};
}

/// A fully validated experiment description.
struct ExperimentConfig {
  json source;
  ReversibleChain chain;
  MethodSpec method;
  RunMode mode = RunMode::both;
  double dt = 0.1;
  std::uint64_t steps = 0;
  std::uint64_t particles = 1000;
  std::uint64_t warm_start = 0;
  DampingSchedule damping = DampingSchedule::constant(0.0);
  std::uint64_t seed = 0;
  std::string output = "out";
  double restart_threshold = 0.0;
  double min_dt = 1e-12;

  IntegrateOptions ode_options(bool accelerated) const {
    IntegrateOptions o;
    if (accelerated) o.method = method;
    o.schedule = damping;
    o.dt = dt;
    o.steps = steps;
    o.warm_start = warm_start;
    o.restart_threshold = restart_threshold;
    o.min_dt = min_dt;
    return o;
  }

  JumpConfig jump_config() const {
    JumpConfig j;
    j.particles = particles;
    j.dt = dt;
    j.steps = steps;
    j.warm_start = warm_start;
    j.seed = seed;
    j.min_dt = min_dt;
    return j;
  }
};

inline ExperimentConfig parse_config(const json& cfg) {
  using namespace config_detail;
  if (!cfg.is_object() || cfg.empty()) throw config_error("config: expected a nonempty JSON object");
  auto graph = parse_graph(field(cfg, "config", "graph"));
  auto target = parse_target(field(cfg, "config", "target"), graph);
  auto chain = make_mh_chain(std::move(graph), std::move(target));

  const auto method_name = text(field(cfg, "config", "method"), "method");
  Matrix theta;
  if (cfg.contains("con_theta")) {
    const auto& t = cfg["con_theta"];
    const auto n = static_cast<Eigen::Index>(chain.size());
    if (!t.is_array() || t.size() != chain.size()) throw config_error("con_theta: expected an n x n matrix");
    theta.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = t[static_cast<std::size_t>(i)];
      if (!row.is_array() || row.size() != chain.size()) throw config_error("con_theta: expected an n x n matrix");
      for (Eigen::Index j = 0; j < n; ++j) theta(i, j) = number(row[static_cast<std::size_t>(j)], "con_theta");
    }
  }
  auto method = wrap("method", [&]() { return MethodSpec::make(parse_method(method_name), theta); });

  ExperimentConfig out{cfg, std::move(chain), std::move(method)};
  if (cfg.contains("mode")) out.mode = parse_mode(text(cfg["mode"], "mode"));
  out.dt = positive(field(cfg, "config", "dt"), "dt");
  out.steps = count(field(cfg, "config", "steps"), "steps");
  if (cfg.contains("particles")) out.particles = count(cfg["particles"], "particles");
  if (cfg.contains("warm_start")) out.warm_start = count(cfg["warm_start"], "warm_start", true);
  if (cfg.contains("damping")) out.damping = parse_damping(cfg["damping"]);
  if (cfg.contains("seed")) out.seed = count(cfg["seed"], "seed", true);
  if (cfg.contains("output")) out.output = text(cfg["output"], "output");
  if (cfg.contains("restart_threshold")) out.restart_threshold = number(cfg["restart_threshold"], "restart_threshold");
  if (cfg.contains("min_dt")) out.min_dt = positive(cfg["min_dt"], "min_dt");
  if (out.warm_start > out.steps) throw config_error("warm_start: exceeds steps");
  return out;
}

/// Parses JSON text; syntax errors carry the line and column from the parser.
inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    throw config_error(origin + ": " + ex.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path);
}

inline std::vector<std::string> preset_names() {
  return {"c3-chi", "c3-chi-fine", "twoloop-logfisher", "twoloop-confisher", "hypercube-logfisher", "lattice-logfisher",
          "lattice-logfisher-reduced"};
}

inline json c3_graph_json() { return {{"kind", "cycle"}, {"n", 3}}; }
inline json c3_target_json() { return {{"kind", "explicit"}, {"weights", {0.9913, 0.0044, 0.0043}}}; }
inline json two_loop_graph_json() { return {{"kind", "two_loop"}, {"loops", {3, 3}}, {"bridge_interior", 2}}; }
/// 4/27, 4/27, 4/27, 1/18, 1/18, 4/27, 4/27, 4/27 scaled by 54.
inline json two_loop_target_json() { return {{"kind", "explicit"}, {"weights", {8, 8, 8, 3, 3, 8, 8, 8}}}; }
inline json hypercube_graph_json() { return {{"kind", "hypercube"}, {"dimension", 6}}; }
inline json hypercube_target_json() {
  return {{"kind", "explicit"}, {"default", 1.0}, {"overrides", {{0, 16.0}, {63, 16.0}}}};
}
inline json lattice_graph_json() { return {{"kind", "lattice"}, {"rows", 25}, {"cols", 25}, {"periodic", true}}; }
inline json lattice_target_json() {
  return {{"kind", "gaussian_mixture"}, {"centers", {{0.25, 0.25}, {0.75, 0.75}}}, {"scales", {10.0, 40.0}}};
}

inline json two_loop_damping_json() {
  return {{"kind", "piecewise"},
          {"pieces",
           {{{"start", 0.0}, {"schedule", {{"kind", "constant"}, {"value", 0.5}}}},
            {{"start", 3.0}, {"schedule", {{"kind", "nesterov_floor"}, {"numerator", 3.0}, {"offset", 2.0}, {"floor", 0.6}}}}}}};
}

inline json preset_json(const std::string& name) {
  json base = {{"mode", "both"}, {"seed", 0}, {"output", "out/" + name}};
  auto merge = [&](json extra) {
    base.update(extra);
    return base;
  };
  if (name == "c3-chi" || name == "c3-chi-fine") {
    const bool fine = name == "c3-chi-fine";
    return merge({{"graph", c3_graph_json()},
                  {"target", c3_target_json()},
                  {"method", "chi_squared"},
                  {"dt", fine ? 0.01 : 0.1},
                  {"steps", fine ? 6500 : 650},
                  {"particles", 1000000},
                  {"warm_start", 0},
                  {"damping", {{"kind", "constant"}, {"value", 1.4220}}}});
  }
  if (name == "twoloop-logfisher" || name == "twoloop-confisher") {
    return merge({{"graph", two_loop_graph_json()},
                  {"target", two_loop_target_json()},
                  {"method", name == "twoloop-logfisher" ? "log_fisher" : "con_fisher"},
                  {"dt", 0.1},
                  {"steps", 1000},
                  {"particles", 10000},
                  {"warm_start", 0},
                  {"damping", two_loop_damping_json()}});
  }
  if (name == "hypercube-logfisher") {
    return merge({{"graph", hypercube_graph_json()},
                  {"target", hypercube_target_json()},
                  {"method", "log_fisher"},
                  {"dt", 0.01},
                  {"steps", 6000},
                  {"particles", 10000},
                  {"warm_start", 100},
                  {"damping", {{"kind", "nesterov_floor"}, {"numerator", 2.0 * std::sqrt(0.0468)}, {"offset", 0.0}, {"floor", 0.17}}}});
  }
  if (name == "lattice-logfisher" || name == "lattice-logfisher-reduced") {
    const bool reduced = name == "lattice-logfisher-reduced";
    return merge({{"graph", lattice_graph_json()},
                  {"target", lattice_target_json()},
                  {"method", "log_fisher"},
                  {"dt", 0.01},
                  {"steps", reduced ? 10000 : 150000},
                  {"particles", reduced ? 10000 : 500000},
                  {"warm_start", 2999},
                  {"damping", {{"kind", "constant"}, {"value", 0.0065}}}});
  }
  throw config_error("preset: unknown preset '" + name + "'");
}

inline ExperimentConfig preset_config(const std::string& name) { return parse_config(preset_json(name)); }

}  // namespace amcmc

#endif  // AMCMC_CONFIG_HPP

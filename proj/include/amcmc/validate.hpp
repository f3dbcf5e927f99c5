#ifndef AMCMC_VALIDATE_HPP
#define AMCMC_VALIDATE_HPP

#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "particles.hpp"
#include "spectral.hpp"

namespace amcmc {

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

using GradientFn = std::function<Vector(const MethodSpec&, const ReversibleChain&, const Vector&)>;

struct ValidationOptions {
  std::uint64_t seed = 1;
  /// Gradient under test; defaults to potential_grad.
  GradientFn gradient;
};

namespace validate_detail {

inline Vector random_interior(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vector p(static_cast<Eigen::Index>(n));
  for (auto& x : p) x = u(rng);
  return p / p.sum();
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = g(rng);
  return v;
}

/// Random connected reversible chain: a spanning path plus extra edges, random weights.
inline ReversibleChain random_chain(std::size_t n, std::mt19937_64& rng) {
  std::vector<Edge> edges;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({order[i], order[i + 1]});
  std::bernoulli_distribution extra(0.35);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      bool present = false;
      for (const auto& e : edges) present = present || (std::min(e.a, e.b) == i && std::max(e.a, e.b) == j);
      if (!present && extra(rng)) edges.push_back({i, j});
    }
  std::uniform_real_distribution<double> w(0.05, 1.0);
  Vector weights(static_cast<Eigen::Index>(n));
  for (auto& x : weights) x = w(rng);
  return make_mh_chain(StateGraph(n, std::move(edges)), TargetDistribution::from_weights(std::move(weights)));
}

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

inline double central_difference(const std::function<double(const Vector&)>& f, const Vector& p, Eigen::Index i, double h) {
  Vector a = p;
  Vector b = p;
  a[i] += h;
  b[i] -= h;
  return (f(a) - f(b)) / (2.0 * h);
}

}  // namespace validate_detail

/// Analytic gradient versus central differences (h = 1e-6), relative error < 1e-5.
inline CheckResult check_gradients(const ReversibleChain& chain, std::mt19937_64& rng, const GradientFn& grad, int trials = 5) {
  double worst = 0.0;
  for (auto m : {Method::chi_squared, Method::kl, Method::log_fisher, Method::con_fisher}) {
    const auto spec = MethodSpec::make(m);
    auto u = [&](const Vector& q) { return potential(spec, chain, q); };
    for (int t = 0; t < trials; ++t) {
      const Vector p = validate_detail::random_interior(chain.size(), rng);
      const Vector g = grad(spec, chain, p);
      Vector fd(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) fd[i] = validate_detail::central_difference(u, p, i, 1e-6);
      worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-12));
    }
  }
  return {"gradient_finite_difference", worst < 1e-5, "max relative error " + validate_detail::num(worst)};
}

/// Symmetric, zero row sums, PSD, one-dimensional kernel.
inline CheckResult check_onsager(const ReversibleChain& chain, std::mt19937_64& rng) {
  bool ok = true;
  double worst_asym = 0.0, worst_row = 0.0, min_second = std::numeric_limits<double>::infinity();
  for (auto m : {Method::chi_squared, Method::kl, Method::log_fisher, Method::con_fisher}) {
    const Matrix k = onsager_matrix(MethodSpec::make(m), chain, validate_detail::random_interior(chain.size(), rng));
    worst_asym = std::max(worst_asym, (k - k.transpose()).cwiseAbs().maxCoeff());
    worst_row = std::max(worst_row, k.rowwise().sum().cwiseAbs().maxCoeff());
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(k, Eigen::EigenvaluesOnly).eigenvalues();
    min_second = std::min(min_second, ev[1]);
    ok = ok && ev[0] > -1e-12 && ev[1] > 1e-10;
  }
  ok = ok && worst_asym < 1e-12 && worst_row < 1e-12;
  return {"onsager_laplacian", ok,
          "asym " + validate_detail::num(worst_asym) + ", row " + validate_detail::num(worst_row) + ", second eigenvalue " + validate_detail::num(min_second)};
}

inline CheckResult check_q_spectrum(const ReversibleChain& chain) {
  const Vector ev = q_spectrum(chain);
  bool ok = std::abs(ev[0]) < 1e-12;
  for (Eigen::Index i = 1; i < ev.size(); ++i) ok = ok && ev[i] < -1e-12;
  return {"q_spectrum_simple_zero", ok, "alpha* " + validate_detail::num(ev[1])};
}

/// p Qbar = psi K within 1e-12.
inline CheckResult check_psi_rates(const ReversibleChain& chain, std::mt19937_64& rng) {
  double worst = 0.0;
  for (auto m : {Method::chi_squared, Method::kl, Method::log_fisher, Method::con_fisher}) {
    const auto spec = MethodSpec::make(m);
    const Vector p = validate_detail::random_interior(chain.size(), rng);
    const Vector psi = validate_detail::random_vector(chain.size(), rng);
    const SparseRowMatrix q = build_psi_rate_matrix(spec, chain, p, psi);
    const Vector lhs = q.transpose() * p;
    worst = std::max(worst, (lhs - p_rhs(spec, chain, p, psi)).cwiseAbs().maxCoeff());
  }
  return {"psi_rate_identity", worst < 1e-12, "max deviation " + validate_detail::num(worst)};
}

/// After init_momentum the first staggered p-update equals one MH master step.
inline CheckResult check_warm_start(const ReversibleChain& chain, std::mt19937_64& rng) {
  double worst = 0.0;
  const double dt = 0.5 * std::min(1.0, mh_stable_dt(chain));
  for (auto m : {Method::chi_squared, Method::kl, Method::log_fisher, Method::con_fisher}) {
    const auto spec = MethodSpec::make(m);
    const Vector p = validate_detail::random_interior(chain.size(), rng);
    SimplexState s{p, init_momentum(spec, p, chain.pi()), 0.0};
    const auto next = staggered_step(s, spec, chain, DampingSchedule::constant(1.0), dt);
    worst = std::max(worst, (next.p - mh_master_step(p, chain.rates().values, dt)).cwiseAbs().maxCoeff());
  }
  return {"warm_start_identity", worst < 1e-12, "max deviation " + validate_detail::num(worst)};
}

/// Both directions of the real-eigenvalue map mu -> mu (d + mu) on random chains.
inline CheckResult check_lemma_map(std::mt19937_64& rng, int chains = 5) {
  bool ok = true;
  std::uniform_int_distribution<std::size_t> size(2, 8);
  std::uniform_real_distribution<double> damp(0.05, 3.0);
  for (int c = 0; c < chains; ++c) {
    const auto chain = validate_detail::random_chain(size(rng), rng);
    const Vector qe = q_spectrum(chain);
    for (int k = 0; k < 3; ++k) {
      const double d = damp(rng);
      const auto le = l_spectrum(chi_system_matrix(chain.pi(), chain.weights().values, d));
      for (double mu : real_eigenvalues(le)) ok = ok && map_check(mu, d, qe);
      ok = ok && roots_present(le, qe, d);
    }
  }
  return {"eigenvalue_map", ok, ok ? "all real eigenvalues map into spec(Q)" : "map violated"};
}

/// |sum p - 1| < 1e-10 on short runs of every method.
inline CheckResult check_mass(const ReversibleChain& chain, std::uint64_t steps = 1000) {
  double worst = 0.0;
  IntegrateOptions opt;
  opt.dt = 0.5 * std::min(0.1, mh_stable_dt(chain));
  opt.steps = steps;
  opt.schedule = DampingSchedule::constant(0.5);
  for (int k = 0; k < 5; ++k) {
    if (k < 4) opt.method = MethodSpec::make(static_cast<Method>(k));
    else opt.method.reset();
    const auto traj = integrate(chain, uniform_density(chain.size()), opt);
    worst = std::max(worst, std::abs(traj.final_p.sum() - 1.0));
  }
  return {"mass_conservation", worst < 1e-10, "max drift " + validate_detail::num(worst)};
}

inline CheckResult check_hessian_at_pi(const ReversibleChain& chain) {
  const Matrix k = onsager_matrix(MethodSpec::make(Method::con_fisher), chain, chain.pi());
  const double dev = (confisher_hessian(chain, chain.pi()) - confisher_hessian_at_pi(chain.pi(), k)).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, confisher_hessian_at_pi(chain.pi(), k).cwiseAbs().maxCoeff());
  return {"hessian_at_target", dev <= 1e-12 * scale, "max deviation " + validate_detail::num(dev)};
}

/// Fast invariant suite on the two-loop and C3 chains.
inline std::vector<CheckResult> run_validation(const ValidationOptions& options = {}) {
  std::mt19937_64 rng(options.seed);
  const GradientFn grad = options.gradient ? options.gradient : GradientFn([](const MethodSpec& s, const ReversibleChain& c, const Vector& p) {
    return potential_grad(s, c, p);
  });
  const auto two_loop = make_mh_chain(parse_graph(two_loop_graph_json()), parse_target(two_loop_target_json(), parse_graph(two_loop_graph_json())));
  const auto c3 = make_mh_chain(parse_graph(c3_graph_json()), parse_target(c3_target_json(), parse_graph(c3_graph_json())));
  std::vector<CheckResult> out;
  out.push_back(check_gradients(two_loop, rng, grad));
  out.push_back(check_onsager(two_loop, rng));
  out.push_back(check_q_spectrum(two_loop));
  out.push_back(check_q_spectrum(c3));
  out.push_back(check_psi_rates(two_loop, rng));
  out.push_back(check_warm_start(two_loop, rng));
  out.push_back(check_lemma_map(rng));
  out.push_back(check_mass(two_loop));
  out.push_back(check_hessian_at_pi(two_loop));
  return out;
}

}  // namespace amcmc

#endif  // AMCMC_VALIDATE_HPP

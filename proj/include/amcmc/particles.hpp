#ifndef AMCMC_PARTICLES_HPP
#define AMCMC_PARTICLES_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "dynamics.hpp"

namespace amcmc {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Per-state particle counts.
struct ParticleEnsemble {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  static ParticleEnsemble from_counts(std::vector<std::uint64_t> counts) {
    ParticleEnsemble e;
    for (auto c : counts) e.total += c;
    if (e.total < 1) throw std::invalid_argument("ensemble needs at least one particle");
    e.counts = std::move(counts);
    return e;
  }

  std::size_t size() const noexcept { return counts.size(); }
  bool has_empty_state() const {
    for (auto c : counts)
      if (c == 0) return true;
    return false;
  }
};

inline Vector empirical_density(const ParticleEnsemble& e) {
  if (e.total < 1) throw std::invalid_argument("ensemble needs at least one particle");
  Vector p(static_cast<Eigen::Index>(e.counts.size()));
  const double m = static_cast<double>(e.total);
  for (std::size_t i = 0; i < e.counts.size(); ++i) p[static_cast<Eigen::Index>(i)] = static_cast<double>(e.counts[i]) / m;
  return p;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/**
 * Random streams keyed by (seed, iteration, state). Every per-state draw gets
 * its own engine, so results do not depend on the order states are visited.
 */
class KeyedStream {
 public:
  static constexpr std::uint64_t kInitialIteration = ~std::uint64_t{0};

  explicit KeyedStream(std::uint64_t seed) : seed_(seed) {}

  std::mt19937_64 engine(std::uint64_t iteration, std::uint64_t state) const {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ iteration);
    h = splitmix64(h ^ state);
    return std::mt19937_64(h);
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

namespace detail {

/// Multinomial(count, probs) via conditional binomials, added into `out`.
template <class Engine, class Entries>
void multinomial_into(Engine& rng, std::uint64_t count, const Entries& entries, std::vector<std::uint64_t>& out) {
  double mass_left = 0.0;
  for (const auto& [j, w] : entries) mass_left += w;
  std::uint64_t remaining = count;
  for (std::size_t k = 0; k < entries.size() && remaining > 0; ++k) {
    const auto [j, w] = entries[k];
    if (k + 1 == entries.size() || w >= mass_left) {
      out[j] += remaining;
      return;
    }
    const double prob = std::clamp(w / mass_left, 0.0, 1.0);
    std::binomial_distribution<std::uint64_t> draw(remaining, prob);
    const auto x = draw(rng);
    out[j] += x;
    remaining -= x;
    mass_left -= w;
  }
}

}  // namespace detail

/// Row-stochastic P = I + Q dt_used together with dt_used.
struct Transition {
  SparseRowMatrix p;
  double dt_used;
};

/**
 * Qbar_ij = omega_ij theta_ij (psi_j - psi_i)_+ / p_i off the diagonal,
 * rows summing to zero. Requires p > 0.
 */
inline SparseRowMatrix build_psi_rate_matrix(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p, const Vector& psi) {
  detail::require_size(chain, p, "density");
  detail::require_size(chain, psi, "momentum");
  detail::require_positive(p, true);
  const auto c = conductances(spec, chain, p);
  const auto n = static_cast<Eigen::Index>(chain.size());
  std::vector<Eigen::Triplet<double>> triplets;
  Vector diag = Vector::Zero(n);
  const auto& edges = chain.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(edges[e].i);
    const auto j = static_cast<Eigen::Index>(edges[e].j);
    const double d = psi[j] - psi[i];
    if (d > 0.0) {
      const double r = c[e] * d / p[i];
      triplets.emplace_back(i, j, r);
      diag[i] -= r;
    } else if (d < 0.0) {
      const double r = -c[e] * d / p[j];
      triplets.emplace_back(j, i, r);
      diag[j] -= r;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) triplets.emplace_back(i, i, diag[i]);
  SparseRowMatrix q(n, n);
  q.setFromTriplets(triplets.begin(), triplets.end());
  return q;
}

inline SparseRowMatrix to_sparse(const Matrix& q) { return q.sparseView(); }

/**
 * P = I + Q dt_used with dt_used = dt / 10^k for the smallest k making P
 * stochastic with a strictly positive diagonal. Throws step_underflow below
 * `min_dt`.
 */
inline Transition transition_matrix(const SparseRowMatrix& q, double dt, double min_dt = 1e-12) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (q.rows() != q.cols()) throw std::invalid_argument("rate matrix must be square");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < q.outerSize(); ++i) {
    double row = 0.0;
    double scale = 0.0;
    for (SparseRowMatrix::InnerIterator it(q, i); it; ++it) {
      if (it.col() == i) {
        worst = std::max(worst, -it.value());
      } else if (it.value() < 0.0) {
        throw std::invalid_argument("rate matrix has a negative off-diagonal entry");
      }
      row += it.value();
      scale = std::max(scale, std::abs(it.value()));
    }
    if (std::abs(row) > 1e-10 * std::max(1.0, scale)) throw std::invalid_argument("rate matrix rows must sum to zero");
  }
  double h = dt;
  while (1.0 - worst * h <= 0.0) {
    h /= 10.0;
    if (h < min_dt) throw step_underflow("transition step fell below the configured minimum");
  }
  SparseRowMatrix ident(q.rows(), q.cols());
  ident.setIdentity();
  SparseRowMatrix p = ident + h * q;
  p.prune(0.0);
  return {std::move(p), h};
}

inline Transition transition_matrix(const Matrix& q, double dt, double min_dt = 1e-12) {
  return transition_matrix(to_sparse(q), dt, min_dt);
}

/// Each state's particles move by one multinomial draw from their row of P.
inline ParticleEnsemble jump_step(const ParticleEnsemble& e, const SparseRowMatrix& p, const KeyedStream& stream, std::uint64_t iteration) {
  if (static_cast<std::size_t>(p.rows()) != e.size()) throw std::invalid_argument("transition matrix and ensemble sizes differ");
  ParticleEnsemble next;
  next.total = e.total;
  next.counts.assign(e.size(), 0);
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t s = 0; s < e.size(); ++s) {
    if (e.counts[s] == 0) continue;
    row.clear();
    for (SparseRowMatrix::InnerIterator it(p, static_cast<Eigen::Index>(s)); it; ++it)
      if (it.value() > 0.0) row.emplace_back(static_cast<std::size_t>(it.col()), it.value());
    if (row.empty()) throw std::invalid_argument("transition row has no mass");
    auto rng = stream.engine(iteration, s);
    detail::multinomial_into(rng, e.counts[s], row, next.counts);
  }
  return next;
}

/// M particles spread over n states by a multinomial draw from the uniform density.
inline ParticleEnsemble initial_ensemble(std::size_t n, std::uint64_t m, const KeyedStream& stream) {
  if (n < 1 || m < 1) throw std::invalid_argument("ensemble needs states and particles");
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t i = 0; i < n; ++i) row.emplace_back(i, 1.0 / static_cast<double>(n));
  ParticleEnsemble e;
  e.total = m;
  e.counts.assign(n, 0);
  auto rng = stream.engine(KeyedStream::kInitialIteration, 0);
  detail::multinomial_into(rng, m, row, e.counts);
  return e;
}

enum class RestartPolicy { add_particle, fail };

struct JumpConfig {
  std::uint64_t particles = 1000;
  double dt = 0.1;
  std::uint64_t steps = 0;
  std::uint64_t warm_start = 0;
  std::uint64_t seed = 0;
  RestartPolicy restart_policy = RestartPolicy::add_particle;
  double min_dt = 1e-12;
};

struct JumpResult {
  Trajectory trajectory;
  ParticleEnsemble ensemble;
};

struct RestartOutcome {
  ParticleEnsemble ensemble;
  Vector psi;
};

/// Adds one particle to an empty state and resets the momentum from the new density.
inline RestartOutcome restart_jump(const ParticleEnsemble& e, const MethodSpec& spec, const Vector& pi, std::size_t state) {
  if (state >= e.size()) throw std::invalid_argument("restart state out of range");
  if (e.counts[state] != 0) throw std::invalid_argument("restart requires an empty state");
  RestartOutcome out{e, {}};
  out.ensemble.counts[state] = 1;
  out.ensemble.total += 1;
  out.psi = init_momentum(spec, empirical_density(out.ensemble), pi);
  return out;
}

/// Fills every empty state with one particle (index order), then resets psi once.
inline std::pair<RestartOutcome, std::uint64_t> restart_empty_states(const ParticleEnsemble& e, const MethodSpec& spec, const Vector& pi) {
  RestartOutcome out{e, {}};
  std::uint64_t added = 0;
  for (auto& c : out.ensemble.counts) {
    if (c == 0) {
      c = 1;
      ++added;
    }
  }
  out.ensemble.total += added;
  out.psi = init_momentum(spec, empirical_density(out.ensemble), pi);
  return {std::move(out), added};
}

namespace detail {

inline TrajectoryRecord jump_record(std::uint64_t iter, double t, double dt, const Vector& p, const Vector& pi, double ham, double pot,
                                    std::uint64_t restarts, std::uint64_t total, std::uint64_t restarts_now) {
  TrajectoryRecord r;
  r.iter = iter;
  r.t = t;
  r.dt = dt;
  r.l2_error = (p - pi).norm();
  r.hamiltonian = ham;
  r.potential = pot;
  r.min_p = p.minCoeff();
  r.restarts = restarts;
  r.total_particles = total;
  r.restarts_this_iter = restarts_now;
  return r;
}

struct MhJumpLoop {
  const ReversibleChain& chain;
  const JumpConfig& cfg;
  KeyedStream stream;
  SparseRowMatrix rates = to_sparse(chain.rates().values);

  /// One MH jump iteration; returns dt_used.
  double step(ParticleEnsemble& e, double dt, std::uint64_t iteration) const {
    const auto tr = transition_matrix(rates, dt, cfg.min_dt);
    e = jump_step(e, tr.p, stream, iteration);
    return tr.dt_used;
  }

  TrajectoryRecord record(std::uint64_t iter, double t, double dt, const ParticleEnsemble& e) const {
    const Vector p = empirical_density(e);
    const double d = f_divergence(FDivergence::kl, p, chain.pi());
    return jump_record(iter, t, dt, p, chain.pi(), d, d, 0, e.total, 0);
  }
};

}  // namespace detail

/// Algorithm-2 style MH particle sampler with a time-homogeneous P = I + Q dt.
inline JumpResult run_mh_jump(const JumpConfig& cfg, const ReversibleChain& chain) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("time step must be positive");
  detail::MhJumpLoop loop{chain, cfg, KeyedStream(cfg.seed)};
  auto e = initial_ensemble(chain.size(), cfg.particles, loop.stream);
  Trajectory traj;
  traj.jump = true;
  traj.records.reserve(cfg.steps + 1);
  double t = 0.0;
  double h = cfg.dt;
  traj.records.push_back(loop.record(0, t, h, e));
  for (std::uint64_t k = 0; k < cfg.steps; ++k) {
    h = loop.step(e, h, k);
    t += h;
    traj.records.push_back(loop.record(k + 1, t, h, e));
  }
  traj.final_p = empirical_density(e);
  return {std::move(traj), std::move(e)};
}

/**
 * Algorithm-3 style aMCMC particle sampler: `warm_start` MH iterations, then
 * jumps driven by Qbar(p_jump, psi) with psi advanced by the ODE using the
 * post-jump empirical density. Empty states trigger a restart.
 */
inline JumpResult run_amcmc_jump(const JumpConfig& cfg, const ReversibleChain& chain, const MethodSpec& spec,
                                 const DampingSchedule& schedule) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("time step must be positive");
  detail::MhJumpLoop loop{chain, cfg, KeyedStream(cfg.seed)};
  const auto& pi = chain.pi();
  auto e = initial_ensemble(chain.size(), cfg.particles, loop.stream);
  Trajectory traj;
  traj.jump = true;
  traj.records.reserve(cfg.steps + 1);
  double t = 0.0;
  double h = cfg.dt;
  std::uint64_t restarts = 0;
  Vector psi;

  auto accelerated_record = [&](std::uint64_t iter, std::uint64_t now) {
    const Vector p = empirical_density(e);
    const double u = potential(spec, chain, p);
    return detail::jump_record(iter, t, h, p, pi, u + kinetic_energy(spec, chain, p, psi), u, restarts, e.total, now);
  };
  auto fill_empty = [&]() -> std::uint64_t {
    if (!e.has_empty_state()) return 0;
    if (cfg.restart_policy == RestartPolicy::fail) throw positivity_violation("empty state in particle ensemble");
    auto [out, added] = restart_empty_states(e, spec, pi);
    e = std::move(out.ensemble);
    psi = std::move(out.psi);
    restarts += added;
    return added;
  };
  auto start_momentum = [&]() -> std::uint64_t {
    const auto added = fill_empty();
    if (added == 0) psi = init_momentum(spec, empirical_density(e), pi);
    return added;
  };

  if (cfg.warm_start == 0 && cfg.steps > 0) {
    const auto added = start_momentum();
    traj.records.push_back(accelerated_record(0, added));
  } else {
    traj.records.push_back(loop.record(0, t, h, e));
  }

  for (std::uint64_t k = 0; k < cfg.steps; ++k) {
    if (k < cfg.warm_start) {
      h = loop.step(e, h, k);
      t += h;
      if (k + 1 == cfg.warm_start && k + 1 < cfg.steps) {
        const auto added = start_momentum();
        traj.records.push_back(accelerated_record(k + 1, added));
      } else {
        traj.records.push_back(loop.record(k + 1, t, h, e));
      }
      continue;
    }
    const double t_k = t;
    const auto qbar = build_psi_rate_matrix(spec, chain, empirical_density(e), psi);
    const auto tr = transition_matrix(qbar, h, cfg.min_dt);
    h = tr.dt_used;
    e = jump_step(e, tr.p, loop.stream, k);
    t = t_k + h;
    auto added = fill_empty();
    if (added == 0) psi += h * psi_rhs(spec, chain, empirical_density(e), psi, schedule(t_k));
    traj.records.push_back(accelerated_record(k + 1, added));
  }
  traj.final_p = empirical_density(e);
  traj.final_psi = psi;
  return {std::move(traj), std::move(e)};
}

}  // namespace amcmc

#endif  // AMCMC_PARTICLES_HPP

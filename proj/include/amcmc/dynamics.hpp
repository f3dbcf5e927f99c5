#ifndef AMCMC_DYNAMICS_HPP
#define AMCMC_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "geometry.hpp"

namespace amcmc {

/// Density/momentum pair at time t.
struct SimplexState {
  Vector p;
  Vector psi;
  double t = 0.0;
};

/**
 * Friction schedule gamma(t).
 *
 * nesterov_floor(a, t0, floor) is max(a / (t - t0), floor) for t > t0 and
 * `floor` for t <= t0. A piecewise schedule switches to piece k at starts[k].
 */
class DampingSchedule {
 public:
  enum class Kind { constant, nesterov_floor, piecewise };

  static DampingSchedule constant(double d) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("damping must be finite and nonnegative");
    DampingSchedule s;
    s.kind_ = Kind::constant;
    s.value_ = d;
    return s;
  }

  static DampingSchedule nesterov_floor(double numerator, double offset, double floor) {
    if (!(numerator >= 0.0) || !(floor >= 0.0) || !std::isfinite(offset))
      throw std::invalid_argument("nesterov damping needs nonnegative numerator and floor");
    DampingSchedule s;
    s.kind_ = Kind::nesterov_floor;
    s.numerator_ = numerator;
    s.offset_ = offset;
    s.value_ = floor;
    return s;
  }

  static DampingSchedule piecewise(std::vector<double> starts, std::vector<DampingSchedule> pieces) {
    if (starts.empty() || starts.size() != pieces.size()) throw std::invalid_argument("piecewise damping needs one start per piece");
    if (starts.front() != 0.0) throw std::invalid_argument("piecewise damping must start at t = 0");
    if (!std::is_sorted(starts.begin(), starts.end()) ||
        std::adjacent_find(starts.begin(), starts.end()) != starts.end())
      throw std::invalid_argument("piecewise damping starts must be strictly increasing");
    DampingSchedule s;
    s.kind_ = Kind::piecewise;
    s.starts_ = std::move(starts);
    s.pieces_ = std::move(pieces);
    return s;
  }

  double operator()(double t) const {
    switch (kind_) {
      case Kind::constant: return value_;
      case Kind::nesterov_floor:
        if (t <= offset_) return value_;
        return std::max(numerator_ / (t - offset_), value_);
      case Kind::piecewise: {
        const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
        const auto k = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
        return pieces_[k](t);
      }
    }
    return value_;
  }

  Kind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }
  double numerator() const noexcept { return numerator_; }
  double offset() const noexcept { return offset_; }
  const std::vector<double>& starts() const noexcept { return starts_; }
  const std::vector<DampingSchedule>& pieces() const noexcept { return pieces_; }

 private:
  DampingSchedule() = default;
  Kind kind_ = Kind::constant;
  double value_ = 0.0;
  double numerator_ = 0.0;
  double offset_ = 0.0;
  std::vector<double> starts_;
  std::vector<DampingSchedule> pieces_;
};

struct TrajectoryRecord {
  std::uint64_t iter = 0;
  double t = 0.0;
  double dt = 0.0;
  double l2_error = 0.0;
  double hamiltonian = 0.0;
  double potential = 0.0;
  double min_p = 0.0;
  std::uint64_t restarts = 0;
  std::uint64_t total_particles = 0;
  std::uint64_t restarts_this_iter = 0;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  Vector final_p;
  Vector final_psi;
  bool jump = false;
};

/// p (I + Q dt); throws step_too_large if I + Q dt has a negative entry.
inline Vector mh_master_step(const Vector& p, const Matrix& q, double dt) {
  if (q.rows() != p.size() || q.cols() != p.size()) throw std::invalid_argument("rate matrix and density sizes differ");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    if (1.0 + q(i, i) * dt < 0.0) throw step_too_large("I + Q dt has a negative diagonal entry");
  return p + dt * (q.transpose() * p);
}

/// p Q for the chain's rate matrix, edge by edge.
inline Vector mh_rhs(const ReversibleChain& chain, const Vector& p) {
  Vector out = Vector::Zero(p.size());
  for (const auto& e : chain.edges()) {
    const double flow = p[e.i] * e.rate_ij - p[e.j] * e.rate_ji;
    out[e.i] -= flow;
    out[e.j] += flow;
  }
  return out;
}

/// Largest dt for which I + Q dt stays stochastic, i.e. 1 / max_i |Q_ii|.
inline double mh_stable_dt(const ReversibleChain& chain) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < chain.rates().values.rows(); ++i) worst = std::max(worst, -chain.rates().values(i, i));
  return worst > 0.0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

inline Vector p_rhs(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p, const Vector& psi) {
  detail::require_size(chain, psi, "momentum");
  return apply_onsager(chain, conductances(spec, chain, p), psi);
}

/// -gamma psi - 1/2 d/dp (psi K psi^T) - grad U.
inline Vector psi_rhs(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p, const Vector& psi, double gamma) {
  detail::require_size(chain, psi, "momentum");
  Vector out = -gamma * psi - potential_grad(spec, chain, p);
  if (spec.mobility.kind == MobilityKind::log_mean) {
    detail::require_positive(p, true);
    const auto& w = chain.target().unnormalized();
    for (const auto& e : chain.edges()) {
      const double d = psi[e.i] - psi[e.j];
      const double u = std::log(p[e.i] / p[e.j]) + std::log(w[e.j] / w[e.i]);
      const double gi = std::abs(u) < 1e-4 ? 0.5 - u / 6.0 + u * u / 24.0 : (u - 1.0 + std::exp(-u)) / (u * u);
      const double gj = std::abs(u) < 1e-4 ? 0.5 + u / 6.0 + u * u / 24.0 : (-u - 1.0 + std::exp(u)) / (u * u);
      out[e.i] -= 0.5 * e.rate_ij * gi * d * d;
      out[e.j] -= 0.5 * e.rate_ji * gj * d * d;
    }
  }
  return out;
}

/// psi = -p/pi (chi_squared, con_fisher) or -log(p/pi) (kl, log_fisher).
inline Vector init_momentum(const MethodSpec& spec, const Vector& p, const Vector& pi) {
  if (p.size() != pi.size()) throw std::invalid_argument("density and target lengths differ");
  if (spec.linear_momentum()) return -(p.cwiseQuotient(pi));
  detail::require_positive(p, false);
  return -((p.array() / pi.array()).log()).matrix();
}

/// p' = p + dt psi K(p), then psi' = psi + dt psi_rhs(p', psi, gamma(t)).
inline SimplexState staggered_step(const SimplexState& s, const MethodSpec& spec, const ReversibleChain& chain,
                                   const DampingSchedule& schedule, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  SimplexState next;
  next.p = s.p + dt * p_rhs(spec, chain, s.p, s.psi);
  next.psi = s.psi + dt * psi_rhs(spec, chain, next.p, s.psi, schedule(s.t));
  next.t = s.t + dt;
  return next;
}

/// Momentum reset after p touched the positivity threshold; p is kept.
inline SimplexState restart_ode(const SimplexState& s, const MethodSpec& spec, const ReversibleChain& chain) {
  SimplexState next = s;
  next.psi = init_momentum(spec, s.p, chain.pi());
  return next;
}

/// Largest dt keeping I + Qbar(p, psi) dt stochastic, given conductances c.
inline double psi_stable_dt(const ReversibleChain& chain, const std::vector<double>& c, const Vector& p, const Vector& psi) {
  Vector outflow = Vector::Zero(p.size());
  const auto& edges = chain.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto i = edges[e].i;
    const auto j = edges[e].j;
    const double d = psi[j] - psi[i];
    if (d > 0.0) outflow[i] += c[e] * d;
    else outflow[j] -= c[e] * d;
  }
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (outflow[i] > 0.0) best = std::min(best, p[i] / outflow[i]);
  return best;
}

struct IntegrateOptions {
  /// Empty means the plain MH master equation.
  std::optional<MethodSpec> method;
  DampingSchedule schedule = DampingSchedule::constant(0.0);
  double dt = 0.1;
  std::uint64_t steps = 0;
  std::uint64_t warm_start = 0;
  double restart_threshold = 0.0;
  double min_dt = 1e-12;
};

namespace detail {

inline TrajectoryRecord ode_record(std::uint64_t iter, double t, double dt, const Vector& p, const ReversibleChain& chain,
                                   double ham, double pot, std::uint64_t restarts) {
  TrajectoryRecord r;
  r.iter = iter;
  r.t = t;
  r.dt = dt;
  r.l2_error = (p - chain.pi()).norm();
  r.hamiltonian = ham;
  r.potential = pot;
  r.min_p = p.minCoeff();
  r.restarts = restarts;
  return r;
}

}  // namespace detail

/**
 * Runs `steps` iterations from p0. The first `warm_start` iterations (all of
 * them without a method) are MH master-equation steps; the momentum is then
 * initialised from the current density and the staggered scheme takes over.
 *
 * A momentum step that would leave a nonpositive entry in p counts as p
 * hitting zero: psi is reset first, which turns the step into an MH step.
 * Whenever an MH step would not be stochastic with a positive diagonal, dt
 * shrinks by a factor of 10 for the rest of the run; falling below min_dt
 * throws step_underflow. Landing at or below restart_threshold after a step
 * also resets psi. For MH iterations the hamiltonian and potential columns hold
 * KL(p || pi).
 */
inline Trajectory integrate(const ReversibleChain& chain, const Vector& p0, const IntegrateOptions& opt) {
  detail::require_size(chain, p0, "initial density");
  if (!(opt.dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const auto& pi = chain.pi();
  const bool accelerated = opt.method.has_value();
  Trajectory traj;
  traj.records.reserve(opt.steps + 1);

  SimplexState s{p0, Vector::Zero(p0.size()), 0.0};
  double h = opt.dt;
  std::uint64_t restarts = 0;
  bool momentum_live = false;

  auto kl = [&](const Vector& p) { return f_divergence(FDivergence::kl, p, pi); };
  auto record = [&](std::uint64_t iter) {
    if (momentum_live) {
      const double u = potential(*opt.method, chain, s.p);
      traj.records.push_back(detail::ode_record(iter, s.t, h, s.p, chain, u + kinetic_energy(*opt.method, chain, s.p, s.psi), u, restarts));
    } else {
      const double d = kl(s.p);
      traj.records.push_back(detail::ode_record(iter, s.t, h, s.p, chain, d, d, restarts));
    }
  };
  auto shrink_until = [&](double limit) {
    while (h >= limit) {
      h /= 10.0;
      if (h < opt.min_dt) throw step_underflow("time step fell below the configured minimum");
    }
  };
  auto mh_step = [&]() {
    shrink_until(mh_stable_dt(chain));
    s.p += h * mh_rhs(chain, s.p);
    s.t += h;
  };

  if (accelerated && opt.warm_start == 0) {
    s.psi = init_momentum(*opt.method, s.p, pi);
    momentum_live = true;
  }
  record(0);

  for (std::uint64_t k = 0; k < opt.steps; ++k) {
    if (!accelerated || k < opt.warm_start) {
      mh_step();
      if (accelerated && k + 1 == opt.warm_start) {
        s.psi = init_momentum(*opt.method, s.p, pi);
        momentum_live = true;
      }
      record(k + 1);
      continue;
    }
    const auto& spec = *opt.method;
    auto c = conductances(spec, chain, s.p);
    if (h >= psi_stable_dt(chain, c, s.p, s.psi)) {
      ++restarts;
      s = restart_ode(s, spec, chain);
      shrink_until(mh_stable_dt(chain));
      c = conductances(spec, chain, s.p);
    }
    const double t_k = s.t;
    s.p += h * apply_onsager(chain, c, s.psi);
    s.t = t_k + h;
    if (s.p.minCoeff() <= opt.restart_threshold) {
      ++restarts;
      s = restart_ode(s, spec, chain);
    } else {
      s.psi += h * psi_rhs(spec, chain, s.p, s.psi, opt.schedule(t_k));
    }
    record(k + 1);
  }
  traj.final_p = s.p;
  traj.final_psi = s.psi;
  return traj;
}

/// Uniform density on n states.
inline Vector uniform_density(std::size_t n) {
  return Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, eigenvalues below 1e-12 * lambda_max dropped.
inline Matrix symmetric_pinv(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const Vector& ev = eig.eigenvalues();
  const double cut = 1e-12 * ev.cwiseAbs().maxCoeff();
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) > cut) inv[i] = 1.0 / ev[i];
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

/// e^{sqrt(lambda) t} [ 1/2 |sqrt(lambda)(p - pi) + psi K|^2_{K+} + U(p) - U(pi) ] for a constant K.
inline double lyapunov_value(double t, const Vector& p, const Vector& psi, const Vector& pi, const Matrix& k_pinv,
                             const Matrix& k, double lambda, double u_p, double u_pi) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const double sl = std::sqrt(lambda);
  const Vector v = sl * (p - pi) + k.transpose() * psi;
  return std::exp(sl * t) * (0.5 * v.dot(k_pinv * v) + u_p - u_pi);
}

/// Lyapunov diagnostic bound to one chain and one constant-K method.
class LyapunovDiagnostic {
 public:
  LyapunovDiagnostic(const MethodSpec& spec, const ReversibleChain& chain, double lambda)
      : spec_(spec), chain_(&chain), lambda_(lambda) {
    if (!spec.constant_onsager()) throw unsupported_method("Lyapunov diagnostic requires a constant Onsager matrix");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    k_ = onsager_matrix(spec, chain, chain.pi());
    k_pinv_ = symmetric_pinv(k_);
    u_pi_ = potential(spec, chain, chain.pi());
  }

  double operator()(double t, const Vector& p, const Vector& psi) const {
    return lyapunov_value(t, p, psi, chain_->pi(), k_pinv_, k_, lambda_, potential(spec_, *chain_, p), u_pi_);
  }

  const Matrix& onsager() const noexcept { return k_; }
  const Matrix& onsager_pinv() const noexcept { return k_pinv_; }

 private:
  MethodSpec spec_;
  const ReversibleChain* chain_;
  double lambda_;
  Matrix k_;
  Matrix k_pinv_;
  double u_pi_;
};

}  // namespace amcmc

#endif  // AMCMC_DYNAMICS_HPP

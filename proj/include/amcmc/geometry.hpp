#ifndef AMCMC_GEOMETRY_HPP
#define AMCMC_GEOMETRY_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "graph_model.hpp"

namespace amcmc {

enum class MobilityKind { uniform, log_mean, constant_matrix };

/// Logarithmic mean (x - y) / (log x - log y); near-equal arguments (log ratio below 1e-12) give min(x, y).
inline double log_mean(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) throw std::domain_error("log_mean requires positive arguments");
  const double lo = std::min(x, y);
  const double hi = std::max(x, y);
  const double u = std::log(hi / lo);
  if (u < 1e-12) return lo;
  return lo * std::expm1(u) / u;
}

/// Partial derivative of log_mean(x, y) in x.
inline double log_mean_dx(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) throw std::domain_error("log_mean requires positive arguments");
  const double u = std::log(x / y);
  if (std::abs(u) < 1e-4) return 0.5 - u / 6.0 + u * u / 24.0;
  return (u - 1.0 + std::exp(-u)) / (u * u);
}

/**
 * Edge weight function theta. For constant_matrix an empty `theta` means
 * theta_ij = 1 on every edge.
 */
struct Mobility {
  MobilityKind kind = MobilityKind::uniform;
  Matrix theta;

  static Mobility uniform() { return {MobilityKind::uniform, {}}; }
  static Mobility logarithmic() { return {MobilityKind::log_mean, {}}; }
  static Mobility constant(Matrix theta = {}) {
    if (theta.size() != 0) {
      if (theta.rows() != theta.cols()) throw std::invalid_argument("mobility matrix must be square");
      if ((theta - theta.transpose()).cwiseAbs().maxCoeff() > 0.0) throw std::invalid_argument("mobility matrix must be symmetric");
    }
    return {MobilityKind::constant_matrix, std::move(theta)};
  }

  bool depends_on_p() const noexcept { return kind == MobilityKind::log_mean; }
};

inline double mobility_eval(const Mobility& m, double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) throw std::domain_error("mobility requires positive arguments");
  switch (m.kind) {
    case MobilityKind::uniform: return 1.0;
    case MobilityKind::log_mean: return log_mean(x, y);
    case MobilityKind::constant_matrix: break;
  }
  throw std::invalid_argument("constant mobility is indexed by edge, not by density ratios");
}

enum class Method { chi_squared, kl, log_fisher, con_fisher };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::chi_squared: return "chi_squared";
    case Method::kl: return "kl";
    case Method::log_fisher: return "log_fisher";
    case Method::con_fisher: return "con_fisher";
  }
  return "unknown";
}

inline Method parse_method(std::string_view name) {
  if (name == "chi_squared") return Method::chi_squared;
  if (name == "kl") return Method::kl;
  if (name == "log_fisher") return Method::log_fisher;
  if (name == "con_fisher") return Method::con_fisher;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

/// One aMCMC variant: the method fixes the potential, the mobility fixes K(p).
struct MethodSpec {
  Method method;
  Mobility mobility;

  static MethodSpec make(Method m, Matrix con_theta = {}) {
    switch (m) {
      case Method::chi_squared: return {m, Mobility::uniform()};
      case Method::kl:
      case Method::log_fisher: return {m, Mobility::logarithmic()};
      case Method::con_fisher: return {m, Mobility::constant(std::move(con_theta))};
    }
    throw std::invalid_argument("unknown method");
  }

  bool constant_onsager() const noexcept { return !mobility.depends_on_p(); }
  /// Momentum initialisation family: -p/pi for chi_squared and con_fisher, -log(p/pi) otherwise.
  bool linear_momentum() const noexcept { return method == Method::chi_squared || method == Method::con_fisher; }
};

namespace detail {

inline void require_size(const ReversibleChain& chain, const Vector& v, const char* what) {
  if (static_cast<std::size_t>(v.size()) != chain.size())
    throw std::invalid_argument(std::string(what) + " has the wrong length");
}

inline void require_positive(const Vector& p, bool strict_type) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) {
      if (strict_type) throw positivity_violation("density entry " + std::to_string(i) + " is not strictly positive");
      throw std::domain_error("density entry " + std::to_string(i) + " is not strictly positive");
    }
  }
}

inline double constant_theta(const Mobility& m, std::size_t i, std::size_t j) {
  if (m.theta.size() == 0) return 1.0;
  const double t = m.theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  if (!(t > 0.0)) throw std::invalid_argument("constant mobility must be positive on edges");
  return t;
}

}  // namespace detail

/**
 * Edge conductances c_e = omega_ij theta_ij(p), one per entry of chain.edges().
 *
 * The log-mean case is evaluated as Q_ij * log_mean(p_i, p_j pi_i / pi_j) with
 * the target ratio taken from the unnormalized weights, so no Z enters.
 */
inline std::vector<double> conductances(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p) {
  const auto& edges = chain.edges();
  std::vector<double> c(edges.size());
  switch (spec.mobility.kind) {
    case MobilityKind::uniform:
      for (std::size_t e = 0; e < edges.size(); ++e) c[e] = edges[e].weight;
      break;
    case MobilityKind::constant_matrix:
      for (std::size_t e = 0; e < edges.size(); ++e)
        c[e] = edges[e].weight * detail::constant_theta(spec.mobility, edges[e].i, edges[e].j);
      break;
    case MobilityKind::log_mean: {
      detail::require_size(chain, p, "density");
      detail::require_positive(p, true);
      const auto& w = chain.target().unnormalized();
      for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [i, j, weight, qij, qji] = edges[e];
        c[e] = qij * log_mean(p[i], p[j] * (w[i] / w[j]));
      }
      break;
    }
  }
  return c;
}

/// K_ij = -omega_ij theta_ij(p), K_ii = sum_j omega_ij theta_ij(p).
inline Matrix onsager_matrix(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p) {
  const auto c = conductances(spec, chain, p);
  const auto n = static_cast<Eigen::Index>(chain.size());
  Matrix k = Matrix::Zero(n, n);
  const auto& edges = chain.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto i = edges[e].i;
    const auto j = edges[e].j;
    k(i, j) -= c[e];
    k(j, i) -= c[e];
    k(i, i) += c[e];
    k(j, j) += c[e];
  }
  return k;
}

/// psi K, computed edge by edge.
inline Vector apply_onsager(const ReversibleChain& chain, const std::vector<double>& c, const Vector& psi) {
  Vector out = Vector::Zero(psi.size());
  const auto& edges = chain.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto i = edges[e].i;
    const auto j = edges[e].j;
    const double flow = c[e] * (psi[i] - psi[j]);
    out[i] += flow;
    out[j] -= flow;
  }
  return out;
}

inline double potential(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p) {
  detail::require_size(chain, p, "density");
  const auto& pi = chain.pi();
  switch (spec.method) {
    case Method::chi_squared:
      return 0.5 * ((p - pi).array().square() / pi.array()).sum();
    case Method::kl: {
      detail::require_positive(p, false);
      return (p.array() * (p.array() / pi.array()).log()).sum();
    }
    case Method::log_fisher: {
      detail::require_positive(p, false);
      const Vector r = p.cwiseQuotient(pi);
      double total = 0.0;
      for (const auto& e : chain.edges())
        total += e.weight * (std::log(r[e.i]) - std::log(r[e.j])) * (r[e.i] - r[e.j]);
      return 0.5 * total;
    }
    case Method::con_fisher: {
      detail::require_positive(p, false);
      const Vector r = p.cwiseQuotient(pi);
      double total = 0.0;
      for (const auto& e : chain.edges()) {
        const double l = std::log(r[e.i]) - std::log(r[e.j]);
        total += e.weight * detail::constant_theta(spec.mobility, e.i, e.j) * l * l;
      }
      return 0.5 * total;
    }
  }
  throw unsupported_method("unknown method");
}

inline Vector potential_grad(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p) {
  detail::require_size(chain, p, "density");
  const auto& pi = chain.pi();
  switch (spec.method) {
    case Method::chi_squared:
      return (p.array() / pi.array() - 1.0).matrix();
    case Method::kl:
      detail::require_positive(p, false);
      return ((p.array() / pi.array()).log() + 1.0).matrix();
    case Method::log_fisher: {
      detail::require_positive(p, false);
      const Vector r = p.cwiseQuotient(pi);
      Vector g = Vector::Zero(p.size());
      for (const auto& e : chain.edges()) {
        const double dr = r[e.i] - r[e.j];
        const double dl = std::log(r[e.i]) - std::log(r[e.j]);
        g[e.i] += 0.5 * e.weight * (dr / p[e.i] + dl / pi[e.i]);
        g[e.j] += 0.5 * e.weight * (-dr / p[e.j] - dl / pi[e.j]);
      }
      return g;
    }
    case Method::con_fisher: {
      detail::require_positive(p, false);
      const Vector r = p.cwiseQuotient(pi);
      Vector g = Vector::Zero(p.size());
      for (const auto& e : chain.edges()) {
        const double flow = e.weight * detail::constant_theta(spec.mobility, e.i, e.j) * (std::log(r[e.i]) - std::log(r[e.j]));
        g[e.i] += flow / p[e.i];
        g[e.j] -= flow / p[e.j];
      }
      return g;
    }
  }
  throw unsupported_method("unknown method");
}

/// 1/2 psi K(p) psi^T.
inline double kinetic_energy(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p, const Vector& psi) {
  detail::require_size(chain, psi, "momentum");
  const auto c = conductances(spec, chain, p);
  double total = 0.0;
  const auto& edges = chain.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double d = psi[edges[e].i] - psi[edges[e].j];
    total += c[e] * d * d;
  }
  return 0.5 * total;
}

inline double hamiltonian(const MethodSpec& spec, const ReversibleChain& chain, const Vector& p, const Vector& psi) {
  return kinetic_energy(spec, chain, p, psi) + potential(spec, chain, p);
}

enum class FDivergence { chi2, kl };

/// sum_i f(p_i / pi_i) pi_i with f = |x - 1|^2 / 2 or x log x (0 log 0 = 0).
inline double f_divergence(FDivergence kind, const Vector& p, const Vector& pi) {
  if (p.size() != pi.size()) throw std::invalid_argument("density and target lengths differ");
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (kind == FDivergence::chi2) {
      const double d = p[i] - pi[i];
      total += 0.5 * d * d / pi[i];
    } else if (p[i] > 0.0) {
      total += p[i] * std::log(p[i] / pi[i]);
    }
  }
  return std::max(total, 0.0);
}

/// |sum_i p_i log(p_i / w_i) + log Z|, the error of the free-energy estimate of -log Z.
inline double logz_estimate_error(const Vector& p, const Vector& unnormalized, double z_true) {
  if (p.size() != unnormalized.size()) throw std::invalid_argument("density and weight lengths differ");
  if (!(z_true > 0.0)) throw std::invalid_argument("normalizing constant must be positive");
  detail::require_positive(p, false);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) total += p[i] * std::log(p[i] / unnormalized[i]);
  return std::abs(total + std::log(z_true));
}

}  // namespace amcmc

#endif  // AMCMC_GEOMETRY_HPP

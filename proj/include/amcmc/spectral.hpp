#ifndef AMCMC_SPECTRAL_HPP
#define AMCMC_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "geometry.hpp"

namespace amcmc {

using ComplexVector = Eigen::VectorXcd;

/// Eigenvalues of a reversible Q through diag(sqrt(pi)) Q diag(sqrt(pi))^-1, sorted descending.
inline Vector q_spectrum(const Matrix& q, const Vector& pi, double tol = 1e-10) {
  if (q.rows() != q.cols() || q.rows() != pi.size()) throw std::invalid_argument("rate matrix and target sizes differ");
  if (detailed_balance_defect(pi, q) > tol) throw detailed_balance_violation("rate matrix is not reversible with respect to pi");
  const Vector s = pi.cwiseSqrt();
  Matrix sym = s.asDiagonal() * q * s.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return ev;
}

inline Vector q_spectrum(const ReversibleChain& chain) { return q_spectrum(chain.rates().values, chain.pi()); }

/// Largest negative eigenvalue from a descending spectrum whose leading entry is the zero eigenvalue.
inline double alpha_star(const Vector& descending) {
  if (descending.size() < 2) throw std::invalid_argument("spectrum needs at least two eigenvalues");
  return descending[1];
}

/// [[0, -diag(1/pi)], [K, -d I]] with K = -omega.
inline Matrix chi_system_matrix(const Vector& pi, const Matrix& omega, double d) {
  const auto n = pi.size();
  if (omega.rows() != n || omega.cols() != n) throw std::invalid_argument("weight matrix and target sizes differ");
  Matrix l = Matrix::Zero(2 * n, 2 * n);
  l.topRightCorner(n, n) = -Matrix(pi.cwiseInverse().asDiagonal());
  l.bottomLeftCorner(n, n) = -omega;
  l.bottomRightCorner(n, n) = -d * Matrix::Identity(n, n);
  return l;
}

inline ComplexVector l_spectrum(const Matrix& l) {
  Eigen::EigenSolver<Matrix> solver(l, false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver did not converge");
  return solver.eigenvalues();
}

/// dist(mu (d + mu), spec(Q)) < tol.
inline bool map_check(double mu, double d, const Vector& q_eigs, double tol = 1e-8) {
  const double image = mu * (d + mu);
  for (Eigen::Index i = 0; i < q_eigs.size(); ++i)
    if (std::abs(image - q_eigs[i]) < tol) return true;
  return false;
}

/// Roots of mu^2 + d mu - alpha = 0.
inline std::pair<std::complex<double>, std::complex<double>> quadratic_roots(double alpha, double d) {
  const std::complex<double> disc = std::sqrt(std::complex<double>(d * d + 4.0 * alpha, 0.0));
  return {(-d + disc) / 2.0, (-d - disc) / 2.0};
}

/// Real eigenvalues of L, those with |imag| <= tol * max(1, |real|).
inline std::vector<double> real_eigenvalues(const ComplexVector& eigs, double tol = 1e-10) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < eigs.size(); ++i)
    if (std::abs(eigs[i].imag()) <= tol * std::max(1.0, std::abs(eigs[i].real()))) out.push_back(eigs[i].real());
  return out;
}

/**
 * Converse direction: every alpha in spec(Q) contributes both roots of
 * mu (d + mu) = alpha to spec(L), matched with multiplicity.
 */
inline bool roots_present(const ComplexVector& l_eigs, const Vector& q_eigs, double d, double tol = 1e-8) {
  std::vector<bool> used(static_cast<std::size_t>(l_eigs.size()), false);
  auto take = [&](std::complex<double> z) {
    std::size_t best = used.size();
    double best_dist = tol;
    for (std::size_t k = 0; k < used.size(); ++k) {
      if (used[k]) continue;
      const double dist = std::abs(l_eigs[static_cast<Eigen::Index>(k)] - z);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    if (best == used.size()) return false;
    used[best] = true;
    return true;
  };
  for (Eigen::Index i = 0; i < q_eigs.size(); ++i) {
    const auto [a, b] = quadratic_roots(q_eigs[i], d);
    if (!take(a) || !take(b)) return false;
  }
  return true;
}

struct MuStar {
  std::complex<double> value;
  std::size_t ties = 0;
};

/// Eigenvalue with the largest negative real part; ties go to the smallest |imag|.
inline MuStar mu_star(const ComplexVector& eigs, double zero_tol = 1e-10, double tie_tol = 1e-9) {
  std::optional<std::complex<double>> best;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    const auto z = eigs[i];
    if (!(z.real() < -zero_tol)) continue;
    if (!best || z.real() > best->real() + tie_tol ||
        (std::abs(z.real() - best->real()) <= tie_tol && std::abs(z.imag()) < std::abs(best->imag())))
      best = z;
  }
  if (!best) throw std::runtime_error("L has no eigenvalue with negative real part");
  MuStar out{*best, 0};
  for (Eigen::Index i = 0; i < eigs.size(); ++i)
    if (eigs[i] != *best && std::abs(eigs[i].real() - best->real()) <= tie_tol) ++out.ties;
  return out;
}

struct DampingRecommendation {
  double d;
  double predicted_rate;
  bool hypothesis_holds;
};

/// d = 2 sqrt|alpha*|, predicted rate -sqrt|alpha*|; the hypothesis flag records |alpha*| < 1.
inline DampingRecommendation optimal_damping(double alpha) {
  if (!(alpha < 0.0)) throw std::invalid_argument("alpha* must be negative");
  const double root = std::sqrt(-alpha);
  return {2.0 * root, -root, -alpha < 1.0};
}

/// Hessian of the con_fisher potential at a strictly positive p.
inline Matrix confisher_hessian(const ReversibleChain& chain, const Vector& p, const Mobility& theta = Mobility::constant()) {
  detail::require_size(chain, p, "density");
  detail::require_positive(p, false);
  if (theta.kind != MobilityKind::constant_matrix) throw unsupported_method("con_fisher Hessian needs a constant mobility");
  const auto& pi = chain.pi();
  const auto n = p.size();
  Matrix h = Matrix::Zero(n, n);
  for (const auto& e : chain.edges()) {
    const double c = e.weight * detail::constant_theta(theta, e.i, e.j);
    const double l = std::log(pi[e.j] * p[e.i] / (pi[e.i] * p[e.j]));
    h(e.i, e.i) += c / (p[e.i] * p[e.i]) * (1.0 - l);
    h(e.j, e.j) += c / (p[e.j] * p[e.j]) * (1.0 + l);
    h(e.i, e.j) -= c / (p[e.i] * p[e.j]);
    h(e.j, e.i) -= c / (p[e.i] * p[e.j]);
  }
  return h;
}

/// diag(1/pi) K diag(1/pi).
inline Matrix confisher_hessian_at_pi(const Vector& pi, const Matrix& k) {
  const Vector inv = pi.cwiseInverse();
  return inv.asDiagonal() * k * inv.asDiagonal();
}

/**
 * min over psi orthogonal to 1 of psi K H K psi^T / psi K psi^T, reduced to
 * lambda_min(sqrt(S) U^T H U sqrt(S)) where K = U S U^T keeps the singular
 * values above 1e-12 * sigma_max. Exactly one value must be dropped.
 */
inline double rayleigh_lambda(const Matrix& k, const Matrix& h) {
  if (k.rows() != k.cols() || h.rows() != k.rows() || h.cols() != k.cols()) throw std::invalid_argument("K and H must be square and equal in size");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (k + k.transpose()));
  const Vector sigma = eig.eigenvalues().cwiseAbs();
  const double cut = 1e-12 * sigma.maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > cut) keep.push_back(i);
  if (keep.size() + 1 != static_cast<std::size_t>(sigma.size()))
    throw numerical_rank_error("K must have a one-dimensional numerical kernel");
  Matrix us(k.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    us.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(keep[c]) * std::sqrt(sigma[keep[c]]);
  Matrix reduced = us.transpose() * h * us;
  reduced = 0.5 * (reduced + reduced.transpose()).eval();
  const double lambda = Eigen::SelfAdjointEigenSolver<Matrix>(reduced, Eigen::EigenvaluesOnly).eigenvalues()[0];
  return std::max(lambda, 0.0);
}

/// min(1/pi) / lambda_max((-omega)^+) = min(1/pi) times the smallest positive eigenvalue of -omega.
inline double chi2_lambda_bound(const Vector& pi, const Matrix& omega) {
  Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(-0.5 * (omega + omega.transpose()), Eigen::EigenvaluesOnly).eigenvalues();
  const double cut = 1e-12 * ev.cwiseAbs().maxCoeff();
  double smallest = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cut) smallest = std::min(smallest, ev[i]);
  if (!std::isfinite(smallest)) throw numerical_rank_error("weight matrix has no positive spectrum");
  return pi.cwiseInverse().minCoeff() * smallest;
}

struct SpectralReport {
  Vector q_eigenvalues;
  double alpha_star = 0.0;
  double recommended_d = 0.0;
  double damping = 0.0;
  bool hypothesis_holds = true;
  ComplexVector l_eigenvalues;
  std::optional<std::complex<double>> mu_star;
  std::size_t mu_star_ties = 0;
  double lambda_rayleigh = 0.0;
};

/**
 * Full report for an MH chain. `damping` defaults to the recommended d;
 * the 2n x 2n spectrum of L is skipped when with_l_spectrum is false.
 */
inline SpectralReport spectral_report(const ReversibleChain& chain, std::optional<double> damping = std::nullopt,
                                      bool with_l_spectrum = true) {
  SpectralReport r;
  r.q_eigenvalues = q_spectrum(chain);
  r.alpha_star = alpha_star(r.q_eigenvalues);
  const auto rec = optimal_damping(r.alpha_star);
  r.recommended_d = rec.d;
  r.hypothesis_holds = rec.hypothesis_holds;
  r.damping = damping.value_or(rec.d);
  const Matrix& omega = chain.weights().values;
  if (with_l_spectrum) {
    r.l_eigenvalues = l_spectrum(chi_system_matrix(chain.pi(), omega, r.damping));
    const auto ms = mu_star(r.l_eigenvalues);
    r.mu_star = ms.value;
    r.mu_star_ties = ms.ties;
  }
  const Matrix k = -omega;
  r.lambda_rayleigh = rayleigh_lambda(k, confisher_hessian_at_pi(chain.pi(), k));
  return r;
}

}  // namespace amcmc

#endif  // AMCMC_SPECTRAL_HPP

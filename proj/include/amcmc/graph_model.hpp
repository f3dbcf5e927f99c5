#ifndef AMCMC_GRAPH_MODEL_HPP
#define AMCMC_GRAPH_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace amcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Undirected edge, stored with a < b.
struct Edge {
  std::size_t a;
  std::size_t b;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Grid layout attached to lattice graphs; node (r, c) has index r * cols + c.
struct LatticeShape {
  std::size_t rows;
  std::size_t cols;
  bool periodic;
};

namespace detail {

inline bool connected(std::size_t n, const std::vector<std::vector<std::size_t>>& adj) {
  if (n == 0) return false;
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == n;
}

}  // namespace detail

/**
 * Finite, connected, simple undirected graph on the states {0, ..., n-1}.
 *
 * Construction validates the edge list (no self-loops, no duplicates, all
 * endpoints in range) and connectivity, so every StateGraph in circulation
 * has minimum degree >= 1.
 */
class StateGraph {
 public:
  StateGraph(std::size_t n, std::vector<Edge> edges, std::optional<LatticeShape> lattice = std::nullopt)
      : n_(n), lattice_(lattice), adjacency_(n) {
    if (n < 2) throw std::invalid_argument("state graph needs at least 2 nodes");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    edges_.reserve(edges.size());
    for (auto e : edges) {
      if (e.a >= n || e.b >= n) throw std::invalid_argument("edge endpoint out of range");
      if (e.a == e.b) throw std::invalid_argument("self-loop in edge set");
      if (e.a > e.b) std::swap(e.a, e.b);
      if (!seen.emplace(e.a, e.b).second) throw std::invalid_argument("duplicate edge");
      edges_.push_back(e);
      adjacency_[e.a].push_back(e.b);
      adjacency_[e.b].push_back(e.a);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
    if (!detail::connected(n_, adjacency_)) throw std::invalid_argument("state graph is not connected");
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_.at(i); }
  std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }
  const std::optional<LatticeShape>& lattice_shape() const noexcept { return lattice_; }

  bool has_edge(std::size_t i, std::size_t j) const {
    const auto& nb = adjacency_.at(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  Matrix adjacency_matrix() const {
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& e : edges_) a(e.a, e.b) = a(e.b, e.a) = 1.0;
    return a;
  }

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::optional<LatticeShape> lattice_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

inline bool is_connected(const StateGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) adj[i] = g.neighbors(i);
  return detail::connected(g.size(), adj);
}

inline StateGraph make_cycle(std::size_t n) {
  if (n < 3) throw std::invalid_argument("cycle needs n >= 3");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
  return StateGraph(n, std::move(edges));
}

/**
 * Two cycles joined by a bridge path.
 *
 * Loop A occupies nodes [0, a), the bridge interior the next `bridge_interior`
 * nodes, loop B the remaining b nodes. The bridge runs from the last node of
 * loop A through the interior nodes to the first node of loop B, so
 * bridge_interior = 0 means a single bridging edge.
 */
inline StateGraph make_two_loop(std::array<std::size_t, 2> loop_sizes, std::size_t bridge_interior = 0) {
  const auto [a, b] = loop_sizes;
  if (a < 3 || b < 3) throw std::invalid_argument("two-loop graph needs two loops of size >= 3");
  const std::size_t n = a + bridge_interior + b;
  const std::size_t b0 = a + bridge_interior;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < a; ++i) edges.push_back({i, (i + 1) % a});
  for (std::size_t i = 0; i < b; ++i) edges.push_back({b0 + i, b0 + (i + 1) % b});
  std::size_t prev = a - 1;
  for (std::size_t k = 0; k < bridge_interior; ++k) {
    edges.push_back({prev, a + k});
    prev = a + k;
  }
  edges.push_back({prev, b0});
  return StateGraph(n, std::move(edges));
}

inline constexpr std::size_t kMaxHypercubeDimension = 20;

/// Nodes are bit strings of length d; edges join Hamming-distance-1 pairs.
inline StateGraph make_hypercube(std::size_t d) {
  if (d < 1) throw std::invalid_argument("hypercube dimension must be >= 1");
  if (d > kMaxHypercubeDimension) throw std::invalid_argument("hypercube dimension exceeds configured maximum");
  const std::size_t n = std::size_t{1} << d;
  std::vector<Edge> edges;
  edges.reserve(d * n / 2);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t bit = 0; bit < d; ++bit) {
      const std::size_t u = v ^ (std::size_t{1} << bit);
      if (v < u) edges.push_back({v, u});
    }
  }
  return StateGraph(n, std::move(edges));
}

/// 4-neighbour grid. With periodic = true, rows and columns of length >= 3 wrap around.
inline StateGraph make_lattice(std::size_t rows, std::size_t cols, bool periodic = false) {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw std::invalid_argument("lattice needs rows, cols >= 1 and at least 2 nodes");
  auto idx = [cols](std::size_t r, std::size_t c) { return r * cols + c; };
  std::vector<Edge> edges;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.push_back({idx(r, c), idx(r, c + 1)});
      if (r + 1 < rows) edges.push_back({idx(r, c), idx(r + 1, c)});
    }
  }
  if (periodic) {
    if (cols >= 3)
      for (std::size_t r = 0; r < rows; ++r) edges.push_back({idx(r, 0), idx(r, cols - 1)});
    if (rows >= 3)
      for (std::size_t c = 0; c < cols; ++c) edges.push_back({idx(0, c), idx(rows - 1, c)});
  }
  return StateGraph(rows * cols, std::move(edges), LatticeShape{rows, cols, periodic});
}

/**
 * Target distribution given by strictly positive unnormalized weights.
 *
 * Z is the plain sum of the weights. Everything downstream that is meant to be
 * free of Z reads ratios of `unnormalized()` only.
 */
class TargetDistribution {
 public:
  static TargetDistribution from_weights(Vector unnormalized) {
    if (unnormalized.size() < 1) throw std::invalid_argument("empty target");
    for (Eigen::Index i = 0; i < unnormalized.size(); ++i) {
      if (!(unnormalized[i] > 0.0) || !std::isfinite(unnormalized[i]))
        throw std::invalid_argument("target weights must be finite and strictly positive");
    }
    TargetDistribution t;
    t.z_ = unnormalized.sum();
    t.probabilities_ = unnormalized / t.z_;
    t.unnormalized_ = std::move(unnormalized);
    return t;
  }

  static TargetDistribution from_weights(const std::vector<double>& w) {
    return from_weights(Vector(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()))));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(probabilities_.size()); }
  const Vector& unnormalized() const noexcept { return unnormalized_; }
  const Vector& probabilities() const noexcept { return probabilities_; }
  double z() const noexcept { return z_; }

 private:
  TargetDistribution() = default;
  Vector unnormalized_;
  Vector probabilities_;
  double z_ = 1.0;
};

struct CandidateKernel {
  Matrix values;
};

struct RateMatrix {
  Matrix values;
};

struct WeightMatrix {
  Matrix values;
};

/// q_ij = 1/deg(i) on edges, 0 elsewhere.
inline CandidateKernel random_walk_kernel(const StateGraph& g) {
  const auto n = g.size();
  Matrix q = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto deg = g.degree(i);
    if (deg == 0) throw std::invalid_argument("isolated node in candidate kernel");
    for (auto j : g.neighbors(i)) q(i, j) = 1.0 / static_cast<double>(deg);
  }
  return {std::move(q)};
}

/// Q_ij = min{(pi_j / pi_i) q_ji, q_ij} off the diagonal; rows sum to zero.
inline RateMatrix build_mh_rate_matrix(const CandidateKernel& q, const TargetDistribution& target) {
  const auto& w = target.unnormalized();
  const auto n = q.values.rows();
  if (q.values.cols() != n || w.size() != n) throw std::invalid_argument("kernel and target sizes differ");
  Matrix rates = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double out = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double qij = q.values(i, j);
      if (qij < 0.0) throw std::invalid_argument("negative candidate probability");
      if (qij == 0.0) continue;
      const double r = std::min(w[j] / w[i] * q.values(j, i), qij);
      rates(i, j) = r;
      out += r;
    }
    rates(i, i) = -out;
  }
  return {std::move(rates)};
}

inline double detailed_balance_defect(const Vector& pi, const Matrix& rates) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < rates.rows(); ++i)
    for (Eigen::Index j = i + 1; j < rates.cols(); ++j)
      worst = std::max(worst, std::abs(pi[i] * rates(i, j) - pi[j] * rates(j, i)));
  return worst;
}

/// omega_ij = pi_i Q_ij, symmetrized after the detailed-balance check.
inline WeightMatrix weight_matrix(const TargetDistribution& target, const RateMatrix& rates, double tol = 1e-10) {
  const auto& pi = target.probabilities();
  if (detailed_balance_defect(pi, rates.values) > tol)
    throw detailed_balance_violation("weight matrix is not symmetric: rate matrix violates detailed balance");
  Matrix omega = pi.asDiagonal() * rates.values;
  omega = 0.5 * (omega + omega.transpose()).eval();
  for (Eigen::Index i = 0; i < omega.rows(); ++i) {
    omega(i, i) = 0.0;
    omega(i, i) = -omega.row(i).sum();
  }
  return {std::move(omega)};
}

/// Per-edge view of a reversible chain: omega_ij together with both rates.
struct ChainEdge {
  std::size_t i;
  std::size_t j;
  double weight;
  double rate_ij;
  double rate_ji;
};

/**
 * Graph, target, rate matrix and weight matrix bundled together. Inner loops
 * in the dynamics and particle code iterate `edges()` instead of touching the
 * dense matrices.
 */
class ReversibleChain {
 public:
  ReversibleChain(StateGraph graph, TargetDistribution target, RateMatrix rates)
      : graph_(std::move(graph)), target_(std::move(target)), rates_(std::move(rates)) {
    if (target_.size() != graph_.size() || static_cast<std::size_t>(rates_.values.rows()) != graph_.size())
      throw std::invalid_argument("graph, target and rate matrix sizes differ");
    weights_ = weight_matrix(target_, rates_);
    for (const auto& e : graph_.edges()) {
      const double w = weights_.values(e.a, e.b);
      if (w > 0.0) edges_.push_back({e.a, e.b, w, rates_.values(e.a, e.b), rates_.values(e.b, e.a)});
    }
  }

  std::size_t size() const noexcept { return graph_.size(); }
  const StateGraph& graph() const noexcept { return graph_; }
  const TargetDistribution& target() const noexcept { return target_; }
  const Vector& pi() const noexcept { return target_.probabilities(); }
  const RateMatrix& rates() const noexcept { return rates_; }
  const WeightMatrix& weights() const noexcept { return weights_; }
  const std::vector<ChainEdge>& edges() const noexcept { return edges_; }

 private:
  StateGraph graph_;
  TargetDistribution target_;
  RateMatrix rates_;
  WeightMatrix weights_;
  std::vector<ChainEdge> edges_;
};

/// Random-walk Metropolis-Hastings chain on g targeting `target`.
inline ReversibleChain make_mh_chain(StateGraph g, TargetDistribution target) {
  auto rates = build_mh_rate_matrix(random_walk_kernel(g), target);
  return ReversibleChain(std::move(g), std::move(target), std::move(rates));
}

using Point2 = std::array<double, 2>;

/// Lattice node (r, c) sits at the cell centre ((c + 0.5) / cols, (r + 0.5) / rows) of [0,1]^2.
inline Point2 lattice_coordinate(const LatticeShape& shape, std::size_t node) {
  const auto r = node / shape.cols;
  const auto c = node % shape.cols;
  return {(static_cast<double>(c) + 0.5) / static_cast<double>(shape.cols),
          (static_cast<double>(r) + 0.5) / static_cast<double>(shape.rows)};
}

/// Unnormalized weights exp(-s1 |x - x1|^2) + exp(-s2 |x - x2|^2) over the lattice nodes.
inline TargetDistribution gaussian_mixture_target(const StateGraph& g, std::array<Point2, 2> centers,
                                                  std::array<double, 2> scales) {
  const auto& shape = g.lattice_shape();
  if (!shape) throw std::invalid_argument("gaussian mixture target requires a lattice graph");
  if (scales[0] < 0.0 || scales[1] < 0.0) throw std::invalid_argument("mixture scales must be nonnegative");
  Vector w(static_cast<Eigen::Index>(g.size()));
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto x = lattice_coordinate(*shape, v);
    double total = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      const double dx = x[0] - centers[k][0];
      const double dy = x[1] - centers[k][1];
      total += std::exp(-scales[k] * (dx * dx + dy * dy));
    }
    w[static_cast<Eigen::Index>(v)] = total;
  }
  return TargetDistribution::from_weights(std::move(w));
}

}  // namespace amcmc

#endif  // AMCMC_GRAPH_MODEL_HPP

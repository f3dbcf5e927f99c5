#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "amcmc/config.hpp"
#include "amcmc/spectral.hpp"

using namespace amcmc;

namespace {

ReversibleChain c3() { return make_mh_chain(make_cycle(3), TargetDistribution::from_weights(std::vector<double>{0.9913, 0.0044, 0.0043})); }
ReversibleChain uniform_triangle() { return make_mh_chain(make_cycle(3), TargetDistribution::from_weights(std::vector<double>{1, 1, 1})); }

/// Connected random graph on n nodes (a cycle plus random chords) with random target weights.
ReversibleChain random_chain(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> size(3, 8);
  const std::size_t n = size(rng);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
  std::bernoulli_distribution chord(0.3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j)
      if (!(i == 0 && j == n - 1) && chord(rng)) edges.push_back({i, j});
  std::uniform_real_distribution<double> w(0.1, 5.0);
  std::vector<double> weights(n);
  for (auto& x : weights) x = w(rng);
  return make_mh_chain(StateGraph(n, edges), TargetDistribution::from_weights(weights));
}

double quotient(const Matrix& a, const Matrix& b, const Vector& x) { return x.dot(a * x) / x.dot(b * x); }

/// min over x orthogonal to 1 of x^T A x / x^T B x by random search followed by projected gradient descent.
double brute_force_rayleigh(const Matrix& k, const Matrix& h, std::mt19937_64& rng) {
  const Matrix a = k * h * k.transpose();
  const auto n = k.rows();
  auto project = [&](Vector x) {
    x.array() -= x.mean();
    return Vector(x / x.norm());
  };
  std::normal_distribution<double> g;
  Vector best;
  double best_q = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 100000; ++t) {
    Vector x(n);
    for (auto& v : x) v = g(rng);
    x = project(x);
    const double q = quotient(a, k, x);
    if (q < best_q) {
      best_q = q;
      best = x;
    }
  }
  double step = 1e-2;
  for (int it = 0; it < 200000 && step > 1e-18; ++it) {
    const double denom = best.dot(k * best);
    Vector grad = 2.0 * (a * best - best_q * (k * best)) / denom;
    grad.array() -= grad.mean();
    const Vector trial = project(best - step * grad);
    const double q = quotient(a, k, trial);
    if (q < best_q) {
      best = trial;
      best_q = q;
      step *= 1.2;
    } else {
      step *= 0.5;
    }
  }
  return best_q;
}

Matrix central_hessian(const ReversibleChain& chain, const Vector& p) {
  const auto spec = MethodSpec::make(Method::con_fisher);
  const auto n = p.size();
  Matrix hess(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double hi = 1e-4 * p[i], hj = 1e-4 * p[j];
      auto u = [&](double si, double sj) {
        Vector x = p;
        x[i] += si * hi;
        x[j] += sj * hj;
        return potential(spec, chain, x);
      };
      hess(i, j) = (u(1, 1) - u(1, -1) - u(-1, 1) + u(-1, -1)) / (4 * hi * hj);
    }
  }
  return hess;
}

}  // namespace

TEST(QSpectrum, UniformTriangle) {
  const Vector ev = q_spectrum(uniform_triangle());
  ASSERT_EQ(ev.size(), 3);
  EXPECT_NEAR(ev[0], 0.0, 1e-15);
  EXPECT_NEAR(ev[1], -1.5, 1e-14);
  EXPECT_NEAR(ev[2], -1.5, 1e-14);
}

TEST(QSpectrum, PaperTriangleGap) {
  EXPECT_NEAR(alpha_star(q_spectrum(c3())), -0.5044, 5e-4);
}

TEST(QSpectrum, PresetGaps) {
  EXPECT_NEAR(alpha_star(q_spectrum(preset_config("twoloop-logfisher").chain)), -3.79e-2, 1e-3);
  EXPECT_NEAR(alpha_star(q_spectrum(preset_config("hypercube-logfisher").chain)), -0.0468, 1e-3);
}

TEST(QSpectrum, SimpleZeroAndNegativeRest) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const Vector ev = q_spectrum(random_chain(rng));
    EXPECT_NEAR(ev[0], 0.0, 1e-12);
    EXPECT_LT(ev[1], -1e-8);
    for (Eigen::Index i = 1; i < ev.size(); ++i) EXPECT_LE(ev[i], ev[i - 1]);
  }
}

TEST(QSpectrum, AgreesWithNonsymmetricSolver) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 20; ++t) {
    const auto chain = random_chain(rng);
    const Vector ev = q_spectrum(chain);
    const ComplexVector raw = Eigen::EigenSolver<Matrix>(chain.rates().values, false).eigenvalues();
    std::vector<double> re;
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      EXPECT_LT(std::abs(raw[i].imag()), 1e-8);
      re.push_back(raw[i].real());
    }
    std::sort(re.begin(), re.end(), std::greater<>());
    for (Eigen::Index i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], re[static_cast<std::size_t>(i)], 1e-8);
  }
}

TEST(QSpectrum, RejectsNonReversibleRates) {
  Matrix q(3, 3);
  q << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  EXPECT_THROW(q_spectrum(q, Vector::Constant(3, 1.0 / 3.0)), detailed_balance_violation);
}

TEST(ChiSystemMatrix, TwoStateByHand) {
  const auto chain = make_mh_chain(make_hypercube(1), TargetDistribution::from_weights(std::vector<double>{1, 1}));
  const double d = 0.7;
  Matrix expected(4, 4);
  expected << 0, 0, -2, 0,
              0, 0, 0, -2,
              0.5, -0.5, -d, 0,
              -0.5, 0.5, 0, -d;
  EXPECT_LT((chi_system_matrix(chain.pi(), chain.weights().values, d) - expected).cwiseAbs().maxCoeff(), 1e-16);
  const Matrix l0 = chi_system_matrix(chain.pi(), chain.weights().values, 0.0);
  EXPECT_EQ(l0.bottomRightCorner(2, 2), Matrix::Zero(2, 2));
}

TEST(ChiSystemMatrix, ZeroIsAlwaysAnEigenvalue) {
  const auto chain = c3();
  for (double d : {0.0, 0.3, 1.4, 5.0}) {
    const ComplexVector ev = l_spectrum(chi_system_matrix(chain.pi(), chain.weights().values, d));
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i) nearest = std::min(nearest, std::abs(ev[i]));
    EXPECT_LT(nearest, 1e-10);
  }
}

TEST(LSpectrum, PaperTriangleMuStar) {
  const auto chain = c3();
  const double d = optimal_damping(alpha_star(q_spectrum(chain))).d;
  const auto ms = mu_star(l_spectrum(chi_system_matrix(chain.pi(), chain.weights().values, d)));
  EXPECT_NEAR(ms.value.real(), -0.7102, 1e-3);
}

TEST(LSpectrum, QuadraticRootsAtZeroAlpha) {
  const auto [a, b] = quadratic_roots(0.0, 1.3);
  EXPECT_EQ(a, std::complex<double>(0.0, 0.0));
  EXPECT_NEAR(b.real(), -1.3, 1e-16);
  EXPECT_EQ(b.imag(), 0.0);
}

TEST(LSpectrum, LemmaBothDirectionsOnRandomChains) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> dd(0.05, 4.0);
  for (int t = 0; t < 20; ++t) {
    const auto chain = random_chain(rng);
    const Vector q = q_spectrum(chain);
    for (int s = 0; s < 5; ++s) {
      const double d = dd(rng);
      const ComplexVector l = l_spectrum(chi_system_matrix(chain.pi(), chain.weights().values, d));
      for (double mu : real_eigenvalues(l)) EXPECT_TRUE(map_check(mu, d, q)) << "mu " << mu << " d " << d;
      EXPECT_TRUE(roots_present(l, q, d));
    }
  }
}

TEST(MuStar, TieBreakAndCount) {
  ComplexVector ev(5);
  ev << std::complex<double>(0, 0), std::complex<double>(-1, 2), std::complex<double>(-1, -2), std::complex<double>(-1, 0.5),
      std::complex<double>(-3, 0);
  const auto ms = mu_star(ev);
  EXPECT_EQ(ms.value, std::complex<double>(-1, 0.5));
  EXPECT_EQ(ms.ties, 2u);
}

TEST(OptimalDamping, Examples) {
  const auto unit = optimal_damping(-1.0);
  EXPECT_EQ(unit.d, 2.0);
  EXPECT_EQ(unit.predicted_rate, -1.0);
  EXPECT_FALSE(unit.hypothesis_holds);
  EXPECT_NEAR(optimal_damping(-0.0468).d, 0.4327, 1e-4);
  EXPECT_NEAR(optimal_damping(-0.5044).d, 2.0 * 0.7102112, 1e-6);
  EXPECT_TRUE(optimal_damping(-0.5044).hypothesis_holds);
  EXPECT_THROW(optimal_damping(0.0), std::invalid_argument);
  EXPECT_THROW(optimal_damping(0.2), std::invalid_argument);
}

TEST(OptimalDamping, MuStarBeatsAlphaStar) {
  std::mt19937_64 rng(34);
  for (const auto& chain : {c3(), preset_config("twoloop-logfisher").chain}) {
    const double a = alpha_star(q_spectrum(chain));
    ASSERT_LT(-a, 1.0);
    std::uniform_real_distribution<double> dd(2.0 * std::sqrt(-a), -a + 1.0);
    for (int s = 0; s < 5; ++s) {
      const double d = s == 0 ? 2.0 * std::sqrt(-a) : dd(rng);
      const auto ms = mu_star(l_spectrum(chi_system_matrix(chain.pi(), chain.weights().values, d)));
      EXPECT_LT(ms.value.real(), a) << "d " << d;
    }
  }
}

TEST(ConFisherHessian, AtTargetMatchesClosedForm) {
  for (const auto& chain : {c3(), preset_config("twoloop-logfisher").chain}) {
    const Matrix k = onsager_matrix(MethodSpec::make(Method::con_fisher), chain, chain.pi());
    const Matrix h = confisher_hessian(chain, chain.pi());
    const Matrix closed = confisher_hessian_at_pi(chain.pi(), k);
    EXPECT_LT((h - closed).cwiseAbs().maxCoeff(), 1e-12 * closed.cwiseAbs().maxCoeff());
    EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-12 * closed.cwiseAbs().maxCoeff());
  }
}

TEST(ConFisherHessian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (const auto& chain : {uniform_triangle(), c3()}) {
    for (int t = 0; t < 10; ++t) {
      Vector p(3);
      for (auto& x : p) x = u(rng);
      p /= p.sum();
      const Matrix exact = confisher_hessian(chain, p);
      const Matrix fd = central_hessian(chain, p);
      EXPECT_LT((exact - fd).cwiseAbs().maxCoeff(), 1e-4 * exact.cwiseAbs().maxCoeff());
    }
  }
}

TEST(ConFisherHessian, UniformTargetIsScaledLaplacian) {
  const auto chain = make_mh_chain(make_cycle(5), TargetDistribution::from_weights(std::vector<double>(5, 1.0)));
  const Matrix k = onsager_matrix(MethodSpec::make(Method::con_fisher), chain, chain.pi());
  EXPECT_LT((confisher_hessian(chain, chain.pi()) - 25.0 * k).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ConFisherHessian, RejectsNonPositiveDensity) {
  EXPECT_THROW(confisher_hessian(c3(), (Vector(3) << 1, 0, 0).finished()), std::domain_error);
}

TEST(RayleighLambda, SelfHessianGivesSquaredGap) {
  const auto chain = uniform_triangle();
  const Matrix k = -chain.weights().values;
  EXPECT_NEAR(rayleigh_lambda(k, k), 0.25, 1e-14);
  const Matrix lap = make_cycle(3).adjacency_matrix();
  const Matrix graph_laplacian = Matrix(lap.rowwise().sum().asDiagonal()) - lap;
  EXPECT_NEAR(rayleigh_lambda(graph_laplacian, graph_laplacian), 9.0, 1e-12);
}

TEST(RayleighLambda, MatchesBruteForce) {
  std::mt19937_64 rng(36);
  int checked = 0;
  while (checked < 5) {
    const auto chain = random_chain(rng);
    if (chain.size() > 6) continue;
    const Matrix k = -chain.weights().values;
    const Matrix h = confisher_hessian_at_pi(chain.pi(), k);
    const double lambda = rayleigh_lambda(k, h);
    const double oracle = brute_force_rayleigh(k, h, rng);
    EXPECT_NEAR(lambda, oracle, 1e-6 * oracle) << "n " << chain.size();
    ++checked;
  }
}

TEST(RayleighLambda, PositiveForPresets) {
  for (const auto& name : {"c3-chi", "twoloop-logfisher", "hypercube-logfisher"}) {
    const auto& chain = preset_config(name).chain;
    const Matrix k = -chain.weights().values;
    EXPECT_GT(rayleigh_lambda(k, confisher_hessian_at_pi(chain.pi(), k)), 0.0) << name;
  }
}

TEST(RayleighLambda, ExtraKernelIsRankError) {
  Matrix k = Matrix::Zero(4, 4);
  k.topLeftCorner(2, 2) << 1, -1, -1, 1;
  k.bottomRightCorner(2, 2) << 1, -1, -1, 1;
  EXPECT_THROW(rayleigh_lambda(k, Matrix::Identity(4, 4)), numerical_rank_error);
}

TEST(Chi2LambdaBound, UniformTriangle) {
  const auto chain = uniform_triangle();
  EXPECT_NEAR(chi2_lambda_bound(chain.pi(), chain.weights().values), 1.5, 1e-14);
}

TEST(Chi2LambdaBound, PositiveAndHomogeneous) {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 10; ++t) {
    const auto chain = random_chain(rng);
    const double b = chi2_lambda_bound(chain.pi(), chain.weights().values);
    EXPECT_GT(b, 0.0);
    EXPECT_NEAR(chi2_lambda_bound(chain.pi(), 3.5 * chain.weights().values), 3.5 * b, 1e-12 * b);
  }
}

TEST(SpectralReport, TriangleFields) {
  const auto r = spectral_report(c3());
  EXPECT_EQ(r.q_eigenvalues.size(), 3);
  EXPECT_NEAR(r.alpha_star, -0.5044, 5e-4);
  EXPECT_DOUBLE_EQ(r.recommended_d, 2.0 * std::sqrt(-r.alpha_star));
  EXPECT_EQ(r.damping, r.recommended_d);
  ASSERT_TRUE(r.mu_star.has_value());
  EXPECT_NEAR(r.mu_star->real(), -0.7102, 1e-3);
  EXPECT_EQ(r.l_eigenvalues.size(), 6);
  EXPECT_GT(r.lambda_rayleigh, 0.0);
  const auto skipped = spectral_report(c3(), 1.0, false);
  EXPECT_FALSE(skipped.mu_star.has_value());
  EXPECT_EQ(skipped.damping, 1.0);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dphase/nehari.hpp"
#include "oracles.hpp"

using namespace dphase;

namespace {

double tridiagonal_lam1(int n) {
  const double h = 1.0 / (n + 1);
  const double s = std::sin(std::numbers::pi * h / 2.0);
  return 4.0 / (h * h) * s * s;
}

}  // namespace

TEST(Nehari, ProjectHatExample) {
  const DiscreteFunction u(build_mesh_1d(1), std::vector<double>{1.0});
  const EnergyParams prm{1.0, 1.0, 2.0, 4.0, 64.0, 0.0};  // lambda l4 = 32 = b + 16
  const DiscreteFunction v = project(u, prm);
  EXPECT_NEAR(v.values[0], 0.5, 1e-15);
  EXPECT_NEAR(phi_pairing(v, prm), 0.0, 1e-13);
}

TEST(Nehari, ProjectIsIdempotent) {
  std::mt19937_64 rng(4);
  const Mesh m = build_mesh_1d(12);
  const DiscreteFunction u(m, oracle::random_vector(rng, 12, 0.1, 1.0));
  const EnergyParams prm{1.0, 1.0, 2.0, 4.0, 50.0 * rayleigh_quotient(u, 4.0), 0.0};
  const DiscreteFunction v = project(u, prm);
  const DiscreteFunction w = project(v, prm);
  EXPECT_LE((w.values - v.values).norm(), 1e-12 * v.values.norm());
}

TEST(Nehari, ProjectionLandsOnNehariSet) {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> coef(0.1, 3.0), factor(1.05, 4.0);
  const std::array<std::array<double, 2>, 4> exps{{{1.5, 2.0}, {2.0, 4.0}, {1.2, 3.5}, {2.5, 3.0}}};
  const std::array<Mesh, 2> meshes{build_mesh_1d(25), build_mesh(2, {6, 5})};
  for (int k = 0; k < 100; ++k) {
    const Mesh& m = meshes[k % 2];
    const auto& pq = exps[k % 4];
    const DiscreteFunction u(m, oracle::random_vector(rng, Eigen::Index(m.num_nodes())));
    EnergyParams prm{coef(rng), coef(rng), pq[0], pq[1], 1.0, 0.0};
    prm.lambda = prm.beta * rayleigh_quotient(u, prm.q) * factor(rng);
    const DiscreteFunction v = project(u, prm);
    const double scale = prm.alpha * grad_rnorm(v, prm.p) + prm.beta * grad_rnorm(v, prm.q);
    EXPECT_LE(std::abs(phi_pairing(v, prm)), 1e-12 * scale) << k;
    EXPECT_NEAR(phi(v, prm), reduced_energy(v, prm), 1e-12 * reduced_energy(v, prm)) << k;
    EXPECT_LE(constraint_residual(v, prm), 1e-12);
  }
}

TEST(Nehari, PairingSignStructure) {
  std::mt19937_64 rng(8);
  const Mesh m = build_mesh_1d(20);
  for (int k = 0; k < 30; ++k) {
    const DiscreteFunction u(m, oracle::random_vector(rng, 20));
    EnergyParams prm{1.0, 0.5, 1.5, 3.0, 1.0, 0.0};
    prm.lambda = 2.0 * prm.beta * rayleigh_quotient(u, prm.q);
    const DiscreteFunction v = project(u, prm);
    EXPECT_GT(phi_pairing(v.scaled(0.5), prm), 0.0);
    EXPECT_LT(phi_pairing(v.scaled(2.0), prm), 0.0);
  }
}

TEST(Nehari, NotProjectableAtOrBelowThreshold) {
  const int n = 31;
  const Mesh m = build_mesh_1d(n);
  const auto e = principal_eigenpair(m, 2.0);
  ASSERT_TRUE(e.converged);
  const double lam1 = tridiagonal_lam1(n);
  for (double beta : {0.3, 1.0, 2.5}) {
    for (double f : {0.1, 0.5, 0.9, 0.999, 1.0 - 1e-9}) {
      const EnergyParams prm{1.0, beta, 1.5, 2.0, f * beta * lam1, 0.0};
      EXPECT_THROW(project(e.u1, prm), NotProjectable) << beta << " " << f;
    }
    const EnergyParams ok{1.0, beta, 1.5, 2.0, 1.001 * beta * lam1, 0.0};
    EXPECT_NO_THROW(project(e.u1, ok));
  }
}

TEST(Nehari, ProjectRejectsWrongBranch) {
  const DiscreteFunction u(build_mesh_1d(1), std::vector<double>{1.0});
  EXPECT_THROW(project(u, {1.0, 1.0, 3.0, 2.0, 10.0, 0.0}), InvalidArgument);
  EXPECT_THROW(project(DiscreteFunction(build_mesh_1d(2)), {1.0, 1.0, 2.0, 3.0, 10.0, 0.0}), InvalidArgument);
}

TEST(Nehari, SolveAboveThreshold) {
  const Mesh m = build_mesh_1d(31);
  const double lam1 = tridiagonal_lam1(31);
  const EnergyParams prm{1.0, 1.0, 1.5, 2.0, 2.0 * lam1};
  const SolveResult r = solve(prm, m);
  EXPECT_EQ(r.branch, Branch::nehari);
  EXPECT_TRUE(r.converged);
  EXPECT_GT(r.m_lambda, 0.0);
  EXPECT_LT(r.weak_residual, 1e-6);
  EXPECT_LT(verify_eigenpair(r.u_hat, prm), 1e-6);
  EXPECT_NEAR(r.threshold, lam1, 1e-8 * lam1);
  EXPECT_LT(r.constraint_residual, 1e-12);
  EXPECT_EQ(r.sign_changes, 0);
  // the reduced-energy identity holds along the whole trace
  ASSERT_EQ(r.trace.size(), r.phi_trace.size());
  for (std::size_t k = 0; k < r.trace.size(); ++k)
    EXPECT_NEAR(r.phi_trace[k], r.trace[k], 1e-10 * r.trace[k]);
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    EXPECT_LE(r.trace[k], r.trace[k - 1] * (1.0 + 1e-13));
}

TEST(Nehari, SolveBelowThresholdIsInfeasible) {
  const Mesh m = build_mesh_1d(31);
  const double lam1 = tridiagonal_lam1(31);
  for (double f : {0.5, 0.9}) {
    try {
      solve({1.0, 1.0, 1.5, 2.0, f * lam1}, m);
      FAIL() << "expected InfeasibleLambda";
    } catch (const InfeasibleLambda& e) {
      EXPECT_NEAR(e.threshold(), lam1, 1e-8 * lam1);
    }
  }
}

TEST(Nehari, SolveTwoDimensional) {
  const Mesh m = build_mesh(2, {9, 9});
  const EigenPair e = principal_eigenpair(m, 4.0);
  const EnergyParams prm{1.0, 0.5, 2.0, 4.0, 2.0 * 0.5 * e.lam1};
  const SolveResult r = solve(prm, m, {}, &e);
  EXPECT_TRUE(r.converged);
  EXPECT_GT(r.m_lambda, 0.0);
  EXPECT_NEAR(phi(r.u_hat, prm), r.m_lambda, 1e-8 * r.m_lambda);
}

TEST(Nehari, CoerciveAboveThreshold) {
  const Mesh m = build_mesh_1d(31);
  const double lam1 = tridiagonal_lam1(31);
  const EnergyParams prm{1.0, 1.0, 3.0, 2.0, 2.0 * lam1};
  const SolveResult r = solve_coercive(prm, m);
  EXPECT_EQ(r.branch, Branch::coercive);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.m_lambda, 0.0);
  EXPECT_LT(r.weak_residual, 1e-6);
  EXPECT_NEAR(phi(r.u_hat, prm), r.m_lambda, 1e-14 * std::abs(r.m_lambda));
  // a critical point lies on the Nehari set too
  EXPECT_LT(constraint_residual(r.u_hat, prm), 1e-6);
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k], r.trace[k - 1] + 1e-13 * std::abs(r.trace[k - 1]));
}

TEST(Nehari, CoerciveBelowThresholdIsInfeasible) {
  const Mesh m = build_mesh_1d(31);
  const double lam1 = tridiagonal_lam1(31);
  EXPECT_THROW(solve_coercive({1.0, 1.0, 3.0, 2.0, 0.9 * lam1}, m), InfeasibleLambda);
  EXPECT_THROW(solve_coercive({1.0, 1.0, 3.0, 2.0, 0.5 * lam1}, m), InfeasibleLambda);
}

TEST(Nehari, DoublingIterationCapLeavesResultUnchanged) {
  const Mesh m = build_mesh_1d(31);
  const double lam1 = tridiagonal_lam1(31);
  SolverOptions a;
  SolverOptions b;
  b.max_iter = 2 * a.max_iter;
  for (const EnergyParams& prm : {EnergyParams{1.0, 1.0, 1.5, 2.0, 2.0 * lam1}, EnergyParams{1.0, 1.0, 3.0, 2.0, 2.0 * lam1}}) {
    const SolveResult ra = solve_any(prm, m, a);
    const SolveResult rb = solve_any(prm, m, b);
    EXPECT_EQ(ra.iterations, rb.iterations);
    EXPECT_LE((ra.u_hat.values - rb.u_hat.values).norm(), 1e-12 * ra.u_hat.values.norm());
    EXPECT_EQ(ra.m_lambda, rb.m_lambda);
  }
}

TEST(Nehari, RestartsAreSeededAndKeepTheBest) {
  const Mesh m = build_mesh_1d(21);
  const double lam1 = tridiagonal_lam1(21);
  const EnergyParams prm{1.0, 1.0, 1.5, 2.0, 1.5 * lam1};
  SolverOptions o;
  o.restarts = 3;
  o.seed = 42;
  const SolveResult a = solve(prm, m, o);
  const SolveResult b = solve(prm, m, o);
  EXPECT_EQ(a.m_lambda, b.m_lambda);
  EXPECT_LE(a.m_lambda, solve(prm, m).m_lambda * (1.0 + 1e-9));
}

TEST(Nehari, VerifyEigenpairSingleOperatorHarness) {
  const int n = 15;
  const Mesh m = build_mesh_1d(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::laplacian_1d(n, m.h(0)));
  for (int k = 0; k < 3; ++k) {
    const DiscreteFunction u(m, es.eigenvectors().col(k));
    const EnergyParams harness{0.0, 1.0, 3.0, 2.0, es.eigenvalues()[k], 0.0};
    EXPECT_LT(verify_eigenpair(u, harness), 1e-10) << k;
    const EnergyParams harness_p{1.0, 0.0, 2.0, 2.0, es.eigenvalues()[k], 0.0};
    EXPECT_LT(verify_eigenpair(u, harness_p), 1e-10) << k;
  }
}

TEST(Nehari, VerifyEigenpairNegativeControl) {
  const Mesh m = build_mesh_1d(15);
  const auto e = principal_eigenpair(m, 2.0);
  const EnergyParams wrong{1.0, 1.0, 1.5, 2.0, 3.0 * e.lam1, 0.0};
  EXPECT_GT(verify_eigenpair(e.u1, wrong), 0.1);
}

TEST(Nehari, SignChanges) {
  const Mesh m = build_mesh_1d(5);
  EXPECT_EQ(count_sign_changes(DiscreteFunction(m, std::vector<double>{1, 2, 3, 2, 1})), 0);
  EXPECT_EQ(count_sign_changes(DiscreteFunction(m, std::vector<double>{1, -2, 3, 0, -1})), 2);
  const Mesh m2 = build_mesh(2, {2, 2});
  EXPECT_EQ(count_sign_changes(DiscreteFunction(m2, std::vector<double>{1, -1, -1, 1})), 4);
}

TEST(Nehari, SolveAnyDispatchesAndValidates) {
  const Mesh m = build_mesh_1d(15);
  const double lam1 = tridiagonal_lam1(15);
  EXPECT_EQ(solve_any({1.0, 1.0, 1.5, 2.0, 2.0 * lam1}, m).branch, Branch::nehari);
  EXPECT_EQ(solve_any({1.0, 1.0, 3.0, 2.0, 2.0 * lam1}, m).branch, Branch::coercive);
  EXPECT_THROW(solve_any({1.0, 1.0, 2.0, 2.0, 2.0 * lam1}, m), InvalidArgument);
  EXPECT_THROW(solve({1.0, 1.0, 3.0, 2.0, 2.0 * lam1}, m), InvalidArgument);
  EXPECT_THROW(solve_coercive({1.0, 1.0, 1.5, 2.0, 2.0 * lam1}, m), InvalidArgument);
}

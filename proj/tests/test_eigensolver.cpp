#include "doctest.h"
#include "oracles.hpp"

#include "breather/eigensolver.hpp"
#include "breather/random_potential.hpp"

#include <cmath>
#include <random>

using namespace breather;

namespace {

SparseOperator free_operator(int d, int side, int m, Boundary bc) {
  const Grid g = build_grid(d, side, m, bc);
  return assemble_hamiltonian(g, PotentialField::zero(g.size()));
}

SparseOperator random_operator(std::mt19937_64& gen, int d, int side, int m, Boundary bc, double scale) {
  const Grid g = build_grid(d, side, m, bc);
  std::uniform_real_distribution<double> u(0.0, scale);
  std::vector<double> v(g.size());
  for (double& x : v) x = u(gen);
  return assemble_hamiltonian(g, PotentialField(v));
}

void check_solution_invariants(const SparseOperator& op, const EigenSolution& sol, double tol) {
  const double w = op.grid().cell_volume();
  const Eigen::MatrixXd gram = w * sol.vectors.transpose() * sol.vectors;
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = 0; j < gram.cols(); ++j) {
      if (i == j)
        CHECK(std::abs(gram(i, j) - 1.0) <= 1e-10);
      else
        CHECK(std::abs(gram(i, j)) <= 1e-8);
    }
  for (std::size_t k = 0; k + 1 < sol.size(); ++k) CHECK(sol.energies[k] <= sol.energies[k + 1]);
  for (double r : sol.residuals) CHECK(r <= tol);
  for (double e : sol.energies) CHECK(e <= sol.threshold + 1e-9);
  if (!sol.empty())
    CHECK(sol.size() == count_in_interval(op, sol.energies.front() - 1.0, sol.threshold));
}

}  // namespace

TEST_CASE("dense path reproduces the four-point Dirichlet spectrum") {
  const SparseOperator op = free_operator(1, 1, 5, Boundary::Dirichlet);
  const std::vector<double> exact = oracle::dirichlet_1d(1, 5);
  // (4/h^2) sin^2(k pi / 10), h = 0.2
  CHECK(exact[0] == doctest::Approx(9.549150281252629).epsilon(1e-13));
  CHECK(exact[3] == doctest::Approx(90.45084971874738).epsilon(1e-13));
  const EigenSolution sol = eigenpairs_below(op, 100.0);
  REQUIRE(sol.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(sol.energies[k] - exact[k]) <= 1e-12 * exact[k]);
  check_solution_invariants(op, sol, 1e-9);
}

TEST_CASE("threshold below the ground state gives an empty solution") {
  const SparseOperator op = free_operator(1, 3, 8, Boundary::Dirichlet);
  CHECK(eigenpairs_below(op, 0.5).empty());
  CHECK(eigenpairs_below(op, -100.0).empty());
  SolverOptions iterative;
  iterative.dense_limit = 0;
  CHECK(eigenpairs_below(op, 0.5, iterative).empty());
}

TEST_CASE("threshold is inclusive") {
  const SparseOperator op = free_operator(1, 1, 5, Boundary::Dirichlet);
  const double e2 = oracle::dirichlet_1d(1, 5)[1];
  CHECK(count_in_interval(op, 0.0, e2) == 2);
  CHECK(eigenpairs_below(op, e2).size() == 2);
}

TEST_CASE("solver tolerance outside (0, 1e-6] is rejected") {
  const SparseOperator op = free_operator(1, 1, 5, Boundary::Dirichlet);
  SolverOptions bad;
  bad.tol = 1e-3;
  CHECK_THROWS_AS(eigenpairs_below(op, 10.0, bad), std::invalid_argument);
}

TEST_CASE("iterative path agrees with the dense oracle on random instances") {
  std::mt19937_64 gen(2024);
  SolverOptions iterative;
  iterative.dense_limit = 0;
  struct Case {
    int d, side, m;
    Boundary bc;
  };
  const Case cases[] = {{1, 9, 8, Boundary::Dirichlet}, {1, 7, 6, Boundary::Periodic}, {1, 5, 8, Boundary::Neumann},
                        {2, 3, 5, Boundary::Dirichlet}, {2, 3, 4, Boundary::Periodic}, {2, 1, 12, Boundary::Neumann}};
  for (const Case& c : cases) {
    const SparseOperator op = random_operator(gen, c.d, c.side, c.m, c.bc, 4.0);
    const Eigen::VectorXd oracle_values = dense_oracle(op).values;
    const double threshold = oracle_values[static_cast<Eigen::Index>(oracle_values.size() / 5)] + 1e-3;
    for (const SolverOptions& options : {SolverOptions{}, iterative}) {
      const EigenSolution sol = eigenpairs_below(op, threshold, options);
      std::size_t expected = 0;
      while (expected < static_cast<std::size_t>(oracle_values.size()) &&
             oracle_values[static_cast<Eigen::Index>(expected)] <= threshold)
        ++expected;
      REQUIRE(sol.size() == expected);
      for (std::size_t k = 0; k < expected; ++k) {
        const double ref = oracle_values[static_cast<Eigen::Index>(k)];
        CHECK(std::abs(sol.energies[k] - ref) <= 1e-8 * std::max(std::abs(ref), 1.0));
      }
      check_solution_invariants(op, sol, options.tol);
    }
  }
}

TEST_CASE("iterative path resolves degenerate clusters") {
  // the square has pairs (k1, k2) ~ (k2, k1), periodic 1D has +-k pairs
  SolverOptions iterative;
  iterative.dense_limit = 0;
  for (const auto& op : {free_operator(2, 3, 6, Boundary::Dirichlet), free_operator(1, 9, 8, Boundary::Periodic)}) {
    const Eigen::VectorXd ref = dense_oracle(op).values;
    const double threshold = ref[11] + 1e-6;
    const EigenSolution sol = eigenpairs_below(op, threshold, iterative);
    std::size_t expected = 0;
    while (ref[static_cast<Eigen::Index>(expected)] <= threshold) ++expected;
    REQUIRE(sol.size() == expected);
    for (std::size_t k = 0; k < expected; ++k)
      CHECK(std::abs(sol.energies[k] - ref[static_cast<Eigen::Index>(k)]) <= 1e-8 * std::max(1.0, ref[static_cast<Eigen::Index>(k)]));
    check_solution_invariants(op, sol, iterative.tol);
  }
}

TEST_CASE("count_in_interval matches the dense spectrum") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Boundary bc = static_cast<Boundary>(trial % 3);
    const SparseOperator op = random_operator(gen, 1 + trial % 2, 3, 4, bc, 10.0);
    const Eigen::VectorXd ref = dense_oracle(op).values;
    std::uniform_real_distribution<double> u(ref.minCoeff() - 1.0, ref.maxCoeff() + 1.0);
    double a = u(gen), b = u(gen);
    if (a > b) std::swap(a, b);
    const std::size_t expected = static_cast<std::size_t>(((ref.array() >= a) && (ref.array() <= b)).count());
    CHECK(count_in_interval(op, a, b) == expected);
  }
}

TEST_CASE("count_in_interval edge cases") {
  const SparseOperator op = free_operator(2, 3, 4, Boundary::Dirichlet);
  const double lambda1 = oracle::dirichlet_nd(2, 3, 4).front();
  CHECK(count_in_interval(op, -5.0, 0.5 * lambda1) == 0);
  const double h = op.grid().spacing();
  const double lo = -op.potential_sup() - 4.0 * 2 / (h * h) - 1.0;
  CHECK(count_in_interval(op, lo, 1e6) == op.dimension());
  CHECK_THROWS_AS(count_in_interval(op, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("shift on a degenerate eigenvalue with a zero shifted diagonal") {
  // V = 0, d = 2, h = 1/10: 4/h^2 = 400 is an eigenvalue and every diagonal entry of A - 400 vanishes
  const SparseOperator op = free_operator(2, 1, 10, Boundary::Dirichlet);
  const Eigen::VectorXd values = dense_oracle(op).values;
  const auto at_or_below = static_cast<std::size_t>((values.array() <= 400.0 + 1e-9).count());
  CHECK(count_in_interval(op, 0.0, 400.0) == at_or_below);
  const EigenSolution sol = eigenpairs_below(op, 400.0);
  CHECK(sol.size() == at_or_below);
  check_solution_invariants(op, sol, 1e-9);
}

TEST_CASE("interval counts are additive") {
  std::mt19937_64 gen(5);
  const SparseOperator op = random_operator(gen, 2, 3, 5, Boundary::Neumann, 3.0);
  for (double b : {10.0, 37.5, 80.0}) {
    const double a = -1.0, c = 150.0;
    // count[a, b] + count(b, c] with the upper nudge at b used on both sides
    const double eta_ab = interval_nudge(a, b);
    const std::size_t left = count_below(op.matrix(), b + eta_ab) - count_below(op.matrix(), a - eta_ab);
    const std::size_t right = count_below(op.matrix(), c + interval_nudge(a, c)) - count_below(op.matrix(), b + eta_ab);
    CHECK(left + right == count_in_interval(op, a, c));
  }
}

TEST_CASE("dense oracle basics") {
  SparseMatrix diag(3, 3);
  diag.insert(0, 0) = 3.0;
  diag.insert(1, 1) = 1.0;
  diag.insert(2, 2) = 2.0;
  const DenseSpectrum s = dense_oracle(diag);
  CHECK(s.values[0] == 1.0);
  CHECK(s.values[1] == 2.0);
  CHECK(s.values[2] == 3.0);

  const SparseOperator op = free_operator(1, 5, 8, Boundary::Dirichlet);
  const Eigen::VectorXd values = dense_oracle(op).values;
  const std::vector<double> exact = oracle::dirichlet_1d(5, 8);
  for (std::size_t k = 0; k < exact.size(); ++k)
    CHECK(std::abs(values[static_cast<Eigen::Index>(k)] - exact[k]) <= 1e-12 * exact.back());
  CHECK(std::abs(values.sum() - Eigen::MatrixXd(op.matrix()).trace()) <= 1e-9 * std::abs(values.sum()));

  const Grid big = build_grid(2, 5, 10, Boundary::Periodic);
  CHECK_THROWS_AS(dense_oracle(assemble_hamiltonian(big, PotentialField::zero(big.size()))), std::invalid_argument);
}

TEST_CASE("eigenvalues grow with the potential (min-max)") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Grid g = build_grid(trial % 2 + 1, 3, trial % 2 ? 5 : 20, static_cast<Boundary>(trial % 3));
    std::vector<double> v(g.size()), w(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = u(gen);
      w[i] = v[i] + (i % 3 == 0 ? u(gen) : 0.0);
    }
    const Eigen::VectorXd lo = dense_oracle(assemble_hamiltonian(g, PotentialField(v))).values;
    const Eigen::VectorXd hi = dense_oracle(assemble_hamiltonian(g, PotentialField(w))).values;
    CHECK((hi - lo).minCoeff() >= -1e-10);
  }
}

TEST_CASE("repeated solves are deterministic") {
  std::mt19937_64 gen(1);
  const SparseOperator op = random_operator(gen, 1, 15, 8, Boundary::Dirichlet, 1.0);
  SolverOptions iterative;
  iterative.dense_limit = 0;
  const EigenSolution a = eigenpairs_below(op, 20.0, iterative);
  const EigenSolution b = eigenpairs_below(op, 20.0, iterative);
  CHECK(a.energies == b.energies);
  CHECK(a.vectors == b.vectors);
}

TEST_CASE("large 1D problem takes the iterative path") {
  const SparseOperator op = free_operator(1, 9, 300, Boundary::Dirichlet);
  REQUIRE(op.dimension() > 2000);
  const EigenSolution sol = eigenpairs_below(op, 25.0);
  const std::vector<double> exact = oracle::dirichlet_1d(9, 300);
  std::size_t expected = 0;
  while (exact[expected] <= 25.0) ++expected;
  REQUIRE(sol.size() == expected);
  for (std::size_t k = 0; k < expected; ++k) CHECK(std::abs(sol.energies[k] - exact[k]) <= 1e-10 * exact[k]);
  check_solution_invariants(op, sol, 1e-9);
}

#include "breather/eigensolver.hpp"

#include "breather/rng.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace breather {

namespace {

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Factorization = Eigen::SimplicialLDLT<ColSparse, Eigen::Lower, Eigen::AMDOrdering<int>>;

ColSparse shifted_matrix(const SparseMatrix& a, double shift) {
  ColSparse m = a;
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.coeffRef(i, i) -= shift;
  return m;
}

// Factorizes a - shift I; returns false on a zero or non-finite pivot.
bool factorize(Factorization& ldlt, const SparseMatrix& a, double shift) {
  ldlt.compute(shifted_matrix(a, shift));
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd& d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] == 0.0 || !std::isfinite(d[i])) return false;
  return true;
}

double gershgorin_lower(const SparseMatrix& a) {
  double bound = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    double diag = 0.0, off = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
      if (it.col() == r)
        diag += it.value();
      else
        off += std::abs(it.value());
    }
    bound = std::min(bound, diag - off);
  }
  return a.rows() == 0 ? 0.0 : bound;
}

double gershgorin_radius(const SparseMatrix& a) {
  double bound = 0.0;
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) s += std::abs(it.value());
    bound = std::max(bound, s);
  }
  return bound;
}

double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& unit, double energy) {
  const double r = (a * unit - energy * unit).norm();
  return r / std::max(std::abs(energy), 1.0);
}

void check_options(const SolverOptions& options) {
  if (!(options.tol > 0.0 && options.tol <= 1e-6))
    throw std::invalid_argument("solver tolerance must lie in (0, 1e-6]");
}

// Euclidean-orthonormal eigenpairs in ascending order.
struct RawPairs {
  std::vector<double> values;
  Eigen::MatrixXd vectors;
};

// Lowest `count` eigenpairs of the dense matrix (Eigen's tridiagonal QR).
bool is_tridiagonal(const SparseMatrix& a) {
  for (Eigen::Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it)
      if (std::abs(it.col() - r) > 1 && it.value() != 0.0) return false;
  return true;
}

RawPairs dense_lowest(const SparseMatrix& a, std::size_t count, bool with_vectors) {
  const int job = with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  if (is_tridiagonal(a)) {
    // 1D Dirichlet/Neumann: skip the Householder reduction
    const Eigen::Index n = a.rows();
    Eigen::VectorXd diag(n), sub(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i < n; ++i) diag[i] = a.coeff(i, i);
    for (Eigen::Index i = 0; i + 1 < n; ++i) sub[i] = a.coeff(i + 1, i);
    solver.computeFromTridiagonal(diag, sub, job);
  } else {
    solver.compute(Eigen::MatrixXd(a), job);
  }
  if (solver.info() != Eigen::Success) throw SolverError("dense eigensolver failed");
  RawPairs out;
  out.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + count);
  if (with_vectors) out.vectors = solver.eigenvectors().leftCols(static_cast<Eigen::Index>(count));
  return out;
}

// Shift-invert Lanczos with full reorthogonalization and locking. Finds the
// `wanted` eigenpairs in [lower, threshold] where `lower` is a lower bound of
// the spectrum. Restarts from perturbed vectors until every eigenpair, including
// hidden members of degenerate clusters, has been locked.
RawPairs lanczos_below(const SparseMatrix& a, double threshold, std::size_t wanted, double lower,
                       const SolverOptions& options) {
  const Eigen::Index n = a.rows();
  const double span = threshold - lower;
  double sigma = lower + 0.5 * span;
  Factorization ldlt;
  bool ok = false;
  for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
    if (attempt > 0) sigma -= 1e-7 * span * attempt;
    ok = factorize(ldlt, a, sigma);
  }
  if (!ok) throw SolverError("shift-invert factorization failed near sigma = " + std::to_string(sigma));

  // wanted eigenvalues map to |theta| >= theta_cut
  const double theta_cut = 1.0 / (threshold - sigma);
  const double op_norm = gershgorin_radius(a) + std::abs(sigma);
  const double upper = threshold + interval_nudge(lower, threshold);

  Eigen::MatrixXd locked(n, 0);
  std::vector<double> locked_values;
  auto project_locked = [&](Eigen::VectorXd& w) {
    if (locked.cols() == 0) return;
    for (int pass = 0; pass < 2; ++pass) w -= locked * (locked.transpose() * w);
  };

  int restarts = 0;
  int stalled = 0;
  while (locked_values.size() < wanted) {
    if (restarts > options.max_restarts || stalled > 4)
      throw SolverError("Lanczos did not converge: locked " + std::to_string(locked_values.size()) +
                        " of " + std::to_string(wanted) + " eigenpairs");
    const std::size_t remaining = wanted - locked_values.size();
    const Eigen::Index free_dim = n - locked.cols();
    const Eigen::Index max_dim = std::min<Eigen::Index>(
        free_dim, options.max_krylov ? static_cast<Eigen::Index>(options.max_krylov)
                                     : static_cast<Eigen::Index>(std::max<std::size_t>(3 * remaining + 40, 80)));

    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    if (restarts > 0) {
      const std::uint64_t key = rng::derive_seed(options.seed, static_cast<std::uint64_t>(restarts));
      for (Eigen::Index i = 0; i < n; ++i) v[i] += rng::uniform(key, static_cast<std::uint64_t>(i)) - 0.5;
    }
    project_locked(v);
    if (v.norm() < 1e-8) {
      const std::uint64_t key = rng::derive_seed(options.seed ^ 0xabcdefULL, static_cast<std::uint64_t>(restarts));
      for (Eigen::Index i = 0; i < n; ++i) v[i] = rng::uniform(key, static_cast<std::uint64_t>(i)) - 0.5;
      project_locked(v);
    }
    v.normalize();

    Eigen::MatrixXd basis(n, max_dim + 1);
    std::vector<double> alpha, beta;
    basis.col(0) = v;
    Eigen::VectorXd theta;
    Eigen::MatrixXd ritz;
    Eigen::Index k = 0;
    double last_beta = 0.0;
    for (Eigen::Index j = 0; j < max_dim; ++j) {
      Eigen::VectorXd w = ldlt.solve(basis.col(j));
      project_locked(w);
      const double aj = basis.col(j).dot(w);
      w -= aj * basis.col(j);
      if (j > 0) w -= beta.back() * basis.col(j - 1);
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXd c = basis.leftCols(j + 1).transpose() * w;
        w -= basis.leftCols(j + 1) * c;
        project_locked(w);
      }
      alpha.push_back(aj);
      last_beta = w.norm();
      k = j + 1;

      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
      Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), k);
      Eigen::VectorXd sub = k > 1 ? Eigen::Map<Eigen::VectorXd>(beta.data(), k - 1) : Eigen::VectorXd();
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      theta = tri.eigenvalues();
      ritz = tri.eigenvectors();
      const double theta_scale = theta.cwiseAbs().maxCoeff();
      const bool exhausted = last_beta <= 1e-13 * std::max(theta_scale, 1e-300) || k == max_dim;

      if (static_cast<std::size_t>(k) >= remaining || exhausted) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](Eigen::Index x, Eigen::Index y) { return std::abs(theta[x]) > std::abs(theta[y]); });
        bool all_converged = true;
        for (std::size_t t = 0; t < std::min<std::size_t>(remaining, order.size()); ++t) {
          const Eigen::Index i = order[t];
          const double lambda = sigma + 1.0 / theta[i];
          const double est = std::abs(last_beta * ritz(k - 1, i));
          // bound on ||A y - lambda y|| from the shift-inverted residual
          const double bound = op_norm * est / std::abs(theta[i]);
          if (bound > 0.1 * options.tol * std::max(std::abs(lambda), 1.0)) all_converged = false;
        }
        if (all_converged || exhausted) break;
      }
      if (last_beta == 0.0) break;
      beta.push_back(last_beta);
      basis.col(j + 1) = w / last_beta;
    }

    // lock converged Ritz pairs in the wanted window
    std::vector<std::pair<double, Eigen::Index>> candidates;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (std::abs(theta[i]) < theta_cut * (1.0 - 1e-12)) continue;
      const double lambda = sigma + 1.0 / theta[i];
      if (lambda > upper + 1e-10 * std::max(1.0, std::abs(threshold))) continue;
      candidates.emplace_back(lambda, i);
    }
    std::sort(candidates.begin(), candidates.end());
    std::size_t accepted = 0;
    for (const auto& [lambda, i] : candidates) {
      if (locked_values.size() == wanted) break;
      Eigen::VectorXd y = basis.leftCols(k) * ritz.col(i);
      project_locked(y);
      const double norm = y.norm();
      if (norm < 0.5) continue;
      y /= norm;
      const double rq = y.dot(a * y);
      if (relative_residual(a, y, rq) > options.tol) continue;
      locked.conservativeResize(Eigen::NoChange, locked.cols() + 1);
      locked.col(locked.cols() - 1) = y;
      locked_values.push_back(rq);
      ++accepted;
    }
    stalled = accepted == 0 ? stalled + 1 : 0;
    ++restarts;
  }

  // Rayleigh-Ritz on the locked space gives a consistent orthonormal basis.
  const Eigen::MatrixXd projected = locked.transpose() * (a * locked);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (projected + projected.transpose()));
  RawPairs out;
  out.vectors = locked * small.eigenvectors();
  for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) out.vectors.col(c).normalize();
  out.values.assign(small.eigenvalues().data(), small.eigenvalues().data() + small.eigenvalues().size());
  return out;
}

EigenSolution solve_below(const SparseOperator& op, double threshold, const SolverOptions& options,
                          bool with_vectors) {
  check_options(options);
  const SparseMatrix& a = op.matrix();
  const std::size_t n = op.dimension();
  EigenSolution sol;
  sol.threshold = threshold;
  sol.cell_volume = op.grid().cell_volume();
  if (n == 0) return sol;

  const double floor = gershgorin_lower(a) - 1.0;
  if (threshold < floor) return sol;
  const std::size_t certified = count_in_interval(a, floor, threshold);
  if (certified == 0) return sol;

  const double upper = threshold + interval_nudge(floor, threshold);
  RawPairs pairs;
  if (n <= options.dense_limit) {
    // one extra value to check the gap above E
    RawPairs dense = dense_lowest(a, std::min(certified + 1, n), with_vectors);
    const double slack = 1e-10 * (1.0 + gershgorin_radius(a));
    if (dense.values[certified - 1] > upper + slack ||
        (certified < n && dense.values[certified] < threshold - slack))
      throw SolverError("dense spectrum disagrees with the inertia count below E = " +
                        std::to_string(threshold));
    dense.values.resize(certified);
    if (with_vectors) dense.vectors.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(certified));
    pairs = std::move(dense);
  } else {
    // bisect with inertia counts for a lower bound close to the ground state
    double lo = floor, hi = upper;
    for (int it = 0; it < 40 && hi - lo > 0.02 * (threshold - lo); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(a, mid) == 0)
        lo = mid;
      else
        hi = mid;
    }
    pairs = lanczos_below(a, threshold, certified, lo, options);
  }

  if (pairs.values.size() != certified)
    throw SolverError("eigenpair count " + std::to_string(pairs.values.size()) +
                      " does not match certified count " + std::to_string(certified));
  sol.energies = std::move(pairs.values);
  if (with_vectors) {
    const double scale = 1.0 / std::sqrt(sol.cell_volume);
    sol.residuals.reserve(certified);
    for (std::size_t k = 0; k < certified; ++k) {
      const double r = relative_residual(a, pairs.vectors.col(static_cast<Eigen::Index>(k)), sol.energies[k]);
      if (r > options.tol)
        throw SolverError("eigenpair " + std::to_string(k) + " residual " + std::to_string(r) +
                          " exceeds tolerance");
      sol.residuals.push_back(r);
    }
    sol.vectors = scale * pairs.vectors;
  }
  return sol;
}

}  // namespace

double interval_nudge(double lo, double hi) { return 1e-12 * (1.0 + std::abs(lo) + std::abs(hi)); }

std::size_t count_below(const SparseMatrix& a, double shift, double retry_direction) {
  Factorization ldlt;
  // Zero or tiny pivots: move the shift in the retry direction with growing steps.
  for (double step : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    const double s = shift + retry_direction * step * (1.0 + std::abs(shift));
    if (!factorize(ldlt, a, s)) continue;
    const Eigen::VectorXd& d = ldlt.vectorD();
    return static_cast<std::size_t>((d.array() < 0.0).count());
  }
  throw SolverError("LDL^T factorization broke down near shift " + std::to_string(shift));
}

std::size_t count_in_interval(const SparseMatrix& a, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("count_in_interval requires lo < hi");
  const double eta = interval_nudge(lo, hi);
  const std::size_t above = count_below(a, hi + eta, +1.0);
  const std::size_t below = count_below(a, lo - eta, -1.0);
  return above >= below ? above - below : 0;
}

std::size_t count_in_interval(const SparseOperator& op, double lo, double hi) {
  return count_in_interval(op.matrix(), lo, hi);
}

EigenSolution eigenpairs_below(const SparseOperator& op, double threshold, const SolverOptions& options) {
  return solve_below(op, threshold, options, true);
}

std::vector<double> eigenvalues_below(const SparseOperator& op, double threshold,
                                      const SolverOptions& options) {
  // the iterative path needs vectors anyway
  const bool dense = op.dimension() <= options.dense_limit;
  return solve_below(op, threshold, options, !dense).energies;
}

DenseSpectrum dense_oracle(const SparseMatrix& a, bool with_vectors) {
  if (static_cast<std::size_t>(a.rows()) > kDenseOracleLimit)
    throw std::invalid_argument("dense_oracle is limited to N <= " + std::to_string(kDenseOracleLimit));
  const Eigen::MatrixXd dense(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      dense, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw SolverError("dense eigensolver failed");
  DenseSpectrum out;
  out.values = solver.eigenvalues();
  if (with_vectors) out.vectors = solver.eigenvectors();
  return out;
}

DenseSpectrum dense_oracle(const SparseOperator& op, bool with_vectors) {
  return dense_oracle(op.matrix(), with_vectors);
}

}  // namespace breather

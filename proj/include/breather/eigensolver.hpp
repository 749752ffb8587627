#pragma once

#include "breather/grid.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace breather {

/// Raised when a solve cannot deliver a certified answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  double tol = 1e-9;                  // relative residual bound, must lie in (0, 1e-6]
  std::size_t dense_limit = 2000;     // problems up to this size use the dense path
  std::size_t max_krylov = 0;         // 0 picks a size from the wanted count
  int max_restarts = 64;
  std::uint64_t seed = 0x9b1d5eedULL; // perturbation of restart vectors
};

// Eigenpairs E_1 <= E_2 <= ... <= threshold. Columns of `vectors` are
// orthonormal for the h^d-weighted inner product.
struct EigenSolution {
  std::vector<double> energies;
  Eigen::MatrixXd vectors;
  std::vector<double> residuals;
  double threshold = 0.0;
  double cell_volume = 1.0;

  std::size_t size() const { return energies.size(); }
  bool empty() const { return energies.empty(); }
};

EigenSolution eigenpairs_below(const SparseOperator& op, double threshold,
                               const SolverOptions& options = {});

/// Eigenvalues only; same certification as eigenpairs_below.
std::vector<double> eigenvalues_below(const SparseOperator& op, double threshold,
                                      const SolverOptions& options = {});

/// Number of eigenvalues strictly below `shift`, from the inertia of an LDL^T
/// factorization of A - shift I. Retries at shifts nudged in `retry_direction`.
std::size_t count_below(const SparseMatrix& a, double shift, double retry_direction = -1.0);

/// #{n : lo <= E_n <= hi}, with both ends nudged outward by 1e-12 (1 + |lo| + |hi|).
std::size_t count_in_interval(const SparseMatrix& a, double lo, double hi);
std::size_t count_in_interval(const SparseOperator& op, double lo, double hi);

/// Outward nudge used for closed intervals.
double interval_nudge(double lo, double hi);

struct DenseSpectrum {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // Euclidean-orthonormal columns, empty unless requested
};

constexpr std::size_t kDenseOracleLimit = 2000;

/// Full spectrum by dense symmetric diagonalization (tests and small runs).
DenseSpectrum dense_oracle(const SparseMatrix& a, bool with_vectors = false);
DenseSpectrum dense_oracle(const SparseOperator& op, bool with_vectors = false);

}  // namespace breather

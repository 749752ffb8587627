#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace breather {

enum class Boundary { Dirichlet, Neumann, Periodic };

std::string_view to_string(Boundary bc);
Boundary parse_boundary(std::string_view name);

/// Point in R^d. Coordinates beyond the grid dimension are zero.
using Point = std::array<double, 3>;
using MultiIndex = std::array<int, 3>;

/// One flag per grid node (0 or 1).
using NodeMask = std::vector<std::uint8_t>;

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Discretization of the box (-L/2, L/2)^d with spacing h = 1/m.
//
// Dirichlet grids are vertex-centered and keep only interior nodes,
// x_i = -L/2 + (i + 1) h for i = 0 .. mL - 2. Neumann and periodic grids are
// cell-centered, x_i = -L/2 + (i + 1/2) h for i = 0 .. mL - 1.
// Nodes are enumerated lexicographically with axis 0 varying fastest.
class Grid {
 public:
  Grid(int dim, int side, int density, Boundary bc);

  int dim() const { return dim_; }
  int side() const { return side_; }
  int density() const { return density_; }
  Boundary bc() const { return bc_; }

  double spacing() const { return 1.0 / density_; }
  double cell_volume() const;
  int points_per_axis() const { return per_axis_; }
  std::size_t size() const { return size_; }

  double axis_coordinate(int i) const;
  MultiIndex multi_index(std::size_t node) const;
  std::size_t linear_index(const MultiIndex& idx) const;
  Point node(std::size_t index) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int dim_;
  int side_;
  int density_;
  Boundary bc_;
  int per_axis_;
  std::size_t size_;
};

Grid build_grid(int dim, int side, int density, Boundary bc);

// Nodal samples of a bounded potential.
class PotentialField {
 public:
  PotentialField() = default;
  explicit PotentialField(std::vector<double> values);

  static PotentialField zero(std::size_t n) { return PotentialField(std::vector<double>(n, 0.0)); }

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  double sup_norm() const { return sup_norm_; }

 private:
  std::vector<double> values_;
  double sup_norm_ = 0.0;
};

// Immutable symmetric operator -Delta_h + V on a grid.
class SparseOperator {
 public:
  SparseOperator(SparseMatrix matrix, Grid grid, double potential_sup);

  const SparseMatrix& matrix() const { return matrix_; }
  const Grid& grid() const { return grid_; }
  Boundary bc() const { return grid_.bc(); }
  std::size_t dimension() const { return static_cast<std::size_t>(matrix_.rows()); }
  double potential_sup() const { return potential_sup_; }

  /// -sup|V|, a lower bound for the spectrum.
  double spectrum_lower_bound() const;

 private:
  SparseMatrix matrix_;
  Grid grid_;
  double potential_sup_;
};

SparseOperator assemble_hamiltonian(const Grid& grid, const PotentialField& potential);

Eigen::VectorXd apply_operator(const SparseOperator& op, const Eigen::VectorXd& v);

/// h^d * sum over flagged nodes of |psi_i|^2.
double mass_on_set(const Grid& grid, const Eigen::Ref<const Eigen::VectorXd>& psi,
                   const NodeMask& set);

}  // namespace breather

#include "breather/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace breather {

std::string_view to_string(Boundary bc) {
  switch (bc) {
    case Boundary::Dirichlet: return "dirichlet";
    case Boundary::Neumann: return "neumann";
    case Boundary::Periodic: return "periodic";
  }
  return "unknown";
}

Boundary parse_boundary(std::string_view name) {
  if (name == "dirichlet") return Boundary::Dirichlet;
  if (name == "neumann") return Boundary::Neumann;
  if (name == "periodic") return Boundary::Periodic;
  throw std::invalid_argument("unknown boundary condition '" + std::string(name) + "'");
}

Grid::Grid(int dim, int side, int density, Boundary bc)
    : dim_(dim), side_(side), density_(density), bc_(bc) {
  if (dim < 1 || dim > 3)
    throw std::invalid_argument("grid dimension must be 1, 2 or 3 (got " + std::to_string(dim) + ")");
  if (side < 1 || side % 2 == 0)
    throw std::invalid_argument("box side L must be a positive odd integer (got " +
                                std::to_string(side) + ")");
  if (density < 2)
    throw std::invalid_argument("mesh density m must be >= 2 (got " + std::to_string(density) + ")");
  per_axis_ = bc == Boundary::Dirichlet ? density * side - 1 : density * side;
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(per_axis_);
}

double Grid::cell_volume() const { return std::pow(spacing(), dim_); }

double Grid::axis_coordinate(int i) const {
  const double h = spacing();
  const double offset = bc_ == Boundary::Dirichlet ? 1.0 : 0.5;
  return -0.5 * side_ + (i + offset) * h;
}

MultiIndex Grid::multi_index(std::size_t node) const {
  MultiIndex idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    idx[a] = static_cast<int>(node % per_axis_);
    node /= per_axis_;
  }
  return idx;
}

std::size_t Grid::linear_index(const MultiIndex& idx) const {
  std::size_t node = 0;
  for (int a = dim_ - 1; a >= 0; --a) node = node * per_axis_ + static_cast<std::size_t>(idx[a]);
  return node;
}

Point Grid::node(std::size_t index) const {
  const MultiIndex idx = multi_index(index);
  Point x{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) x[a] = axis_coordinate(idx[a]);
  return x;
}

Grid build_grid(int dim, int side, int density, Boundary bc) { return Grid(dim, side, density, bc); }

PotentialField::PotentialField(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("potential values must be finite");
    sup_norm_ = std::max(sup_norm_, std::abs(v));
  }
}

SparseOperator::SparseOperator(SparseMatrix matrix, Grid grid, double potential_sup)
    : matrix_(std::move(matrix)), grid_(grid), potential_sup_(potential_sup) {}

double SparseOperator::spectrum_lower_bound() const {
  // -Delta_h is nonnegative for every boundary condition
  return -potential_sup_;
}

SparseOperator assemble_hamiltonian(const Grid& grid, const PotentialField& potential) {
  if (potential.size() != grid.size())
    throw std::invalid_argument("potential has " + std::to_string(potential.size()) +
                                " values but grid has " + std::to_string(grid.size()) + " nodes");
  const double h = grid.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const int n = grid.points_per_axis();
  const int d = grid.dim();
  const std::size_t size = grid.size();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(size * (2 * d + 1));
  for (std::size_t node = 0; node < size; ++node) {
    const MultiIndex idx = grid.multi_index(node);
    double diag = potential[node];
    for (int a = 0; a < d; ++a) {
      for (int step : {-1, 1}) {
        MultiIndex nb = idx;
        nb[a] += step;
        const bool inside = nb[a] >= 0 && nb[a] < n;
        switch (grid.bc()) {
          case Boundary::Dirichlet:
            // exterior value is zero: the coupling vanishes but the diagonal keeps 1/h^2
            diag += inv_h2;
            if (inside)
              triplets.emplace_back(node, grid.linear_index(nb), -inv_h2);
            break;
          case Boundary::Neumann:
            // mirrored ghost equals the node itself, so the term cancels
            if (inside) {
              diag += inv_h2;
              triplets.emplace_back(node, grid.linear_index(nb), -inv_h2);
            }
            break;
          case Boundary::Periodic:
            nb[a] = (nb[a] + n) % n;
            diag += inv_h2;
            triplets.emplace_back(node, grid.linear_index(nb), -inv_h2);
            break;
        }
      }
    }
    triplets.emplace_back(node, node, diag);
  }
  SparseMatrix matrix(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  matrix.setFromTriplets(triplets.begin(), triplets.end());
  matrix.makeCompressed();
  return SparseOperator(std::move(matrix), grid, potential.sup_norm());
}

Eigen::VectorXd apply_operator(const SparseOperator& op, const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != op.dimension())
    throw std::invalid_argument("vector length " + std::to_string(v.size()) +
                                " does not match operator dimension " +
                                std::to_string(op.dimension()));
  return op.matrix() * v;
}

double mass_on_set(const Grid& grid, const Eigen::Ref<const Eigen::VectorXd>& psi,
                   const NodeMask& set) {
  if (static_cast<std::size_t>(psi.size()) != grid.size() || set.size() != grid.size())
    throw std::invalid_argument("mass_on_set: vector or mask size does not match the grid");
  double sum = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set[i]) sum += psi[static_cast<Eigen::Index>(i)] * psi[static_cast<Eigen::Index>(i)];
  return grid.cell_volume() * sum;
}

}  // namespace breather

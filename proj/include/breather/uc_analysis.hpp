#pragma once

#include "breather/eigensolver.hpp"
#include "breather/grid.hpp"
#include "breather/random_potential.hpp"

#include <Eigen/Dense>

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace breather {

// Compression of the indicator W of an observability set onto the span of
// the eigenfunctions below E: M_mn = <psi_m, W psi_n> with the h^d inner product.
struct ObservabilityMatrix {
  Eigen::MatrixXd form;
  double threshold = 0.0;
  std::string ball_set;
};

ObservabilityMatrix observability_matrix(const EigenSolution& sol, const NodeMask& set,
                                         const Grid& grid, std::string label = {});
ObservabilityMatrix observability_matrix(const EigenSolution& sol, const BallSet& balls,
                                         const Grid& grid);

/// Smallest eigenvalue of M: the best constant C with int_S |psi|^2 >= C int |psi|^2 on the span.
double sharp_uc_constant(const ObservabilityMatrix& m);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
};

/// Ordinary least squares of log y against log x.
FitResult fit_exponent(std::span<const double> xs, std::span<const double> ys);

/// delta^{K0 (1 + |V|^{2/3} + |E|^{1/2})}, reported as an overlay only.
double sfuc_bound(double delta, double norm_v, double energy, double k0_assumed);

enum class SweepVariable { Delta, Scale, PotentialNorm, Energy };
std::string_view to_string(SweepVariable variable);

struct UcPoint {
  double value = 0.0;
  std::optional<double> lambda_min;
  std::size_t n_basis = 0;
  double energy = 0.0;
  double norm_v = 0.0;
  double delta = 0.0;
  int side = 1;
  int density = 8;
  std::string placement;
  double bound_overlay = 0.0;
};

struct UcSettings {
  int dim = 1;
  int density = 8;
  Boundary bc = Boundary::Dirichlet;
  bool refine_for_delta = true;  // raise m so that h <= delta / 4
  double k0_assumed = 1.0;
  double scale_ratio = 0.5;      // scale-free flag if min < ratio * max
  double poly_residual = 0.5;    // max log residual of the delta fit
  SolverOptions solver;
  unsigned threads = 1;
};

struct ScalingRecord {
  SweepVariable variable = SweepVariable::Delta;
  std::vector<UcPoint> points;
  std::optional<FitResult> fit;
  bool degenerate = false;
  bool scale_violation = false;
  bool polynomial = true;
  std::string failure;
  double scale_ratio = 0.5;
  double poly_residual = 0.5;
  double k0_assumed = 1.0;

  bool flagged() const { return degenerate || scale_violation || !polynomial || !failure.empty(); }
};

/// Mesh density used for a ball radius delta under the settings.
int density_for(double delta, const UcSettings& settings);

UcPoint uc_point(const PotentialRecipe& recipe, double energy, double delta, int side,
                 Placement placement, const UcSettings& settings);

ScalingRecord scale_sweep(const PotentialRecipe& recipe, double energy, double delta, Placement placement,
                          std::span<const int> sides, const UcSettings& settings);
ScalingRecord delta_sweep(const PotentialRecipe& recipe, double energy, int side, Placement placement,
                          std::span<const double> deltas, const UcSettings& settings);
/// Sweep over the potential amplitude (|V|_inf) at fixed delta, L and E.
ScalingRecord potential_sweep(const PotentialRecipe& recipe, double energy, double delta, int side,
                              Placement placement, std::span<const double> amplitudes,
                              const UcSettings& settings);
ScalingRecord energy_sweep(const PotentialRecipe& recipe, double delta, int side, Placement placement,
                           std::span<const double> energies, const UcSettings& settings);

/// CSV with header var,value,lambda_min,n_basis,E,normV,delta,L,placement,bound_overlay.
void write_csv(const ScalingRecord& record, std::ostream& out);

}  // namespace breather

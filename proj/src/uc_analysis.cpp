#include "breather/uc_analysis.hpp"

#include "breather/io.hpp"
#include "breather/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace breather {

ObservabilityMatrix observability_matrix(const EigenSolution& sol, const NodeMask& set,
                                         const Grid& grid, std::string label) {
  if (set.size() != grid.size() || static_cast<std::size_t>(sol.vectors.rows()) != grid.size())
    throw std::invalid_argument("observability_matrix: eigenbasis, mask and grid sizes differ");
  const Eigen::Index n = static_cast<Eigen::Index>(sol.size());
  ObservabilityMatrix m;
  m.threshold = sol.threshold;
  m.ball_set = std::move(label);
  m.form = Eigen::MatrixXd::Zero(n, n);

  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set[i]) rows.push_back(static_cast<Eigen::Index>(i));
  if (rows.empty() || n == 0) return m;

  Eigen::MatrixXd restricted(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) restricted.row(static_cast<Eigen::Index>(r)) = sol.vectors.row(rows[r]);
  const Eigen::MatrixXd gram = grid.cell_volume() * (restricted.transpose() * restricted);
  // accumulate the upper triangle once and mirror it
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) m.form(i, j) = m.form(j, i) = gram(i, j);
  return m;
}

ObservabilityMatrix observability_matrix(const EigenSolution& sol, const BallSet& balls, const Grid& grid) {
  return observability_matrix(sol, indicator(balls, grid), grid, balls.label);
}

double sharp_uc_constant(const ObservabilityMatrix& m) {
  if (m.form.rows() == 0) throw std::invalid_argument("sharp_uc_constant: empty observability matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.form, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

FitResult fit_exponent(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_exponent: xs and ys differ in length");
  if (xs.size() < 3) throw std::invalid_argument("fit_exponent: at least 3 points are required");
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0)) throw std::invalid_argument("fit_exponent: x values must be positive");
    if (!(ys[i] > 0.0)) throw std::invalid_argument("fit_exponent: y values must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_exponent: x values are all equal");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < n; ++i)
    fit.max_residual = std::max(fit.max_residual, std::abs(ly[i] - (fit.intercept + fit.slope * lx[i])));
  return fit;
}

double sfuc_bound(double delta, double norm_v, double energy, double k0_assumed) {
  return std::pow(delta, k0_assumed * (1.0 + std::pow(norm_v, 2.0 / 3.0) + std::sqrt(std::abs(energy))));
}

std::string_view to_string(SweepVariable variable) {
  switch (variable) {
    case SweepVariable::Delta: return "delta";
    case SweepVariable::Scale: return "L";
    case SweepVariable::PotentialNorm: return "normV";
    case SweepVariable::Energy: return "E";
  }
  return "unknown";
}

int density_for(double delta, const UcSettings& settings) {
  if (!settings.refine_for_delta) return settings.density;
  return std::max(settings.density, static_cast<int>(std::ceil(4.0 / delta - 1e-9)));
}

UcPoint uc_point(const PotentialRecipe& recipe, double energy, double delta, int side, Placement placement,
                 const UcSettings& settings) {
  const Grid grid(settings.dim, side, density_for(delta, settings), settings.bc);
  const PotentialField potential = make_potential(recipe, grid);
  const SparseOperator op = assemble_hamiltonian(grid, potential);
  const BallSet balls = standard_ball_set(side, settings.dim, delta, placement);
  const NodeMask set = indicator(balls, grid);

  UcPoint point;
  point.energy = energy;
  point.norm_v = potential.sup_norm();
  point.delta = delta;
  point.side = side;
  point.density = grid.density();
  point.placement = to_string(placement);
  point.bound_overlay = sfuc_bound(delta, point.norm_v, energy, settings.k0_assumed);

  const EigenSolution sol = eigenpairs_below(op, energy, settings.solver);
  point.n_basis = sol.size();
  if (!sol.empty()) point.lambda_min = sharp_uc_constant(observability_matrix(sol, set, grid, balls.label));
  return point;
}

namespace {

template <typename Param, typename Eval>
ScalingRecord run_sweep(SweepVariable variable, std::span<const Param> values, const UcSettings& settings,
                        Eval eval) {
  ScalingRecord record;
  record.variable = variable;
  record.scale_ratio = settings.scale_ratio;
  record.poly_residual = settings.poly_residual;
  record.k0_assumed = settings.k0_assumed;

  std::vector<std::optional<UcPoint>> points(values.size());
  std::vector<std::string> errors(values.size());
  parallel_for(values.size(), settings.threads, [&](std::size_t i) {
    try {
      UcPoint p = eval(values[i]);
      p.value = static_cast<double>(values[i]);
      points[i] = std::move(p);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  // keep the prefix of points computed before the first failure
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!errors[i].empty()) {
      record.failure = std::string(to_string(variable)) + " = " + format_number(static_cast<double>(values[i])) +
                       ": " + errors[i];
      break;
    }
    if (points[i]) record.points.push_back(*points[i]);
  }

  std::vector<double> xs, ys;
  for (const UcPoint& p : record.points) {
    if (!p.lambda_min) {
      record.degenerate = true;
      continue;
    }
    if (*p.lambda_min > 0.0) {
      xs.push_back(p.value);
      ys.push_back(*p.lambda_min);
    }
  }
  if (xs.size() >= 3) {
    try {
      record.fit = fit_exponent(xs, ys);
    } catch (const std::invalid_argument&) {
    }
  }
  return record;
}

}  // namespace

ScalingRecord scale_sweep(const PotentialRecipe& recipe, double energy, double delta, Placement placement,
                          std::span<const int> sides, const UcSettings& settings) {
  for (int side : sides)
    if (side < 1 || side % 2 == 0) throw std::invalid_argument("scale_sweep: every L must be odd");
  // random presets redraw per scale; |V|_inf stays at the preset amplitude
  ScalingRecord record = run_sweep<int>(SweepVariable::Scale, sides, settings, [&](int side) {
    return uc_point(recipe, energy, delta, side, placement, settings);
  });
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const UcPoint& p : record.points) {
    if (!p.lambda_min) continue;
    lo = std::min(lo, *p.lambda_min);
    hi = std::max(hi, *p.lambda_min);
  }
  record.scale_violation = record.degenerate || (hi > 0.0 && lo < settings.scale_ratio * hi);
  return record;
}

ScalingRecord delta_sweep(const PotentialRecipe& recipe, double energy, int side, Placement placement,
                          std::span<const double> deltas, const UcSettings& settings) {
  for (double delta : deltas)
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("delta_sweep: every delta must lie in (0, 1/2)");
  ScalingRecord record = run_sweep<double>(SweepVariable::Delta, deltas, settings, [&](double delta) {
    return uc_point(recipe, energy, delta, side, placement, settings);
  });
  // an exponential law in 1/delta would bend away from any affine fit in log-log
  record.polynomial = record.fit && record.fit->max_residual <= settings.poly_residual;
  return record;
}

ScalingRecord potential_sweep(const PotentialRecipe& recipe, double energy, double delta, int side,
                              Placement placement, std::span<const double> amplitudes,
                              const UcSettings& settings) {
  return run_sweep<double>(SweepVariable::PotentialNorm, amplitudes, settings, [&](double amplitude) {
    PotentialRecipe scaled = recipe;
    scaled.amplitude = amplitude;
    return uc_point(scaled, energy, delta, side, placement, settings);
  });
}

ScalingRecord energy_sweep(const PotentialRecipe& recipe, double delta, int side, Placement placement,
                           std::span<const double> energies, const UcSettings& settings) {
  return run_sweep<double>(SweepVariable::Energy, energies, settings, [&](double energy) {
    return uc_point(recipe, energy, delta, side, placement, settings);
  });
}

void write_csv(const ScalingRecord& record, std::ostream& out) {
  out << "var,value,lambda_min,n_basis,E,normV,delta,L,placement,bound_overlay\n";
  for (const UcPoint& p : record.points) {
    out << to_string(record.variable) << ',' << format_number(p.value) << ',' << format_number(p.lambda_min) << ','
        << p.n_basis << ',' << format_number(p.energy) << ',' << format_number(p.norm_v) << ','
        << format_number(p.delta) << ',' << p.side << ',' << p.placement << ',' << format_number(p.bound_overlay)
        << '\n';
  }
}

}  // namespace breather

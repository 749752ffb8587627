#pragma once

#include "breather/grid.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace breather {

// Uniform law on [omega_minus, omega_plus] with 0 <= omega_minus < omega_plus < 1/2.
struct SiteDistribution {
  double omega_minus = 0.1;
  double omega_plus = 0.3;

  static SiteDistribution uniform(double lo, double hi);
  void validate() const;
  double density_sup() const { return 1.0 / (omega_plus - omega_minus); }
  double quantile(double u) const { return omega_minus + u * (omega_plus - omega_minus); }

  friend bool operator==(const SiteDistribution&, const SiteDistribution&) = default;
};

enum class SiteShape { Ball, Cube };
std::string_view to_string(SiteShape shape);
SiteShape parse_site_shape(std::string_view name);

/// Lattice points j with Lambda_1 + j inside Lambda_L, lexicographic with axis 0 fastest.
std::vector<MultiIndex> lattice_sites(int side, int dim);

struct BreatherConfiguration {
  int dim = 1;
  int side = 1;
  SiteDistribution dist;
  SiteShape shape = SiteShape::Ball;
  std::uint64_t seed = 0;
  std::vector<MultiIndex> sites;
  std::vector<double> radii;

  std::size_t site_index(const MultiIndex& j) const;
  double max_radius() const;
  double min_radius() const;
};

BreatherConfiguration sample_configuration(const SiteDistribution& dist, int side, int dim,
                                           std::uint64_t seed, SiteShape shape = SiteShape::Ball);

/// Configuration omega + delta: every radius shifted by delta. Requires max radius + delta <= 1/2.
BreatherConfiguration shifted(const BreatherConfiguration& config, double delta);

/// V_omega(x): 1 inside the ball (or cube) of radius omega_j around the site j, else 0.
double evaluate_breather(const BreatherConfiguration& config, const Point& x);

/// Alloy-type sum_j omega_j chi_{|x - j| < r}.
double evaluate_alloy(const BreatherConfiguration& config, const Point& x, double radius);

/// Nodes of supp(V_{omega+delta} - V_omega): omega_j <= |x - j| < omega_j + delta.
NodeMask increment_support(const BreatherConfiguration& config, double delta, const Grid& grid);

// Union of open balls B(z_j, radius), one per lattice site. `width` is the
// length scale the grid has to resolve (h <= width / 4).
struct BallSet {
  int dim = 1;
  double radius = 0.0;
  double width = 0.0;
  std::vector<MultiIndex> sites;
  std::vector<Point> centers;
  std::string label;

  /// B(z_j, radius) inside Lambda_1 + j for every site.
  bool contained_in_cells() const;
};

BallSet annulus_ball_set(const BreatherConfiguration& config, double delta);

enum class PlacementKind { Centered, Seeded, Corner };

struct Placement {
  PlacementKind kind = PlacementKind::Centered;
  std::uint64_t token = 0;

  static Placement centered() { return {PlacementKind::Centered, 0}; }
  static Placement corner() { return {PlacementKind::Corner, 0}; }
  static Placement seeded(std::uint64_t token) { return {PlacementKind::Seeded, token}; }
  friend bool operator==(const Placement&, const Placement&) = default;
};

std::string to_string(const Placement& placement);
Placement parse_placement(std::string_view name, std::uint64_t token = 0);

BallSet standard_ball_set(int side, int dim, double delta, Placement placement);

/// Nodes x with |x - z_j| < radius for some j. Enforces h <= 1/8 and h <= width/4.
NodeMask indicator(const BallSet& balls, const Grid& grid);

PotentialField sample_field_on_grid(const BreatherConfiguration& config, const Grid& grid);
PotentialField sample_alloy_on_grid(const BreatherConfiguration& config, double radius,
                                    const Grid& grid);

// Named potential presets used by sweeps and experiments. Random presets draw
// a fresh configuration for the grid's box from `seed`.
struct PotentialRecipe {
  enum class Kind { Zero, Cosine, Breather, Alloy };
  Kind kind = Kind::Zero;
  double amplitude = 1.0;
  SiteDistribution dist;
  SiteShape shape = SiteShape::Ball;
  double alloy_radius = 0.3;
  std::uint64_t seed = 0;

  static PotentialRecipe zero() { return {}; }
};

std::string_view to_string(PotentialRecipe::Kind kind);
PotentialRecipe::Kind parse_potential_kind(std::string_view name);

PotentialField make_potential(const PotentialRecipe& recipe, const Grid& grid);

nlohmann::json to_json(const BreatherConfiguration& config);
BreatherConfiguration configuration_from_json(const nlohmann::json& doc);

}  // namespace breather

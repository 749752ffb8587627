#include "breather/random_potential.hpp"

#include "breather/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace breather {

namespace {

double euclidean_distance(const Point& x, const MultiIndex& j, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double t = x[a] - j[a];
    s += t * t;
  }
  return std::sqrt(s);
}

double sup_distance(const Point& x, const MultiIndex& j, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) s = std::max(s, std::abs(x[a] - j[a]));
  return s;
}

double site_distance(const Point& x, const MultiIndex& j, int dim, SiteShape shape) {
  return shape == SiteShape::Ball ? euclidean_distance(x, j, dim) : sup_distance(x, j, dim);
}

// Lattice site whose unit cell contains x, clamped to the box.
MultiIndex owning_site(const Point& x, int side, int dim) {
  const int half = (side - 1) / 2;
  MultiIndex j{0, 0, 0};
  for (int a = 0; a < dim; ++a)
    j[a] = std::clamp(static_cast<int>(std::lround(x[a])), -half, half);
  return j;
}

void require_resolution(const Grid& grid, double width, const char* what) {
  if (grid.spacing() > width / 4.0 * (1.0 + 1e-12))
    throw std::invalid_argument(std::string(what) + ": mesh spacing h = " +
                                std::to_string(grid.spacing()) + " exceeds width/4 = " +
                                std::to_string(width / 4.0));
}

}  // namespace

SiteDistribution SiteDistribution::uniform(double lo, double hi) {
  SiteDistribution dist{lo, hi};
  dist.validate();
  return dist;
}

void SiteDistribution::validate() const {
  if (!(omega_minus >= 0.0 && omega_minus < omega_plus && omega_plus < 0.5))
    throw std::invalid_argument("site distribution needs 0 <= omega_minus < omega_plus < 1/2 (got [" +
                                std::to_string(omega_minus) + ", " + std::to_string(omega_plus) +
                                "])");
}

std::string_view to_string(SiteShape shape) { return shape == SiteShape::Ball ? "ball" : "cube"; }

SiteShape parse_site_shape(std::string_view name) {
  if (name == "ball") return SiteShape::Ball;
  if (name == "cube") return SiteShape::Cube;
  throw std::invalid_argument("unknown single-site shape '" + std::string(name) + "'");
}

std::vector<MultiIndex> lattice_sites(int side, int dim) {
  if (side < 1 || side % 2 == 0) throw std::invalid_argument("lattice_sites: L must be odd");
  const int half = (side - 1) / 2;
  std::size_t count = 1;
  for (int a = 0; a < dim; ++a) count *= static_cast<std::size_t>(side);
  std::vector<MultiIndex> sites;
  sites.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    MultiIndex j{0, 0, 0};
    std::size_t rest = k;
    for (int a = 0; a < dim; ++a) {
      j[a] = static_cast<int>(rest % side) - half;
      rest /= side;
    }
    sites.push_back(j);
  }
  return sites;
}

std::size_t BreatherConfiguration::site_index(const MultiIndex& j) const {
  const int half = (side - 1) / 2;
  std::size_t k = 0;
  for (int a = dim - 1; a >= 0; --a) k = k * side + static_cast<std::size_t>(j[a] + half);
  return k;
}

double BreatherConfiguration::max_radius() const {
  return radii.empty() ? 0.0 : *std::max_element(radii.begin(), radii.end());
}

double BreatherConfiguration::min_radius() const {
  return radii.empty() ? 0.0 : *std::min_element(radii.begin(), radii.end());
}

BreatherConfiguration sample_configuration(const SiteDistribution& dist, int side, int dim,
                                           std::uint64_t seed, SiteShape shape) {
  dist.validate();
  if (dim < 1 || dim > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
  BreatherConfiguration config;
  config.dim = dim;
  config.side = side;
  config.dist = dist;
  config.shape = shape;
  config.seed = seed;
  config.sites = lattice_sites(side, dim);
  config.radii.reserve(config.sites.size());
  for (const MultiIndex& j : config.sites) {
    const double u = rng::uniform(rng::site_key(seed, std::span<const int>(j.data(), dim)));
    config.radii.push_back(dist.quantile(u));
  }
  return config;
}

BreatherConfiguration shifted(const BreatherConfiguration& config, double delta) {
  if (config.max_radius() + delta > 0.5 + 1e-15)
    throw std::invalid_argument("shifted radii would exceed 1/2");
  if (config.min_radius() + delta < 0.0) throw std::invalid_argument("shifted radii would be negative");
  BreatherConfiguration out = config;
  for (double& r : out.radii) r += delta;
  return out;
}

double evaluate_breather(const BreatherConfiguration& config, const Point& x) {
  // radii stay below 1/2, so only the owning cell can contribute
  const MultiIndex j = owning_site(x, config.side, config.dim);
  const double r = config.radii[config.site_index(j)];
  return site_distance(x, j, config.dim, config.shape) < r ? 1.0 : 0.0;
}

double evaluate_alloy(const BreatherConfiguration& config, const Point& x, double radius) {
  if (!(radius > 0.0 && radius < 0.5))
    throw std::invalid_argument("alloy radius must lie in (0, 1/2)");
  const MultiIndex j = owning_site(x, config.side, config.dim);
  return euclidean_distance(x, j, config.dim) < radius ? config.radii[config.site_index(j)] : 0.0;
}

NodeMask increment_support(const BreatherConfiguration& config, double delta, const Grid& grid) {
  const double admissible = 0.5 - config.dist.omega_plus;
  if (delta < 0.0 || delta > admissible + 1e-15)
    throw std::invalid_argument("increment width delta = " + std::to_string(delta) +
                                " outside [0, 1/2 - omega_plus] = [0, " +
                                std::to_string(admissible) + "]");
  NodeMask mask(grid.size(), 0);
  if (delta == 0.0) return mask;
  require_resolution(grid, delta, "increment_support");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.node(i);
    const MultiIndex j = owning_site(x, config.side, config.dim);
    const double r = config.radii[config.site_index(j)];
    const double dist = site_distance(x, j, config.dim, config.shape);
    mask[i] = (dist >= r && dist < r + delta) ? 1 : 0;
  }
  return mask;
}

bool BallSet::contained_in_cells() const {
  for (std::size_t k = 0; k < centers.size(); ++k) {
    double off = 0.0;
    for (int a = 0; a < dim; ++a) off = std::max(off, std::abs(centers[k][a] - sites[k][a]));
    if (off + radius > 0.5 + 1e-15) return false;
  }
  return true;
}

BallSet annulus_ball_set(const BreatherConfiguration& config, double delta) {
  const double admissible = 0.5 - config.dist.omega_plus;
  if (!(delta > 0.0) || delta > admissible + 1e-15)
    throw std::invalid_argument("annulus_ball_set: delta = " + std::to_string(delta) +
                                " outside (0, 1/2 - omega_plus]");
  BallSet balls;
  balls.dim = config.dim;
  balls.radius = delta / 2.0;
  balls.width = delta;
  balls.sites = config.sites;
  balls.label = "annulus";
  balls.centers.reserve(config.sites.size());
  for (std::size_t k = 0; k < config.sites.size(); ++k) {
    Point z{0.0, 0.0, 0.0};
    for (int a = 0; a < config.dim; ++a) z[a] = config.sites[k][a];
    z[0] += config.radii[k] + delta / 2.0;
    balls.centers.push_back(z);
  }
  return balls;
}

std::string to_string(const Placement& placement) {
  switch (placement.kind) {
    case PlacementKind::Centered: return "centered";
    case PlacementKind::Corner: return "corner";
    case PlacementKind::Seeded: return "seeded";
  }
  return "unknown";
}

Placement parse_placement(std::string_view name, std::uint64_t token) {
  if (name == "centered") return Placement::centered();
  if (name == "corner") return Placement::corner();
  if (name == "seeded") return Placement::seeded(token);
  throw std::invalid_argument("unknown placement '" + std::string(name) + "'");
}

BallSet standard_ball_set(int side, int dim, double delta, Placement placement) {
  if (!(delta > 0.0 && delta < 0.5))
    throw std::invalid_argument("ball radius delta must lie in (0, 1/2) (got " +
                                std::to_string(delta) + ")");
  BallSet balls;
  balls.dim = dim;
  balls.radius = delta;
  balls.width = delta;
  balls.sites = lattice_sites(side, dim);
  balls.label = to_string(placement);
  const double slack = 0.5 - delta;
  for (const MultiIndex& j : balls.sites) {
    Point z{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) {
      z[a] = j[a];
      switch (placement.kind) {
        case PlacementKind::Centered: break;
        case PlacementKind::Corner: z[a] += slack; break;
        case PlacementKind::Seeded: {
          const double u = rng::uniform(rng::site_key(placement.token, std::span<const int>(j.data(), dim)),
                                        static_cast<std::uint64_t>(a));
          z[a] += slack * (2.0 * u - 1.0);
          break;
        }
      }
    }
    balls.centers.push_back(z);
  }
  return balls;
}

NodeMask indicator(const BallSet& balls, const Grid& grid) {
  if (balls.dim != grid.dim()) throw std::invalid_argument("ball set and grid dimensions differ");
  if (grid.spacing() > 0.125) throw std::invalid_argument("indicator: mesh spacing must be <= 1/8");
  require_resolution(grid, balls.width, "indicator");
  NodeMask mask(grid.size(), 0);
  const int half = (grid.side() - 1) / 2;
  const int dim = grid.dim();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.node(i);
    const MultiIndex own = owning_site(x, grid.side(), dim);
    // balls stay inside their cells, but check neighbours for robustness at cell faces
    MultiIndex lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      lo[a] = std::max(own[a] - 1, -half);
      hi[a] = std::min(own[a] + 1, half);
    }
    bool hit = false;
    for (int j2 = lo[2]; j2 <= hi[2] && !hit; ++j2)
      for (int j1 = lo[1]; j1 <= hi[1] && !hit; ++j1)
        for (int j0 = lo[0]; j0 <= hi[0] && !hit; ++j0) {
          MultiIndex j{j0, j1, j2};
          std::size_t k = 0;
          for (int a = dim - 1; a >= 0; --a) k = k * grid.side() + static_cast<std::size_t>(j[a] + half);
          const Point& z = balls.centers[k];
          double s = 0.0;
          for (int a = 0; a < dim; ++a) s += (x[a] - z[a]) * (x[a] - z[a]);
          hit = std::sqrt(s) < balls.radius;
        }
    mask[i] = hit ? 1 : 0;
  }
  return mask;
}

PotentialField sample_field_on_grid(const BreatherConfiguration& config, const Grid& grid) {
  if (config.dim != grid.dim() || config.side != grid.side())
    throw std::invalid_argument("configuration and grid describe different boxes");
  if (config.dist.omega_minus > 0.0)
    require_resolution(grid, 2.0 * config.min_radius(), "sample_field_on_grid");
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = evaluate_breather(config, grid.node(i));
  return PotentialField(std::move(values));
}

PotentialField sample_alloy_on_grid(const BreatherConfiguration& config, double radius,
                                    const Grid& grid) {
  if (config.dim != grid.dim() || config.side != grid.side())
    throw std::invalid_argument("configuration and grid describe different boxes");
  require_resolution(grid, 2.0 * radius, "sample_alloy_on_grid");
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = evaluate_alloy(config, grid.node(i), radius);
  return PotentialField(std::move(values));
}

std::string_view to_string(PotentialRecipe::Kind kind) {
  switch (kind) {
    case PotentialRecipe::Kind::Zero: return "zero";
    case PotentialRecipe::Kind::Cosine: return "cosine";
    case PotentialRecipe::Kind::Breather: return "breather";
    case PotentialRecipe::Kind::Alloy: return "alloy";
  }
  return "unknown";
}

PotentialRecipe::Kind parse_potential_kind(std::string_view name) {
  if (name == "zero") return PotentialRecipe::Kind::Zero;
  if (name == "cosine") return PotentialRecipe::Kind::Cosine;
  if (name == "breather") return PotentialRecipe::Kind::Breather;
  if (name == "alloy") return PotentialRecipe::Kind::Alloy;
  throw std::invalid_argument("unknown potential preset '" + std::string(name) + "'");
}

PotentialField make_potential(const PotentialRecipe& recipe, const Grid& grid) {
  switch (recipe.kind) {
    case PotentialRecipe::Kind::Zero:
      return PotentialField::zero(grid.size());
    case PotentialRecipe::Kind::Cosine: {
      // amplitude * mean_a cos(2 pi x_a): Z^d-periodic, so |V| does not grow with L
      std::vector<double> values(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point x = grid.node(i);
        double s = 0.0;
        for (int a = 0; a < grid.dim(); ++a) s += std::cos(2.0 * M_PI * x[a]);
        values[i] = recipe.amplitude * s / grid.dim();
      }
      return PotentialField(std::move(values));
    }
    case PotentialRecipe::Kind::Breather:
    case PotentialRecipe::Kind::Alloy: {
      const BreatherConfiguration config =
          sample_configuration(recipe.dist, grid.side(), grid.dim(), recipe.seed, recipe.shape);
      PotentialField field = recipe.kind == PotentialRecipe::Kind::Breather
                                 ? sample_field_on_grid(config, grid)
                                 : sample_alloy_on_grid(config, recipe.alloy_radius, grid);
      if (recipe.amplitude == 1.0) return field;
      std::vector<double> values(field.values().begin(), field.values().end());
      for (double& v : values) v *= recipe.amplitude;
      return PotentialField(std::move(values));
    }
  }
  throw std::logic_error("unhandled potential preset");
}

nlohmann::json to_json(const BreatherConfiguration& config) {
  return nlohmann::json{
      {"seed", config.seed},
      {"dist", {{"kind", "uniform"}, {"lo", config.dist.omega_minus}, {"hi", config.dist.omega_plus}}},
      {"L", config.side},
      {"d", config.dim},
      {"kind", std::string(to_string(config.shape))},
      {"radii", config.radii},
  };
}

BreatherConfiguration configuration_from_json(const nlohmann::json& doc) {
  if (doc.at("dist").at("kind").get<std::string>() != "uniform")
    throw std::invalid_argument("only uniform site distributions are supported");
  BreatherConfiguration config;
  config.seed = doc.at("seed").get<std::uint64_t>();
  config.dist = SiteDistribution::uniform(doc.at("dist").at("lo").get<double>(),
                                          doc.at("dist").at("hi").get<double>());
  config.side = doc.at("L").get<int>();
  config.dim = doc.at("d").get<int>();
  config.shape = parse_site_shape(doc.at("kind").get<std::string>());
  config.sites = lattice_sites(config.side, config.dim);
  config.radii = doc.at("radii").get<std::vector<double>>();
  if (config.radii.size() != config.sites.size())
    throw std::invalid_argument("configuration has " + std::to_string(config.radii.size()) +
                                " radii for " + std::to_string(config.sites.size()) + " sites");
  return config;
}

}  // namespace breather

#include "doctest.h"

#include "breather/random_potential.hpp"
#include "breather/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>

using namespace breather;

namespace {

// Brute force: sum of every site's indicator, no owning-cell shortcut.
double brute_breather(const BreatherConfiguration& c, const Point& x) {
  double v = 0.0;
  for (std::size_t k = 0; k < c.sites.size(); ++k) {
    double s = 0.0, sup = 0.0;
    for (int a = 0; a < c.dim; ++a) {
      const double t = x[a] - c.sites[k][a];
      s += t * t;
      sup = std::max(sup, std::abs(t));
    }
    const double dist = c.shape == SiteShape::Ball ? std::sqrt(s) : sup;
    if (dist < c.radii[k]) v += 1.0;
  }
  return v;
}

double ball_volume(int d, double r) {
  switch (d) {
    case 1: return 2.0 * r;
    case 2: return M_PI * r * r;
    default: return 4.0 / 3.0 * M_PI * r * r * r;
  }
}

}  // namespace

TEST_CASE("site distribution validation") {
  CHECK_NOTHROW(SiteDistribution::uniform(0.0, 0.25));
  CHECK_THROWS_AS(SiteDistribution::uniform(0.3, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(SiteDistribution::uniform(0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(SiteDistribution::uniform(-0.1, 0.2), std::invalid_argument);
  CHECK(SiteDistribution::uniform(0.1, 0.3).density_sup() == doctest::Approx(5.0));
}

TEST_CASE("lattice sites enumerate the box with axis 0 fastest") {
  const auto sites = lattice_sites(3, 2);
  REQUIRE(sites.size() == 9);
  CHECK(sites[0] == MultiIndex{-1, -1, 0});
  CHECK(sites[1] == MultiIndex{0, -1, 0});
  CHECK(sites[8] == MultiIndex{1, 1, 0});
  CHECK(lattice_sites(5, 3).size() == 125);
}

TEST_CASE("sampling is reproducible and in range") {
  const SiteDistribution dist = SiteDistribution::uniform(0.1, 0.3);
  const auto a = sample_configuration(dist, 7, 2, 42);
  const auto b = sample_configuration(dist, 7, 2, 42);
  const auto c = sample_configuration(dist, 7, 2, 43);
  CHECK(a.radii == b.radii);
  CHECK(a.radii != c.radii);
  for (double r : a.radii) {
    CHECK(r >= 0.1);
    CHECK(r < 0.3);
  }
}

TEST_CASE("a site's radius does not depend on the box it is sampled in") {
  const SiteDistribution dist = SiteDistribution::uniform(0.0, 0.4);
  const auto small = sample_configuration(dist, 3, 2, 9);
  const auto large = sample_configuration(dist, 9, 2, 9);
  for (std::size_t k = 0; k < small.sites.size(); ++k)
    CHECK(small.radii[k] == large.radii[large.site_index(small.sites[k])]);
}

TEST_CASE("empirical mean of Uniform[0, 1/2) radii") {
  // 10^4 independent sites
  const auto config = sample_configuration(SiteDistribution::uniform(0.0, 0.49999999), 99, 2, 2023);
  REQUIRE(config.radii.size() == 9801);
  const double mean = std::accumulate(config.radii.begin(), config.radii.end(), 0.0) / config.radii.size();
  CHECK(std::abs(mean - 0.25) <= 0.01);
  double var = 0.0;
  for (double r : config.radii) var += (r - mean) * (r - mean);
  var /= config.radii.size() - 1;
  CHECK(std::abs(var - 0.25 / 12.0) <= 0.002);
}

TEST_CASE("counter RNG uniforms lie in [0, 1)") {
  for (std::uint64_t k = 0; k < 10000; ++k) {
    const double u = rng::uniform(rng::derive_seed(17, k));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(rng::derive_seed(1, 0) != rng::derive_seed(1, 1));
  CHECK(rng::derive_seed(1, 0) != rng::derive_seed(2, 0));
}

TEST_CASE("evaluate_breather matches the brute-force site sum") {
  for (SiteShape shape : {SiteShape::Ball, SiteShape::Cube})
    for (int d = 1; d <= 3; ++d) {
      const auto config = sample_configuration(SiteDistribution::uniform(0.05, 0.45), 3, d, 11 + d, shape);
      const Grid g = build_grid(d, 3, d == 3 ? 10 : 40, Boundary::Neumann);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const Point x = g.node(i);
        const double v = evaluate_breather(config, x);
        CHECK(v == brute_breather(config, x));
        CHECK((v == 0.0 || v == 1.0));
      }
    }
}

TEST_CASE("breather potential is monotone in the radii") {
  const auto config = sample_configuration(SiteDistribution::uniform(0.1, 0.3), 5, 2, 3);
  const auto wider = shifted(config, 0.15);
  const Grid g = build_grid(2, 5, 20, Boundary::Dirichlet);
  const PotentialField v = sample_field_on_grid(config, g);
  const PotentialField w = sample_field_on_grid(wider, g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(w[i] >= v[i]);
  CHECK_THROWS_AS(shifted(config, 0.3), std::invalid_argument);
}

TEST_CASE("increment support equals the set where the potential changes") {
  const SiteDistribution dist = SiteDistribution::uniform(0.1, 0.3);
  for (SiteShape shape : {SiteShape::Ball, SiteShape::Cube}) {
    const auto config = sample_configuration(dist, 3, 2, 77, shape);
    const double delta = 0.125;
    const Grid g = build_grid(2, 3, 40, Boundary::Dirichlet);
    const NodeMask mask = increment_support(config, delta, g);
    const PotentialField v = sample_field_on_grid(config, g);
    const PotentialField w = sample_field_on_grid(shifted(config, delta), g);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(static_cast<bool>(mask[i]) == (w[i] - v[i] > 0.5));
      hits += mask[i];
    }
    CHECK(hits > 0);
    CHECK(std::ranges::all_of(increment_support(config, 0.0, g), [](auto b) { return b == 0; }));
  }
}

TEST_CASE("increment support guards") {
  const auto config = sample_configuration(SiteDistribution::uniform(0.1, 0.3), 3, 1, 1);
  CHECK_THROWS_AS(increment_support(config, 0.25, build_grid(1, 3, 64, Boundary::Dirichlet)), std::invalid_argument);
  CHECK_THROWS_AS(increment_support(config, 0.1, build_grid(1, 3, 8, Boundary::Dirichlet)), std::invalid_argument);
  CHECK_NOTHROW(increment_support(config, 0.1, build_grid(1, 3, 40, Boundary::Dirichlet)));
}

TEST_CASE("annulus balls sit inside the annuli and inside the cells") {
  const auto config = sample_configuration(SiteDistribution::uniform(0.1, 0.3), 5, 2, 8);
  const double delta = 0.2;
  const BallSet balls = annulus_ball_set(config, delta);
  CHECK(balls.contained_in_cells());
  CHECK(balls.radius == doctest::Approx(0.1));
  const Grid g = build_grid(2, 5, 40, Boundary::Dirichlet);
  const NodeMask in_balls = indicator(balls, g);
  const NodeMask annuli = increment_support(config, delta, g);
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (in_balls[i]) CHECK(annuli[i] == 1);
    count += in_balls[i];
  }
  CHECK(count > 0);
  CHECK_THROWS_AS(annulus_ball_set(config, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(annulus_ball_set(config, 0.21), std::invalid_argument);
}

TEST_CASE("standard ball sets are contained for every placement") {
  for (double delta : {0.05, 0.2, 0.45})
    for (Placement p : {Placement::centered(), Placement::corner(), Placement::seeded(5)}) {
      const BallSet balls = standard_ball_set(5, 2, delta, p);
      CHECK(balls.contained_in_cells());
      CHECK(balls.centers.size() == 25);
    }
  CHECK_THROWS_AS(standard_ball_set(3, 1, 0.5, Placement::centered()), std::invalid_argument);
  CHECK(standard_ball_set(3, 2, 0.1, Placement::seeded(1)).centers !=
        standard_ball_set(3, 2, 0.1, Placement::seeded(2)).centers);
}

TEST_CASE("indicator volume converges to |S|") {
  for (int d = 1; d <= 2; ++d)
    for (double delta : {0.1, 0.25}) {
      const int side = 3;
      const int m = static_cast<int>(std::ceil(8.0 / delta));
      const Grid g = build_grid(d, side, m, Boundary::Neumann);
      const BallSet balls = standard_ball_set(side, d, delta, Placement::seeded(3));
      const NodeMask mask = indicator(balls, g);
      const double measured = g.cell_volume() * std::count(mask.begin(), mask.end(), 1);
      const double exact = std::pow(side, d) * ball_volume(d, delta);
      CHECK(std::abs(measured - exact) <= 0.1 * exact);
    }
}

TEST_CASE("indicator enforces the resolution guard") {
  const BallSet balls = standard_ball_set(1, 1, 0.1, Placement::centered());
  CHECK_THROWS_AS(indicator(balls, build_grid(1, 1, 8, Boundary::Dirichlet)), std::invalid_argument);
  CHECK_THROWS_AS(indicator(standard_ball_set(1, 1, 0.4, Placement::centered()), build_grid(1, 1, 6, Boundary::Dirichlet)),
                  std::invalid_argument);
  CHECK_NOTHROW(indicator(balls, build_grid(1, 1, 40, Boundary::Dirichlet)));
}

TEST_CASE("alloy potential") {
  const auto config = sample_configuration(SiteDistribution::uniform(0.1, 0.3), 3, 1, 4);
  const Grid g = build_grid(1, 3, 20, Boundary::Dirichlet);
  const PotentialField v = sample_alloy_on_grid(config, 0.3, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    const long j = std::lround(x[0]);
    const double expected = std::abs(x[0] - j) < 0.3 ? config.radii[config.site_index({static_cast<int>(j), 0, 0})] : 0.0;
    CHECK(v[i] == expected);
  }
  CHECK_THROWS_AS(evaluate_alloy(config, {0, 0, 0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(sample_alloy_on_grid(config, 0.3, build_grid(1, 3, 4, Boundary::Dirichlet)), std::invalid_argument);
}

TEST_CASE("breather sampling enforces h <= min(2 omega)/4") {
  const auto config = sample_configuration(SiteDistribution::uniform(0.1, 0.3), 3, 1, 4);
  CHECK_THROWS_AS(sample_field_on_grid(config, build_grid(1, 3, 8, Boundary::Dirichlet)), std::invalid_argument);
  CHECK_NOTHROW(sample_field_on_grid(config, build_grid(1, 3, 20, Boundary::Dirichlet)));
}

TEST_CASE("configuration JSON round trip") {
  const auto config = sample_configuration(SiteDistribution::uniform(0.05, 0.35), 5, 2, 123, SiteShape::Cube);
  const nlohmann::json doc = to_json(config);
  CHECK(doc.at("seed") == 123);
  CHECK(doc.at("L") == 5);
  CHECK(doc.at("d") == 2);
  CHECK(doc.at("dist").at("lo") == 0.05);
  const auto back = configuration_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.radii == config.radii);
  CHECK(back.sites == config.sites);
  CHECK(back.dist == config.dist);
  CHECK(back.shape == config.shape);
  CHECK(back.seed == config.seed);

  nlohmann::json broken = doc;
  broken["radii"].erase(0);
  CHECK_THROWS(configuration_from_json(broken));
}

TEST_CASE("potential recipes") {
  const Grid g = build_grid(1, 3, 20, Boundary::Periodic);
  PotentialRecipe cosine;
  cosine.kind = PotentialRecipe::Kind::Cosine;
  cosine.amplitude = 2.0;
  const PotentialField v = make_potential(cosine, g);
  CHECK(v.sup_norm() <= 2.0 + 1e-12);
  CHECK(v[0] == doctest::Approx(2.0 * std::cos(2 * M_PI * g.node(0)[0])));
  CHECK(make_potential(PotentialRecipe::zero(), g).sup_norm() == 0.0);

  PotentialRecipe breather;
  breather.kind = PotentialRecipe::Kind::Breather;
  breather.amplitude = 3.0;
  breather.seed = 8;
  const PotentialField b = make_potential(breather, g);
  CHECK(b.sup_norm() == doctest::Approx(3.0));
  for (double x : b.values()) CHECK((x == 0.0 || x == 3.0));
  CHECK(parse_potential_kind(to_string(PotentialRecipe::Kind::Alloy)) == PotentialRecipe::Kind::Alloy);
  CHECK_THROWS_AS(parse_potential_kind("gaussian"), std::invalid_argument);
}

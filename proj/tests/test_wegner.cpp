#include "doctest.h"
#include "oracles.hpp"

#include "breather/wegner.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

using namespace breather;

namespace {

WegnerSpec small_spec() {
  WegnerSpec spec;
  spec.side = 5;
  spec.density = 8;
  spec.dist = SiteDistribution::uniform(0.25, 0.45);
  spec.energy = 20.0;
  spec.epsilon = 5.0;
  spec.energy_cap = 40.0;
  spec.n_samples = 30;
  spec.seed = 17;
  return spec;
}

}  // namespace

TEST_CASE("epsilon_max formula") {
  CHECK(std::abs(epsilon_max(0.25, 0.0, 1.0) - 4.8828125e-4) <= 1e-15 * 4.8828125e-4);
  double previous = epsilon_max(0.0, 3.0, 1.0);
  for (double w : {0.1, 0.2, 0.3, 0.4, 0.49, 0.4999}) {
    const double e = epsilon_max(w, 3.0, 1.0);
    CHECK(e < previous);
    CHECK(e > 0.0);
    previous = e;
  }
  CHECK_THROWS_AS(epsilon_max(0.25, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(epsilon_max(0.5, 0.0, 1.0), std::invalid_argument);
  CHECK(lifting_bound(0.25, 0.0, 1.0) == doctest::Approx(std::pow(0.125, 3.0)));
}

TEST_CASE("spec validation") {
  WegnerSpec spec = small_spec();
  CHECK_NOTHROW(spec.validate());
  spec.epsilon = 25.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.side = 4;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.dist = SiteDistribution::uniform(0.1, 0.3);  // h = 1/8 > 2 * 0.1 / 4
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = small_spec();
  spec.check_epsilon_max = true;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.epsilon = 0.5 * epsilon_max(spec.dist.omega_plus, spec.energy_cap, spec.k0_assumed);
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("samples replay deterministically and use distinct seeds") {
  const WegnerSpec spec = small_spec();
  for (int i = 0; i < 5; ++i) CHECK(wegner_trace_sample(spec, i) == wegner_trace_sample(spec, i));
  CHECK(sample_seed(spec, 0) != sample_seed(spec, 1));
  const auto a = sample_operator(spec, 3), b = sample_operator(spec, 3);
  CHECK(Eigen::MatrixXd(a.matrix()) == Eigen::MatrixXd(b.matrix()));
}

TEST_CASE("sample counts equal the dense-oracle count") {
  WegnerSpec spec = small_spec();
  for (PotentialModel model : {PotentialModel::Breather, PotentialModel::Alloy, PotentialModel::Free}) {
    spec.model = model;
    for (int i = 0; i < 4; ++i) {
      const Eigen::VectorXd values = dense_oracle(sample_operator(spec, i)).values;
      const auto expected = static_cast<std::size_t>(
          ((values.array() >= spec.energy - spec.epsilon) && (values.array() <= spec.energy + spec.epsilon)).count());
      CHECK(wegner_trace_sample(spec, i) == expected);
    }
  }
}

TEST_CASE("window below the free ground state has no spectrum") {
  WegnerSpec spec = small_spec();
  const double lambda1 = oracle::dirichlet_1d(spec.side, spec.density).front();
  spec.energy = 0.5 * lambda1;
  spec.epsilon = 0.25 * lambda1;
  const WegnerResult r = wegner_expectation(spec, 2);
  CHECK(r.mean == 0.0);
  CHECK(r.ci_low == 0.0);
  CHECK(r.ci_high == 0.0);
  CHECK(r.excluded == 0);
  REQUIRE(r.counts.size() == 30);
  for (const auto& c : r.counts) CHECK(c == std::optional<std::size_t>(0));
}

TEST_CASE("nested windows give nondecreasing per-sample counts") {
  const WegnerSpec spec = small_spec();
  const std::vector<double> eps{0.5, 1.0, 2.0, 4.0, 8.0};
  const auto results = wegner_epsilon_sweep(spec, eps, 3);
  REQUIRE(results.size() == eps.size());
  for (std::size_t k = 0; k + 1 < results.size(); ++k) {
    CHECK(results[k].mean <= results[k + 1].mean);
    for (std::size_t i = 0; i < results[k].counts.size(); ++i) CHECK(*results[k].counts[i] <= *results[k + 1].counts[i]);
  }
  // mean is the exact sample average
  double sum = 0.0;
  for (const auto& c : results[2].counts) sum += static_cast<double>(*c);
  CHECK(results[2].mean == sum / 30.0);
  const auto c = fit_wegner_constant(results);
  REQUIRE(c);
  for (const WegnerResult& r : results)
    if (r.c_fit) CHECK(r.mean <= *c * r.rhs_shape * (1.0 + 1e-12));
  // |ln 1| = 0: no overlay at eps = 1
  CHECK_FALSE(results[1].c_fit);
}

TEST_CASE("sweep results do not depend on the thread count") {
  const WegnerSpec spec = small_spec();
  const std::vector<double> eps{1.0, 3.0};
  const auto one = wegner_epsilon_sweep(spec, eps, 1);
  const auto four = wegner_epsilon_sweep(spec, eps, 4);
  for (std::size_t k = 0; k < eps.size(); ++k) {
    CHECK(one[k].counts == four[k].counts);
    CHECK(to_json(spec, one[k]).dump() == to_json(spec, four[k]).dump());
  }
}

TEST_CASE("sweep preconditions") {
  WegnerSpec spec = small_spec();
  spec.n_samples = 29;
  CHECK_THROWS_AS(wegner_expectation(spec), std::invalid_argument);
  spec = small_spec();
  const std::vector<double> eps{1.0, 30.0};
  CHECK_THROWS_AS(wegner_epsilon_sweep(spec, eps), std::invalid_argument);
}

TEST_CASE("per-sample counts are additive across a split point") {
  const WegnerSpec spec = small_spec();
  const SparseOperator op = sample_operator(spec, 2);
  const double a = 0.0, b = 21.3, c = 60.0;
  const double eta = interval_nudge(a, c);
  const std::size_t left = count_below(op.matrix(), b + eta) - count_below(op.matrix(), a - eta);
  const std::size_t right = count_below(op.matrix(), c + eta) - count_below(op.matrix(), b + eta);
  CHECK(left + right == count_in_interval(op, a, c));
}

TEST_CASE("lifting gaps") {
  const SiteDistribution dist = SiteDistribution::uniform(0.1, 0.3);
  const Grid grid = build_grid(1, 9, 40, Boundary::Dirichlet);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto config = sample_configuration(dist, 9, 1, seed);
    const auto zero = lifting_gap(config, 0.0, 25.0, grid);
    REQUIRE_FALSE(zero.empty());
    for (const LiftingEntry& e : zero) CHECK(std::abs(e.gap()) <= 1e-12);
    const auto lifted = lifting_gap(config, 0.1, 25.0, grid);
    CHECK(lifted.size() == zero.size());
    for (std::size_t k = 0; k < lifted.size(); ++k) {
      CHECK(lifted[k].n == static_cast<int>(k + 1));
      CHECK(lifted[k].base <= 25.0);
      CHECK(lifted[k].gap() >= 0.0);
      CHECK(lifted[k].gap() <= 1.0 + 1e-9);
    }
  }
  const auto config = sample_configuration(dist, 9, 1, 1);
  CHECK_THROWS_AS(lifting_gap(config, 0.25, 25.0, grid), std::invalid_argument);
  CHECK_THROWS_AS(lifting_gap(config, 0.05, 25.0, grid), std::invalid_argument);  // h > delta/4
}

TEST_CASE("IDS estimate") {
  WegnerSpec spec = small_spec();
  std::vector<double> energies;
  for (int k = 0; k < 20; ++k) energies.push_back(-2.0 + 2.0 * k);
  const IdsCurve curve = ids_estimate(spec, energies, 2);
  REQUIRE(curve.n_hat.size() == energies.size());
  CHECK(curve.n_hat[0] == 0.0);
  CHECK(curve.n_hat[1] == 0.0);
  const double cap = static_cast<double>(build_grid(1, spec.side, spec.density, spec.bc).size()) / spec.side;
  for (std::size_t k = 0; k + 1 < energies.size(); ++k) {
    CHECK(curve.n_hat[k] <= curve.n_hat[k + 1]);
    CHECK(curve.modulus[k] == curve.n_hat[k + 1] - curve.n_hat[k]);
  }
  CHECK(curve.n_hat.back() <= cap);
  CHECK(curve.samples == 30);

  std::vector<double> descending{3.0, 1.0};
  CHECK_THROWS_AS(ids_estimate(spec, descending), std::invalid_argument);
  std::vector<double> high{1.0, 50.0};
  CHECK_THROWS_AS(ids_estimate(spec, high), std::invalid_argument);
}

TEST_CASE("free IDS tracks the Weyl count") {
  WegnerSpec spec;
  spec.side = 15;
  spec.density = 16;
  spec.model = PotentialModel::Free;
  spec.n_samples = 30;
  spec.energy_cap = 60.0;
  const std::vector<double> energies{20.0, 30.0, 40.0, 50.0};
  const IdsCurve curve = ids_estimate(spec, energies);
  for (std::size_t k = 0; k < energies.size(); ++k) {
    const double weyl = oracle::weyl_count_1d(spec.side, energies[k]) / spec.side;
    CHECK(std::abs(curve.n_hat[k] - weyl) <= 0.15 * weyl);
    CHECK(curve.stderr_n[k] == 0.0);
  }
}

TEST_CASE("result JSON layout") {
  const WegnerSpec spec = small_spec();
  const WegnerResult r = wegner_expectation(spec);
  const nlohmann::json doc = to_json(spec, r);
  for (const char* key : {"spec", "epsilon", "counts", "mean", "stderr", "ci95", "excluded", "overlay"})
    CHECK(doc.contains(key));
  CHECK(doc["overlay"].contains("K0_assumed"));
  CHECK(doc["overlay"].contains("C_fit"));
  CHECK(doc["counts"].size() == 30);
  CHECK(doc["spec"]["L"] == 5);
}

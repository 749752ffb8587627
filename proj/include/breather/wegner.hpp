#pragma once

#include "breather/eigensolver.hpp"
#include "breather/grid.hpp"
#include "breather/random_potential.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace breather {

enum class PotentialModel { Breather, Alloy, Free };
std::string_view to_string(PotentialModel model);
PotentialModel parse_potential_model(std::string_view name);

// Monte Carlo setup for eigenvalue counts of H_{omega,L} on [E - eps, E + eps].
struct WegnerSpec {
  int dim = 1;
  int side = 11;
  int density = 20;
  Boundary bc = Boundary::Dirichlet;
  SiteDistribution dist;
  SiteShape shape = SiteShape::Ball;
  PotentialModel model = PotentialModel::Breather;
  double alloy_radius = 0.3;
  double energy = 5.0;
  double epsilon = 0.5;
  double energy_cap = 25.0;
  int n_samples = 100;
  std::uint64_t seed = 1;
  double k0_assumed = 1.0;
  bool check_epsilon_max = false;

  /// Window and model preconditions (not the sample count).
  void validate() const;
};

/// Seed of the i-th configuration.
std::uint64_t sample_seed(const WegnerSpec& spec, int index);

/// Random operator of the i-th sample.
SparseOperator sample_operator(const WegnerSpec& spec, int index);

/// Number of eigenvalues in [E - eps, E + eps] for sample i.
std::size_t wegner_trace_sample(const WegnerSpec& spec, int index);

/// Per-sample counts for nested windows [E - eps_k, E + eps_k] (one assembly per sample).
std::vector<std::size_t> wegner_trace_sample(const WegnerSpec& spec, int index, std::span<const double> epsilons);

struct WegnerResult {
  double epsilon = 0.0;
  std::vector<std::optional<std::size_t>> counts;  // empty slot: excluded sample
  std::vector<std::string> exclusions;
  std::size_t excluded = 0;
  double mean = 0.0;
  double stderr_mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double rhs_shape = 0.0;           // |nu| eps^{1/[K0(2+|E0+1|^{1/2})]} |ln eps|^d L^d
  std::optional<double> c_fit;      // mean / rhs_shape
};

WegnerResult wegner_expectation(const WegnerSpec& spec, unsigned threads = 1);

/// Nested-window sweep; every sample is counted for all epsilons from one operator.
std::vector<WegnerResult> wegner_epsilon_sweep(const WegnerSpec& spec, std::span<const double> epsilons,
                                               unsigned threads = 1);

double wegner_rhs_shape(const WegnerSpec& spec, double epsilon);

/// Smallest C such that the bound shape covers every result of a sweep.
std::optional<double> fit_wegner_constant(std::span<const WegnerResult> results);

/// (1/4) ((1/2 - omega_plus) / 2)^{K0 (2 + |E0 + 1|^{1/2})}
double epsilon_max(double omega_plus, double energy_cap, double k0_assumed);

/// (delta/2)^{K0 (2 + |E0 + 1|^{1/2})}, reported next to measured gaps.
double lifting_bound(double delta, double energy_cap, double k0_assumed);

struct LiftingEntry {
  int n = 0;  // 1-based eigenvalue index
  double base = 0.0;
  double lifted = 0.0;
  double gap() const { return lifted - base; }
};

/// Eigenvalues E_n(omega) <= E0 paired with E_n(omega + delta) on the same grid (Dirichlet).
std::vector<LiftingEntry> lifting_gap(const BreatherConfiguration& config, double delta, double energy_cap,
                                      const Grid& grid, const SolverOptions& options = {});

struct IdsCurve {
  std::vector<double> energies;
  std::vector<double> n_hat;
  std::vector<double> stderr_n;
  std::vector<double> modulus;  // n_hat[k+1] - n_hat[k]
  std::size_t excluded = 0;
  std::size_t samples = 0;
};

constexpr double kSpectrumFloor = -1.0;

/// N(E) = E[#{E_n <= E}] / L^d over the samples of `spec` (its E and eps are ignored).
IdsCurve ids_estimate(const WegnerSpec& spec, std::span<const double> energies, unsigned threads = 1);

nlohmann::json to_json(const WegnerSpec& spec);
nlohmann::json to_json(const WegnerSpec& spec, const WegnerResult& result);

}  // namespace breather

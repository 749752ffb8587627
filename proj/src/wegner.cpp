#include "breather/wegner.hpp"

#include "breather/parallel.hpp"
#include "breather/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace breather {

namespace {

void validate_model(const WegnerSpec& spec) {
  const Grid grid(spec.dim, spec.side, spec.density, spec.bc);
  spec.dist.validate();
  const double h = grid.spacing();
  if (spec.model == PotentialModel::Breather && spec.dist.omega_minus > 0.0 &&
      h > 2.0 * spec.dist.omega_minus / 4.0 * (1.0 + 1e-12))
    throw std::invalid_argument("mesh spacing h = " + std::to_string(h) +
                                " does not resolve the smallest breather radius (need h <= omega_minus/2)");
  if (spec.model == PotentialModel::Alloy) {
    if (!(spec.alloy_radius > 0.0 && spec.alloy_radius < 0.5))
      throw std::invalid_argument("alloy radius must lie in (0, 1/2)");
    if (h > spec.alloy_radius / 2.0 * (1.0 + 1e-12))
      throw std::invalid_argument("mesh spacing does not resolve the alloy radius (need h <= r/2)");
  }
  if (!(spec.k0_assumed > 0.0)) throw std::invalid_argument("K0_assumed must be positive");
}

struct Summary {
  double mean = 0.0, stderr_mean = 0.0;
};

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_mean = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return s;
}

void check_exclusions(std::size_t excluded, std::size_t total, const std::string& first_reason) {
  if (10 * excluded > total)
    throw SolverError(std::to_string(excluded) + " of " + std::to_string(total) +
                      " samples failed (more than 10%); first failure: " + first_reason);
}

}  // namespace

std::string_view to_string(PotentialModel model) {
  switch (model) {
    case PotentialModel::Breather: return "breather";
    case PotentialModel::Alloy: return "alloy";
    case PotentialModel::Free: return "free";
  }
  return "unknown";
}

PotentialModel parse_potential_model(std::string_view name) {
  if (name == "breather") return PotentialModel::Breather;
  if (name == "alloy") return PotentialModel::Alloy;
  if (name == "free" || name == "zero") return PotentialModel::Free;
  throw std::invalid_argument("unknown random potential model '" + std::string(name) + "'");
}

void WegnerSpec::validate() const {
  validate_model(*this);
  if (!(energy >= 0.0)) throw std::invalid_argument("center energy E must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("window half-width epsilon must be positive");
  if (energy + epsilon > energy_cap)
    throw std::invalid_argument("window [E - eps, E + eps] must lie below E0 = " + std::to_string(energy_cap));
  if (check_epsilon_max && epsilon > epsilon_max(dist.omega_plus, energy_cap, k0_assumed))
    throw std::invalid_argument("epsilon exceeds epsilon_max for the assumed K0");
}

std::uint64_t sample_seed(const WegnerSpec& spec, int index) {
  return rng::derive_seed(spec.seed, static_cast<std::uint64_t>(index));
}

SparseOperator sample_operator(const WegnerSpec& spec, int index) {
  const Grid grid(spec.dim, spec.side, spec.density, spec.bc);
  if (spec.model == PotentialModel::Free) return assemble_hamiltonian(grid, PotentialField::zero(grid.size()));
  const BreatherConfiguration config =
      sample_configuration(spec.dist, spec.side, spec.dim, sample_seed(spec, index), spec.shape);
  const PotentialField field = spec.model == PotentialModel::Breather
                                   ? sample_field_on_grid(config, grid)
                                   : sample_alloy_on_grid(config, spec.alloy_radius, grid);
  return assemble_hamiltonian(grid, field);
}

std::size_t wegner_trace_sample(const WegnerSpec& spec, int index) {
  return count_in_interval(sample_operator(spec, index), spec.energy - spec.epsilon, spec.energy + spec.epsilon);
}

std::vector<std::size_t> wegner_trace_sample(const WegnerSpec& spec, int index, std::span<const double> epsilons) {
  const SparseOperator op = sample_operator(spec, index);
  std::vector<std::size_t> counts;
  counts.reserve(epsilons.size());
  for (double eps : epsilons) counts.push_back(count_in_interval(op, spec.energy - eps, spec.energy + eps));
  return counts;
}

double wegner_rhs_shape(const WegnerSpec& spec, double epsilon) {
  const double exponent = 1.0 / (spec.k0_assumed * (2.0 + std::sqrt(std::abs(spec.energy_cap + 1.0))));
  return spec.dist.density_sup() * std::pow(epsilon, exponent) * std::pow(std::abs(std::log(epsilon)), spec.dim) *
         std::pow(static_cast<double>(spec.side), spec.dim);
}

std::vector<WegnerResult> wegner_epsilon_sweep(const WegnerSpec& spec, std::span<const double> epsilons,
                                               unsigned threads) {
  if (epsilons.empty()) throw std::invalid_argument("epsilon list is empty");
  for (double eps : epsilons) {
    WegnerSpec probe = spec;
    probe.epsilon = eps;
    probe.validate();
  }
  if (spec.n_samples < 30) throw std::invalid_argument("n_samples must be >= 30");

  const std::size_t n = static_cast<std::size_t>(spec.n_samples);
  std::vector<std::vector<std::size_t>> counts(n);
  std::vector<std::string> errors(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      counts[i] = wegner_trace_sample(spec, static_cast<int>(i), epsilons);
    } catch (const SolverError& e) {
      errors[i] = e.what();
    }
  });

  std::vector<std::string> exclusions;
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) exclusions.push_back("sample " + std::to_string(i) + ": " + errors[i]);
  check_exclusions(exclusions.size(), n, exclusions.empty() ? std::string() : exclusions.front());

  std::vector<WegnerResult> results;
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    WegnerResult r;
    r.epsilon = epsilons[k];
    r.exclusions = exclusions;
    r.excluded = exclusions.size();
    std::vector<double> included;
    for (std::size_t i = 0; i < n; ++i) {
      if (errors[i].empty()) {
        r.counts.emplace_back(counts[i][k]);
        included.push_back(static_cast<double>(counts[i][k]));
      } else {
        r.counts.emplace_back(std::nullopt);
      }
    }
    const Summary s = summarize(included);
    r.mean = s.mean;
    r.stderr_mean = s.stderr_mean;
    r.ci_low = s.mean - 1.96 * s.stderr_mean;
    r.ci_high = s.mean + 1.96 * s.stderr_mean;
    r.rhs_shape = wegner_rhs_shape(spec, epsilons[k]);
    if (r.rhs_shape > 0.0 && std::isfinite(r.rhs_shape)) r.c_fit = r.mean / r.rhs_shape;
    results.push_back(std::move(r));
  }
  return results;
}

WegnerResult wegner_expectation(const WegnerSpec& spec, unsigned threads) {
  const double eps[] = {spec.epsilon};
  return wegner_epsilon_sweep(spec, eps, threads).front();
}

std::optional<double> fit_wegner_constant(std::span<const WegnerResult> results) {
  std::optional<double> c;
  for (const WegnerResult& r : results)
    if (r.c_fit) c = std::max(c.value_or(0.0), *r.c_fit);
  return c;
}

double epsilon_max(double omega_plus, double energy_cap, double k0_assumed) {
  if (!(omega_plus < 0.5)) throw std::invalid_argument("epsilon_max requires omega_plus < 1/2");
  if (!(k0_assumed > 0.0)) throw std::invalid_argument("epsilon_max requires K0_assumed > 0");
  const double exponent = k0_assumed * (2.0 + std::sqrt(std::abs(energy_cap + 1.0)));
  return 0.25 * std::pow((0.5 - omega_plus) / 2.0, exponent);
}

double lifting_bound(double delta, double energy_cap, double k0_assumed) {
  return std::pow(delta / 2.0, k0_assumed * (2.0 + std::sqrt(std::abs(energy_cap + 1.0))));
}

std::vector<LiftingEntry> lifting_gap(const BreatherConfiguration& config, double delta, double energy_cap,
                                      const Grid& grid, const SolverOptions& options) {
  const double admissible = 0.5 - config.dist.omega_plus;
  if (delta < 0.0 || delta > admissible + 1e-15)
    throw std::invalid_argument("lifting_gap: delta = " + std::to_string(delta) +
                                " outside [0, 1/2 - omega_plus] = [0, " + std::to_string(admissible) + "]");
  for (double r : config.radii)
    if (r < config.dist.omega_minus || r > config.dist.omega_plus)
      throw std::invalid_argument("lifting_gap: configuration radius outside [omega_minus, omega_plus]");
  if (delta > 0.0 && grid.spacing() > delta / 4.0 * (1.0 + 1e-12))
    throw std::invalid_argument("lifting_gap: mesh spacing must satisfy h <= delta/4");

  const SparseOperator base = assemble_hamiltonian(grid, sample_field_on_grid(config, grid));
  const SparseOperator lifted = assemble_hamiltonian(grid, sample_field_on_grid(shifted(config, delta), grid));
  const std::vector<double> below = eigenvalues_below(base, energy_cap, options);
  // V_{omega+delta} - V_omega <= 1, so min-max keeps E_n(omega+delta) <= E_n(omega) + 1
  const std::vector<double> above = eigenvalues_below(lifted, energy_cap + 1.0, options);
  const std::size_t common = std::min(below.size(), above.size());
  std::vector<LiftingEntry> out;
  out.reserve(common);
  for (std::size_t k = 0; k < common; ++k) out.push_back({static_cast<int>(k + 1), below[k], above[k]});
  return out;
}

IdsCurve ids_estimate(const WegnerSpec& spec, std::span<const double> energies, unsigned threads) {
  validate_model(spec);
  if (spec.n_samples < 30) throw std::invalid_argument("n_samples must be >= 30");
  if (energies.empty()) throw std::invalid_argument("energy grid is empty");
  for (std::size_t k = 0; k < energies.size(); ++k) {
    if (k > 0 && !(energies[k] > energies[k - 1])) throw std::invalid_argument("energy grid must be ascending");
    if (energies[k] > spec.energy_cap) throw std::invalid_argument("energy grid must lie below E0");
  }

  const std::size_t n = static_cast<std::size_t>(spec.n_samples);
  std::vector<std::vector<double>> counts(n);
  std::vector<std::string> errors(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      const SparseOperator op = sample_operator(spec, static_cast<int>(i));
      std::vector<double> row;
      row.reserve(energies.size());
      for (double e : energies)
        row.push_back(e <= kSpectrumFloor ? 0.0 : static_cast<double>(count_in_interval(op, kSpectrumFloor, e)));
      counts[i] = std::move(row);
    } catch (const SolverError& e) {
      errors[i] = e.what();
    }
  });
  std::size_t excluded = 0;
  std::string first;
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) {
      if (excluded++ == 0) first = errors[i];
    }
  check_exclusions(excluded, n, first);

  const double volume = std::pow(static_cast<double>(spec.side), spec.dim);
  IdsCurve curve;
  curve.energies.assign(energies.begin(), energies.end());
  curve.excluded = excluded;
  curve.samples = n - excluded;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    std::vector<double> column;
    for (std::size_t i = 0; i < n; ++i)
      if (errors[i].empty()) column.push_back(counts[i][k]);
    const Summary s = summarize(column);
    curve.n_hat.push_back(s.mean / volume);
    curve.stderr_n.push_back(s.stderr_mean / volume);
  }
  for (std::size_t k = 0; k + 1 < curve.n_hat.size(); ++k) curve.modulus.push_back(curve.n_hat[k + 1] - curve.n_hat[k]);
  return curve;
}

nlohmann::json to_json(const WegnerSpec& spec) {
  return nlohmann::json{
      {"d", spec.dim},
      {"L", spec.side},
      {"m", spec.density},
      {"bc", std::string(to_string(spec.bc))},
      {"dist", {{"kind", "uniform"}, {"lo", spec.dist.omega_minus}, {"hi", spec.dist.omega_plus}}},
      {"single_site", std::string(to_string(spec.shape))},
      {"model", std::string(to_string(spec.model))},
      {"alloy_radius", spec.alloy_radius},
      {"E", spec.energy},
      {"epsilon", spec.epsilon},
      {"E0", spec.energy_cap},
      {"n_samples", spec.n_samples},
      {"seed", spec.seed},
      {"K0_assumed", spec.k0_assumed},
  };
}

nlohmann::json to_json(const WegnerSpec& spec, const WegnerResult& result) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& c : result.counts) counts.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
  nlohmann::json doc{
      {"spec", to_json(spec)},
      {"epsilon", result.epsilon},
      {"counts", counts},
      {"mean", result.mean},
      {"stderr", result.stderr_mean},
      {"ci95", {result.ci_low, result.ci_high}},
      {"excluded", result.excluded},
      {"overlay",
       {{"K0_assumed", spec.k0_assumed},
        {"rhs_shape", result.rhs_shape},
        {"C_fit", result.c_fit ? nlohmann::json(*result.c_fit) : nlohmann::json(nullptr)}}},
  };
  doc["spec"]["epsilon"] = result.epsilon;
  return doc;
}

}  // namespace breather

#pragma once

#include "breather/grid.hpp"
#include "breather/random_potential.hpp"
#include "breather/svg_plot.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace breather {

enum class ExperimentKind { Spectrum, UcScale, UcDelta, Wegner, Lifting, Ids };
std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

// Invalid configuration; the message starts with the offending key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// One experiment. Field names follow the config keys listed in README.md.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Spectrum;

  // [model]
  int dim = 1;
  std::vector<int> sides;                 // L or L_list
  int density = 8;                        // m
  Boundary bc = Boundary::Dirichlet;
  std::string potential;                  // empty: default of the kind
  double amplitude = 1.0;
  SiteDistribution dist{0.25, 0.45};
  SiteShape shape = SiteShape::Ball;
  double alloy_radius = 0.3;
  std::vector<double> deltas;             // delta or delta_list
  std::optional<double> energy;           // E
  double energy_cap = 25.0;               // E0
  std::vector<double> epsilons;           // epsilon or epsilon_list
  std::vector<PlacementKind> placements{PlacementKind::Centered};
  double e_min = 0.0;                     // IDS grid
  std::optional<double> e_max;            // defaults to E0
  int n_energies = 50;

  // [run]
  std::uint64_t seed = 1;
  int n_samples = 100;
  unsigned threads = 1;
  std::string out_dir = "results";
  double k0_assumed = 1.0;
  double scale_ratio = 0.5;
  double poly_residual = 0.5;
  double tol = 1e-9;
  bool refine_mesh = true;

  /// Potential name with the per-kind default applied.
  std::string potential_name() const;
  /// IDS energy grid.
  std::vector<double> ids_energies() const;

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

/// Parses an INI document with sections [model] and [run] and an optional
/// top-level `kind`. `kind` overrides (and must agree with) the document.
ExperimentSpec parse_config_text(std::string_view text, std::optional<ExperimentKind> kind = std::nullopt);
ExperimentSpec parse_config(const std::filesystem::path& path, std::optional<ExperimentKind> kind = std::nullopt);

/// Canonical INI text; parse_config_text(to_config_text(s)) == s.
std::string to_config_text(const ExperimentSpec& spec, bool with_run_io = true);

/// 16 hex digits over the canonical text without `threads` and `out_dir`.
std::string spec_hash(const ExperimentSpec& spec);

/// Checks every precondition of the dispatched module operation. Throws ConfigError.
void validate_spec(const ExperimentSpec& spec);

struct PropertyCheck {
  std::string name;
  bool passed = true;
  bool hard = true;  // soft checks are reported but do not change the exit code
  std::string detail;
};

struct ResultSet {
  ExperimentSpec spec;
  std::string hash;
  std::filesystem::path directory;
  std::string version;
  std::string started;
  std::string finished;
  std::vector<std::string> files;  // written files, relative to `directory`
  std::vector<PropertyCheck> checks;
  std::vector<std::pair<std::string, PlotSpec>> plots;
  std::vector<std::string> notes;
  std::string failure;             // computation error, empty on success

  /// 0 ok, 2 computation failure, 3 failed hard property check.
  int exit_code() const;
};

/// Validates, computes and writes result files under out_dir/<hash>/.
/// Throws ConfigError before touching the file system if the spec is invalid.
ResultSet run_experiment(const ExperimentSpec& spec);

/// Writes one SVG per plot, summary.txt and manifest.json.
void emit_report(ResultSet& results);

}  // namespace breather

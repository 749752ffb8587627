#include "breather/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

using namespace breather;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
};

int run(ExperimentKind kind, const Overrides& o) {
  ExperimentSpec spec;
  try {
    spec = parse_config(o.config, kind);
    if (o.seed) spec.seed = *o.seed;
    if (o.out_dir) spec.out_dir = *o.out_dir;
    if (o.threads) spec.threads = *o.threads;
    validate_spec(spec);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  ResultSet results = run_experiment(spec);
  emit_report(results);
  std::cout << "results: " << results.directory.string() << "\n";
  for (const PropertyCheck& c : results.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.hard ? "" : " (soft)") << ": " << c.detail << "\n";
  if (!results.failure.empty()) std::cerr << "computation failed: " << results.failure << "\n";
  return results.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments for random breather Schroedinger operators"};
  app.set_version_flag("--version", std::string(BREATHER_VERSION));
  app.require_subcommand(1);

  const std::vector<std::pair<ExperimentKind, const char*>> kinds = {
      {ExperimentKind::Spectrum, "eigenvalues below E with residuals"},
      {ExperimentKind::UcScale, "unique-continuation constant versus L"},
      {ExperimentKind::UcDelta, "unique-continuation constant versus delta"},
      {ExperimentKind::Wegner, "Monte Carlo Wegner estimate over an epsilon sweep"},
      {ExperimentKind::Lifting, "eigenvalue lifting gaps over a delta sweep"},
      {ExperimentKind::Ids, "integrated density of states"},
  };

  Overrides overrides;
  std::optional<ExperimentKind> chosen;
  for (const auto& [kind, help] : kinds) {
    CLI::App* sub = app.add_subcommand(std::string(to_string(kind)), help);
    sub->add_option("--config", overrides.config, "INI file with [model] and [run] sections")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", overrides.seed, "overrides run.seed");
    sub->add_option("--out-dir", overrides.out_dir, "overrides run.out_dir");
    sub->add_option("--threads", overrides.threads, "overrides run.threads")->check(CLI::PositiveNumber);
    sub->callback([&chosen, kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run(*chosen, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

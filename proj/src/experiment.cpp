#include "breather/experiment.hpp"

#include "breather/eigensolver.hpp"
#include "breather/io.hpp"
#include "breather/parallel.hpp"
#include "breather/uc_analysis.hpp"
#include "breather/wegner.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#ifndef BREATHER_VERSION
#define BREATHER_VERSION "unknown"
#endif

namespace breather {

namespace {

namespace pt = boost::property_tree;
using json = nlohmann::json;

// ---------------------------------------------------------------- parsing

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (!value.empty() && value.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_scalar(const std::string& key, const std::string& raw, const char* what) {
  const std::string v = trim(raw);
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected " + what + ", got '" + v + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) throw ConfigError(key + ": value must be finite");
  return out;
}

int parse_int(const std::string& key, const std::string& v) { return parse_scalar<int>(key, v, "an integer"); }
double parse_double(const std::string& key, const std::string& v) { return parse_scalar<double>(key, v, "a number"); }

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& raw, F one) {
  std::vector<T> out;
  for (const std::string& item : split_list(raw)) out.push_back(one(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

template <typename F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

using Setter = std::function<void(const std::string& key, const std::string& value, ExperimentSpec&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.d", [](auto& k, auto& v, auto& s) { s.dim = parse_int(k, v); }},
      {"model.L", [](auto& k, auto& v, auto& s) { s.sides = {parse_int(k, v)}; }},
      {"model.L_list", [](auto& k, auto& v, auto& s) { s.sides = parse_list<int>(k, v, parse_int); }},
      {"model.m", [](auto& k, auto& v, auto& s) { s.density = parse_int(k, v); }},
      {"model.bc", [](auto& k, auto& v, auto& s) { s.bc = wrap(k, [&] { return parse_boundary(trim(v)); }); }},
      {"model.potential", [](auto&, auto& v, auto& s) { s.potential = trim(v); }},
      {"model.amplitude", [](auto& k, auto& v, auto& s) { s.amplitude = parse_double(k, v); }},
      {"model.omega_minus", [](auto& k, auto& v, auto& s) { s.dist.omega_minus = parse_double(k, v); }},
      {"model.omega_plus", [](auto& k, auto& v, auto& s) { s.dist.omega_plus = parse_double(k, v); }},
      {"model.single_site",
       [](auto& k, auto& v, auto& s) { s.shape = wrap(k, [&] { return parse_site_shape(trim(v)); }); }},
      {"model.alloy_radius", [](auto& k, auto& v, auto& s) { s.alloy_radius = parse_double(k, v); }},
      {"model.delta", [](auto& k, auto& v, auto& s) { s.deltas = {parse_double(k, v)}; }},
      {"model.delta_list", [](auto& k, auto& v, auto& s) { s.deltas = parse_list<double>(k, v, parse_double); }},
      {"model.E", [](auto& k, auto& v, auto& s) { s.energy = parse_double(k, v); }},
      {"model.E0", [](auto& k, auto& v, auto& s) { s.energy_cap = parse_double(k, v); }},
      {"model.epsilon", [](auto& k, auto& v, auto& s) { s.epsilons = {parse_double(k, v)}; }},
      {"model.epsilon_list",
       [](auto& k, auto& v, auto& s) { s.epsilons = parse_list<double>(k, v, parse_double); }},
      {"model.placements",
       [](auto& k, auto& v, auto& s) {
         s.placements = parse_list<PlacementKind>(k, v, [](const std::string& key, const std::string& item) {
           return wrap(key, [&] { return parse_placement(item).kind; });
         });
       }},
      {"model.E_min", [](auto& k, auto& v, auto& s) { s.e_min = parse_double(k, v); }},
      {"model.E_max", [](auto& k, auto& v, auto& s) { s.e_max = parse_double(k, v); }},
      {"model.n_energies", [](auto& k, auto& v, auto& s) { s.n_energies = parse_int(k, v); }},
      {"run.seed",
       [](auto& k, auto& v, auto& s) { s.seed = parse_scalar<std::uint64_t>(k, v, "an unsigned 64-bit integer"); }},
      {"run.n_samples", [](auto& k, auto& v, auto& s) { s.n_samples = parse_int(k, v); }},
      {"run.threads",
       [](auto& k, auto& v, auto& s) { s.threads = parse_scalar<unsigned>(k, v, "a positive integer"); }},
      {"run.out_dir", [](auto&, auto& v, auto& s) { s.out_dir = trim(v); }},
      {"run.K0_assumed", [](auto& k, auto& v, auto& s) { s.k0_assumed = parse_double(k, v); }},
      {"run.scale_ratio", [](auto& k, auto& v, auto& s) { s.scale_ratio = parse_double(k, v); }},
      {"run.poly_residual", [](auto& k, auto& v, auto& s) { s.poly_residual = parse_double(k, v); }},
      {"run.tol", [](auto& k, auto& v, auto& s) { s.tol = parse_double(k, v); }},
      {"run.refine_mesh", [](auto& k, auto& v, auto& s) { s.refine_mesh = parse_bool(k, v); }},
  };
  return table;
}

// Keys that set the same field.
const std::map<std::string, std::string> kAliases = {
    {"model.L_list", "model.L"}, {"model.delta_list", "model.delta"}, {"model.epsilon_list", "model.epsilon"}};

// ---------------------------------------------------------------- helpers

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& values) {
  std::vector<std::string> items;
  for (const T& v : values) {
    if constexpr (std::is_floating_point_v<T>)
      items.push_back(format_number(v));
    else
      items.push_back(std::to_string(v));
  }
  return join(items);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool single_side_kind(ExperimentKind kind) { return kind != ExperimentKind::UcScale; }

bool uses_recipe(ExperimentKind kind) {
  return kind == ExperimentKind::Spectrum || kind == ExperimentKind::UcScale || kind == ExperimentKind::UcDelta;
}

PotentialRecipe recipe_of(const ExperimentSpec& spec) {
  PotentialRecipe r;
  r.kind = parse_potential_kind(spec.potential_name());
  r.amplitude = spec.amplitude;
  r.dist = spec.dist;
  r.shape = spec.shape;
  r.alloy_radius = spec.alloy_radius;
  r.seed = spec.seed;
  return r;
}

Placement placement_of(PlacementKind kind, std::uint64_t seed) {
  switch (kind) {
    case PlacementKind::Centered: return Placement::centered();
    case PlacementKind::Corner: return Placement::corner();
    case PlacementKind::Seeded: return Placement::seeded(seed);
  }
  return Placement::centered();
}

WegnerSpec wegner_spec_of(const ExperimentSpec& spec) {
  WegnerSpec w;
  w.dim = spec.dim;
  w.side = spec.sides.front();
  w.density = spec.density;
  w.bc = spec.bc;
  w.dist = spec.dist;
  w.shape = spec.shape;
  w.model = parse_potential_model(spec.potential_name());
  w.alloy_radius = spec.alloy_radius;
  w.energy = spec.energy.value_or(0.0);
  w.epsilon = spec.epsilons.empty() ? 1.0 : spec.epsilons.front();
  w.energy_cap = spec.energy_cap;
  w.n_samples = spec.n_samples;
  w.seed = spec.seed;
  w.k0_assumed = spec.k0_assumed;
  return w;
}

UcSettings uc_settings_of(const ExperimentSpec& spec) {
  UcSettings s;
  s.dim = spec.dim;
  s.density = spec.density;
  s.bc = spec.bc;
  s.refine_for_delta = spec.refine_mesh;
  s.k0_assumed = spec.k0_assumed;
  s.scale_ratio = spec.scale_ratio;
  s.poly_residual = spec.poly_residual;
  s.solver.tol = spec.tol;
  s.threads = spec.threads;
  return s;
}

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key + ": " + message);
}

void check_random_model_resolution(const ExperimentSpec& spec, const std::string& model) {
  const double h = 1.0 / spec.density;
  if (model == "breather" && spec.dist.omega_minus > 0.0)
    require(h <= spec.dist.omega_minus / 2.0 * (1.0 + 1e-12), "model.m",
            "h = 1/m = " + format_number(h) + " must satisfy h <= 2*omega_minus/4 = " +
                format_number(spec.dist.omega_minus / 2.0));
  if (model == "alloy") {
    require(spec.alloy_radius > 0.0 && spec.alloy_radius < 0.5, "model.alloy_radius", "must lie in (0, 1/2)");
    require(h <= spec.alloy_radius / 2.0 * (1.0 + 1e-12), "model.m",
            "h = 1/m = " + format_number(h) + " must satisfy h <= 2*alloy_radius/4 = " +
                format_number(spec.alloy_radius / 2.0));
  }
}

// Grid, potential and ball-set guards for one UC point.
void check_uc_point(const ExperimentSpec& spec, int side, double delta) {
  require(delta > 0.0 && delta < 0.5, "model.delta", "delta = " + format_number(delta) + " must lie in (0, 1/2)");
  const UcSettings settings = uc_settings_of(spec);
  const Grid grid(spec.dim, side, density_for(delta, settings), spec.bc);
  wrap("model.m", [&] {
    indicator(standard_ball_set(side, spec.dim, delta, Placement::centered()), grid);
    return 0;
  });
  wrap("model.potential", [&] {
    make_potential(recipe_of(spec), grid);
    return 0;
  });
}

std::vector<double> analytic_dirichlet(int dim, int side, int density) {
  const int n = density * side - 1;
  const double h = 1.0 / density;
  std::vector<double> axis(n);
  for (int k = 1; k <= n; ++k) {
    const double s = std::sin(k * M_PI * h / (2.0 * side));
    axis[k - 1] = 4.0 / (h * h) * s * s;
  }
  std::vector<double> values = axis;
  for (int a = 1; a < dim; ++a) {
    std::vector<double> next;
    next.reserve(values.size() * axis.size());
    for (double v : values)
      for (double w : axis) next.push_back(v + w);
    values = std::move(next);
  }
  std::sort(values.begin(), values.end());
  return values;
}

// ---------------------------------------------------------------- output

class Writer {
 public:
  explicit Writer(ResultSet& r) : results_(r) {}

  void file(const std::string& name, const std::string& content) {
    std::ofstream out(results_.directory / name, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + (results_.directory / name).string());
    if (std::find(results_.files.begin(), results_.files.end(), name) == results_.files.end())
      results_.files.push_back(name);
  }

 private:
  ResultSet& results_;
};

json fit_json(const std::optional<FitResult>& fit) {
  if (!fit) return nullptr;
  return json{{"slope", fit->slope}, {"intercept", fit->intercept}, {"max_residual", fit->max_residual}};
}

PlotSeries fit_line(const FitResult& fit, const std::vector<double>& xs, const std::string& label) {
  PlotSeries line;
  line.label = label;
  line.line = true;
  line.color = "#d62728";
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  for (double x : {*lo, *hi}) {
    line.x.push_back(x);
    line.y.push_back(std::exp(fit.intercept) * std::pow(x, fit.slope));
  }
  return line;
}

PlotSeries overlay_series(std::vector<double> xs, std::vector<double> ys, double k0) {
  PlotSeries s;
  s.label = "bound overlay, assumed K_0 = " + format_number(k0);
  s.x = std::move(xs);
  s.y = std::move(ys);
  s.line = true;
  s.dashed = true;
  s.color = "#7f7f7f";
  return s;
}

// ---------------------------------------------------------------- kinds

void run_spectrum(const ExperimentSpec& spec, ResultSet& r, Writer& w) {
  const Grid grid(spec.dim, spec.sides.front(), spec.density, spec.bc);
  const SparseOperator op = assemble_hamiltonian(grid, make_potential(recipe_of(spec), grid));
  SolverOptions options;
  options.tol = spec.tol;
  const EigenSolution sol = eigenpairs_below(op, *spec.energy, options);

  std::ostringstream csv;
  csv << "n,E,residual\n";
  for (std::size_t k = 0; k < sol.size(); ++k)
    csv << k + 1 << ',' << format_number(sol.energies[k]) << ',' << format_number(sol.residuals[k]) << '\n';
  w.file("spectrum.csv", csv.str());
  r.notes.push_back(std::to_string(sol.size()) + " eigenvalues <= E = " + format_number(*spec.energy) +
                    " (N = " + std::to_string(op.dimension()) + ")");

  const double worst = sol.residuals.empty() ? 0.0 : *std::max_element(sol.residuals.begin(), sol.residuals.end());
  r.checks.push_back({"residuals within tolerance", worst <= spec.tol, true,
                      "max relative residual " + format_number(worst) + ", tol " + format_number(spec.tol)});

  if (spec.potential_name() == "zero" && spec.bc == Boundary::Dirichlet) {
    const std::vector<double> exact = analytic_dirichlet(spec.dim, spec.sides.front(), spec.density);
    double err = 0.0;
    std::size_t expected = 0;
    while (expected < exact.size() && exact[expected] <= *spec.energy) ++expected;
    for (std::size_t k = 0; k < std::min(expected, sol.size()); ++k)
      err = std::max(err, std::abs(sol.energies[k] - exact[k]) / exact[k]);
    r.checks.push_back({"analytic free Dirichlet spectrum", expected == sol.size() && err <= 1e-10, true,
                        "max relative error " + format_number(err) + " over " + std::to_string(expected) +
                            " values, tolerance 1e-10"});
  }

  if (!sol.empty()) {
    PlotSpec plot;
    plot.title = "Eigenvalues below E = " + format_number(*spec.energy);
    plot.x_label = "n";
    plot.y_label = "E_n";
    plot.log_x = plot.log_y = false;
    PlotSeries s;
    s.label = "E_n";
    for (std::size_t k = 0; k < sol.size(); ++k) {
      s.x.push_back(static_cast<double>(k + 1));
      s.y.push_back(sol.energies[k]);
    }
    plot.series.push_back(std::move(s));
    r.plots.emplace_back("spectrum.svg", std::move(plot));
  }
}

void run_uc(const ExperimentSpec& spec, ResultSet& r, Writer& w) {
  const bool scale = spec.kind == ExperimentKind::UcScale;
  const std::string stem = scale ? "uc_scale" : "uc_delta";
  const UcSettings settings = uc_settings_of(spec);
  const PotentialRecipe recipe = recipe_of(spec);

  std::vector<ScalingRecord> records;
  for (PlacementKind kind : spec.placements) {
    const Placement placement = placement_of(kind, spec.seed);
    records.push_back(scale ? scale_sweep(recipe, *spec.energy, spec.deltas.front(), placement, spec.sides, settings)
                            : delta_sweep(recipe, *spec.energy, spec.sides.front(), placement, spec.deltas, settings));
  }

  ScalingRecord merged = records.front();
  merged.points.clear();
  for (const ScalingRecord& rec : records) merged.points.insert(merged.points.end(), rec.points.begin(), rec.points.end());
  std::ostringstream csv;
  write_csv(merged, csv);
  w.file(stem + ".csv", csv.str());

  json doc{{"kind", std::string(to_string(spec.kind))},
           {"E", *spec.energy},
           {"scale_ratio", spec.scale_ratio},
           {"poly_residual", spec.poly_residual},
           {"K0_assumed", spec.k0_assumed},
           {"records", json::array()}};
  std::vector<std::string> failures;
  for (std::size_t p = 0; p < records.size(); ++p) {
    const ScalingRecord& rec = records[p];
    const std::string name = to_string(placement_of(spec.placements[p], spec.seed));
    json lambdas = json::array();
    for (const UcPoint& pt : rec.points) lambdas.push_back(pt.lambda_min ? json(*pt.lambda_min) : json(nullptr));
    doc["records"].push_back({{"placement", name},
                              {"values", json::array()},
                              {"lambda_min", lambdas},
                              {"fit", fit_json(rec.fit)},
                              {"degenerate", rec.degenerate},
                              {"scale_violation", rec.scale_violation},
                              {"polynomial", rec.polynomial},
                              {"failure", rec.failure}});
    for (const UcPoint& pt : rec.points) doc["records"].back()["values"].push_back(pt.value);
    if (!rec.failure.empty()) failures.push_back(name + ": " + rec.failure);

    if (rec.degenerate) r.notes.push_back(name + ": degenerate case, no eigenvalue below E at some point");
    if (scale) {
      double lo = INFINITY, hi = 0.0;
      for (const UcPoint& pt : rec.points)
        if (pt.lambda_min) {
          lo = std::min(lo, *pt.lambda_min);
          hi = std::max(hi, *pt.lambda_min);
        }
      r.checks.push_back({"scale-free constant (" + name + ")", !rec.scale_violation, true,
                          rec.degenerate ? "degenerate: empty spectral subspace"
                                         : "min/max lambda_min = " + format_number(hi > 0 ? lo / hi : 0.0) +
                                               ", threshold " + format_number(spec.scale_ratio)});
    } else {
      r.checks.push_back(
          {"polynomial delta-dependence (" + name + ")", rec.polynomial, true,
           rec.fit ? "slope " + format_number(rec.fit->slope) + ", max log residual " +
                         format_number(rec.fit->max_residual) + ", threshold " + format_number(spec.poly_residual)
                   : "no fit (fewer than 3 positive lambda_min values)"});
    }

    std::vector<double> xs, ys, bounds;
    for (const UcPoint& pt : rec.points)
      if (pt.lambda_min && *pt.lambda_min > 0.0) {
        xs.push_back(pt.value);
        ys.push_back(*pt.lambda_min);
        bounds.push_back(pt.bound_overlay);
      }
    if (xs.empty()) {
      r.notes.push_back(name + ": nothing to plot");
      continue;
    }
    PlotSpec plot;
    plot.title = std::string(scale ? "lambda_min(M) vs L" : "lambda_min(M) vs delta") + " (" + name + ")";
    plot.x_label = scale ? "L" : "delta";
    plot.y_label = "lambda_min(M)";
    PlotSeries pts;
    pts.label = "measured";
    pts.x = xs;
    pts.y = ys;
    plot.series.push_back(pts);
    if (rec.fit) {
      plot.series.push_back(fit_line(*rec.fit, xs, "least-squares fit"));
      plot.notes.push_back("slope " + format_number(rec.fit->slope) + ", max residual " +
                           format_number(rec.fit->max_residual));
    }
    plot.series.push_back(overlay_series(xs, bounds, spec.k0_assumed));
    r.plots.emplace_back(stem + "_" + name + ".svg", std::move(plot));
  }
  w.file(stem + ".json", doc.dump(2) + "\n");
  if (!failures.empty()) r.failure = join(failures);
}

void run_wegner(const ExperimentSpec& spec, ResultSet& r, Writer& w) {
  const WegnerSpec ws = wegner_spec_of(spec);
  const std::vector<WegnerResult> results = wegner_epsilon_sweep(ws, spec.epsilons, spec.threads);

  std::ostringstream csv;
  csv << "epsilon,mean,stderr,ci_low,ci_high,excluded,rhs_shape,C_fit\n";
  for (const WegnerResult& res : results)
    csv << format_number(res.epsilon) << ',' << format_number(res.mean) << ',' << format_number(res.stderr_mean)
        << ',' << format_number(res.ci_low) << ',' << format_number(res.ci_high) << ',' << res.excluded << ','
        << format_number(res.rhs_shape) << ',' << format_number(res.c_fit) << '\n';
  w.file("wegner.csv", csv.str());

  std::optional<FitResult> theta;
  {
    std::vector<double> xs, ys;
    for (const WegnerResult& res : results)
      if (res.mean > 0.0) {
        xs.push_back(res.epsilon);
        ys.push_back(res.mean);
      }
    if (xs.size() >= 3) try {
        theta = fit_exponent(xs, ys);
      } catch (const std::invalid_argument&) {
      }
  }
  const std::optional<double> c_fit = fit_wegner_constant(results);

  json doc{{"results", json::array()},
           {"theta_fit", fit_json(theta)},
           {"C_fit", c_fit ? json(*c_fit) : json(nullptr)},
           {"exponent_brackets", "grouping"}};
  for (const WegnerResult& res : results) doc["results"].push_back(to_json(ws, res));
  w.file("wegner.json", doc.dump(2) + "\n");

  if (results.front().excluded > 0)
    r.notes.push_back(std::to_string(results.front().excluded) + " samples excluded; first: " +
                      results.front().exclusions.front());
  if (results.size() > 1) {
    bool monotone = true;
    for (std::size_t k = 0; k + 1 < results.size(); ++k)
      for (std::size_t i = 0; i < results[k].counts.size(); ++i)
        if (results[k].counts[i] && results[k + 1].counts[i] && *results[k].counts[i] > *results[k + 1].counts[i] &&
            results[k].epsilon < results[k + 1].epsilon)
          monotone = false;
    r.checks.push_back({"per-sample counts nondecreasing in epsilon", monotone, true, "nested windows"});
  }
  if (results.size() >= 3)
    r.checks.push_back({"fitted theta > 0", theta && theta->slope > 0.0, false,
                        theta ? "theta = " + format_number(theta->slope) : "no fit (fewer than 3 positive means)"});

  PlotSpec plot;
  plot.title = "Wegner: mean eigenvalue count in [E - eps, E + eps], E = " + format_number(*spec.energy);
  plot.x_label = "epsilon";
  plot.y_label = "mean count";
  PlotSeries pts;
  pts.label = "mean +- 95% CI";
  std::vector<double> xs, overlay;
  for (const WegnerResult& res : results) {
    pts.x.push_back(res.epsilon);
    pts.y.push_back(res.mean);
    pts.y_low.push_back(res.ci_low);
    pts.y_high.push_back(res.ci_high);
    if (c_fit && res.rhs_shape > 0.0) {
      xs.push_back(res.epsilon);
      overlay.push_back(*c_fit * res.rhs_shape);
    }
  }
  plot.series.push_back(pts);
  if (theta) {
    plot.series.push_back(fit_line(*theta, pts.x, "least-squares fit"));
    plot.notes.push_back("theta " + format_number(theta->slope));
  }
  if (!xs.empty()) plot.series.push_back(overlay_series(xs, overlay, spec.k0_assumed));
  r.plots.emplace_back("wegner.svg", std::move(plot));
}

void run_lifting(const ExperimentSpec& spec, ResultSet& r, Writer& w) {
  const int side = spec.sides.front();
  const BreatherConfiguration config = sample_configuration(spec.dist, side, spec.dim, spec.seed, spec.shape);
  const Grid grid(spec.dim, side, spec.density, spec.bc);
  SolverOptions options;
  options.tol = spec.tol;
  std::vector<std::vector<LiftingEntry>> gaps(spec.deltas.size());
  parallel_for(spec.deltas.size(), spec.threads,
               [&](std::size_t k) { gaps[k] = lifting_gap(config, spec.deltas[k], spec.energy_cap, grid, options); });

  w.file("configuration.json", to_json(config).dump(2) + "\n");
  std::ostringstream csv;
  csv << "delta,n,E_base,E_lifted,gap,bound_overlay\n";
  double min_gap = INFINITY, zero_gap = 0.0;
  bool has_zero = false;
  std::vector<double> xs, g1, bounds;
  for (std::size_t k = 0; k < spec.deltas.size(); ++k) {
    const double delta = spec.deltas[k];
    const double bound = lifting_bound(delta, spec.energy_cap, spec.k0_assumed);
    for (const LiftingEntry& e : gaps[k]) {
      csv << format_number(delta) << ',' << e.n << ',' << format_number(e.base) << ',' << format_number(e.lifted)
          << ',' << format_number(e.gap()) << ',' << format_number(bound) << '\n';
      min_gap = std::min(min_gap, e.gap());
      if (delta == 0.0) {
        has_zero = true;
        zero_gap = std::max(zero_gap, std::abs(e.gap()));
      }
    }
    if (delta > 0.0 && !gaps[k].empty() && gaps[k].front().gap() > 0.0) {
      xs.push_back(delta);
      g1.push_back(gaps[k].front().gap());
      bounds.push_back(bound);
    }
  }
  w.file("lifting.csv", csv.str());

  r.checks.push_back({"gaps nonnegative", !(min_gap < 0.0), true, "min gap " + format_number(min_gap)});
  if (has_zero)
    r.checks.push_back({"delta = 0 gives zero gaps", zero_gap <= 1e-12, true, "max |gap| " + format_number(zero_gap)});
  std::optional<FitResult> fit;
  if (xs.size() >= 3) try {
      fit = fit_exponent(xs, g1);
    } catch (const std::invalid_argument&) {
    }
  if (fit)
    r.checks.push_back({"g_1 grows polynomially in delta", fit->slope > 0.0 && fit->max_residual <= spec.poly_residual,
                        false,
                        "slope " + format_number(fit->slope) + ", max log residual " + format_number(fit->max_residual)});
  if (xs.empty()) return;
  PlotSpec plot;
  plot.title = "Eigenvalue lifting g_1 = E_1(omega + delta) - E_1(omega)";
  plot.x_label = "delta";
  plot.y_label = "g_1";
  PlotSeries pts;
  pts.label = "g_1";
  pts.x = xs;
  pts.y = g1;
  plot.series.push_back(pts);
  if (fit) {
    plot.series.push_back(fit_line(*fit, xs, "least-squares fit"));
    plot.notes.push_back("slope " + format_number(fit->slope));
  }
  plot.series.push_back(overlay_series(xs, bounds, spec.k0_assumed));
  r.plots.emplace_back("lifting.svg", std::move(plot));
}

void run_ids(const ExperimentSpec& spec, ResultSet& r, Writer& w) {
  const WegnerSpec ws = wegner_spec_of(spec);
  const std::vector<double> energies = spec.ids_energies();
  const IdsCurve curve = ids_estimate(ws, energies, spec.threads);

  std::ostringstream csv, mod;
  csv << "E,N_hat,stderr\n";
  for (std::size_t k = 0; k < energies.size(); ++k)
    csv << format_number(energies[k]) << ',' << format_number(curve.n_hat[k]) << ','
        << format_number(curve.stderr_n[k]) << '\n';
  mod << "E_lo,E_hi,delta_N\n";
  for (std::size_t k = 0; k < curve.modulus.size(); ++k)
    mod << format_number(energies[k]) << ',' << format_number(energies[k + 1]) << ','
        << format_number(curve.modulus[k]) << '\n';
  w.file("ids.csv", csv.str());
  w.file("ids_modulus.csv", mod.str());
  if (curve.excluded > 0) r.notes.push_back(std::to_string(curve.excluded) + " samples excluded");

  bool monotone = true;
  for (std::size_t k = 0; k + 1 < curve.n_hat.size(); ++k) monotone = monotone && curve.n_hat[k] <= curve.n_hat[k + 1];
  r.checks.push_back({"N_hat nondecreasing", monotone, true, std::to_string(energies.size()) + " grid energies"});
  const Grid grid(spec.dim, spec.sides.front(), spec.density, spec.bc);
  const double cap = static_cast<double>(grid.size()) / std::pow(spec.sides.front(), spec.dim);
  r.checks.push_back({"N_hat <= N / L^d", curve.n_hat.back() <= cap, true, "bound " + format_number(cap)});

  PlotSpec plot;
  plot.title = "Integrated density of states";
  plot.x_label = "E";
  plot.y_label = "N_hat(E)";
  plot.log_x = plot.log_y = false;
  PlotSeries pts;
  pts.label = "N_hat";
  pts.x = energies;
  pts.y = curve.n_hat;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    pts.y_low.push_back(curve.n_hat[k] - 1.96 * curve.stderr_n[k]);
    pts.y_high.push_back(curve.n_hat[k] + 1.96 * curve.stderr_n[k]);
  }
  plot.series.push_back(pts);
  if (spec.dim == 1 && ws.model == PotentialModel::Free) {
    PlotSeries weyl;
    weyl.label = "free Weyl count sqrt(E)/pi";
    weyl.line = weyl.dashed = true;
    weyl.color = "#7f7f7f";
    double worst = 0.0;
    for (double e : energies)
      if (e > 0.0) {
        weyl.x.push_back(e);
        weyl.y.push_back(std::sqrt(e) / M_PI);
      }
    for (std::size_t k = 0; k < energies.size(); ++k)
      if (energies[k] >= 0.5 * energies.back() && energies[k] > 0.0)
        worst = std::max(worst, std::abs(curve.n_hat[k] * M_PI / std::sqrt(energies[k]) - 1.0));
    r.checks.push_back({"Weyl agreement in the upper half of the grid", worst <= 0.15, false,
                        "max relative deviation " + format_number(worst)});
    plot.series.push_back(std::move(weyl));
  }
  r.plots.emplace_back("ids.svg", std::move(plot));
}

void write_manifest(ResultSet& r) {
  json checks = json::array();
  for (const PropertyCheck& c : r.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"hard", c.hard}, {"detail", c.detail}});
  const json doc{{"spec_hash", r.hash},
                 {"kind", std::string(to_string(r.spec.kind))},
                 {"version", r.version},
                 {"started", r.started},
                 {"finished", r.finished},
                 {"exit_code", r.exit_code()},
                 {"failure", r.failure},
                 {"files", r.files},
                 {"checks", checks}};
  std::ofstream out(r.directory / "manifest.json", std::ios::binary | std::ios::trunc);
  out << doc.dump(2) << "\n";
}

}  // namespace

// ---------------------------------------------------------------- public API

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Spectrum: return "spectrum";
    case ExperimentKind::UcScale: return "uc-scale";
    case ExperimentKind::UcDelta: return "uc-delta";
    case ExperimentKind::Wegner: return "wegner";
    case ExperimentKind::Lifting: return "lifting";
    case ExperimentKind::Ids: return "ids";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (ExperimentKind k : {ExperimentKind::Spectrum, ExperimentKind::UcScale, ExperimentKind::UcDelta,
                           ExperimentKind::Wegner, ExperimentKind::Lifting, ExperimentKind::Ids})
    if (to_string(k) == name) return k;
  throw ConfigError("kind: unknown experiment kind '" + std::string(name) +
                    "' (expected spectrum, uc-scale, uc-delta, wegner, lifting or ids)");
}

std::string ExperimentSpec::potential_name() const {
  if (!potential.empty()) return potential;
  return uses_recipe(kind) ? "zero" : "breather";
}

std::vector<double> ExperimentSpec::ids_energies() const {
  const double hi = e_max.value_or(energy_cap);
  std::vector<double> out;
  for (int k = 0; k < n_energies; ++k)
    out.push_back(n_energies == 1 ? e_min : e_min + (hi - e_min) * k / (n_energies - 1));
  return out;
}

ExperimentSpec parse_config_text(std::string_view text, std::optional<ExperimentKind> kind) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentSpec spec;
  spec.threads = available_threads();
  std::optional<ExperimentKind> declared;
  std::set<std::string> seen;
  for (const auto& [name, node] : tree) {
    if (name == "model" || name == "run") {
      for (const auto& [key, leaf] : node) {
        const std::string path = name + "." + key;
        const auto it = setters().find(path);
        if (it == setters().end()) throw ConfigError(path + ": unknown key");
        const std::string field = kAliases.contains(path) ? kAliases.at(path) : path;
        if (!seen.insert(field).second)
          throw ConfigError(path + ": set more than once (" + field + " and its list form are exclusive)");
        it->second(path, leaf.data(), spec);
      }
    } else if (node.empty() && name == "kind") {
      declared = parse_experiment_kind(trim(node.data()));
    } else if (node.empty()) {
      throw ConfigError(name + ": unknown top-level key (keys belong to [model] or [run])");
    } else {
      throw ConfigError(name + ": unknown section (expected [model] or [run])");
    }
  }
  if (kind && declared && *kind != *declared)
    throw ConfigError("kind: config declares '" + std::string(to_string(*declared)) + "' but '" +
                      std::string(to_string(*kind)) + "' was requested");
  if (!kind && !declared) throw ConfigError("kind: missing (give it in the config or as the subcommand)");
  spec.kind = kind ? *kind : *declared;
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path, std::optional<ExperimentKind> kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), kind);
}

std::string to_config_text(const ExperimentSpec& spec, bool with_run_io) {
  std::ostringstream out;
  out << "kind = " << to_string(spec.kind) << "\n\n[model]\n";
  out << "d = " << spec.dim << "\n";
  out << "L_list = " << join_numbers(spec.sides) << "\n";
  out << "m = " << spec.density << "\n";
  out << "bc = " << to_string(spec.bc) << "\n";
  if (!spec.potential.empty()) out << "potential = " << spec.potential << "\n";
  out << "amplitude = " << format_number(spec.amplitude) << "\n";
  out << "omega_minus = " << format_number(spec.dist.omega_minus) << "\n";
  out << "omega_plus = " << format_number(spec.dist.omega_plus) << "\n";
  out << "single_site = " << to_string(spec.shape) << "\n";
  out << "alloy_radius = " << format_number(spec.alloy_radius) << "\n";
  if (!spec.deltas.empty()) out << "delta_list = " << join_numbers(spec.deltas) << "\n";
  if (spec.energy) out << "E = " << format_number(*spec.energy) << "\n";
  out << "E0 = " << format_number(spec.energy_cap) << "\n";
  if (!spec.epsilons.empty()) out << "epsilon_list = " << join_numbers(spec.epsilons) << "\n";
  std::vector<std::string> placements;
  for (PlacementKind p : spec.placements) placements.push_back(to_string(placement_of(p, 0)));
  out << "placements = " << join(placements) << "\n";
  out << "E_min = " << format_number(spec.e_min) << "\n";
  if (spec.e_max) out << "E_max = " << format_number(*spec.e_max) << "\n";
  out << "n_energies = " << spec.n_energies << "\n";
  out << "\n[run]\n";
  out << "seed = " << spec.seed << "\n";
  out << "n_samples = " << spec.n_samples << "\n";
  if (with_run_io) {
    out << "threads = " << spec.threads << "\n";
    out << "out_dir = " << spec.out_dir << "\n";
  }
  out << "K0_assumed = " << format_number(spec.k0_assumed) << "\n";
  out << "scale_ratio = " << format_number(spec.scale_ratio) << "\n";
  out << "poly_residual = " << format_number(spec.poly_residual) << "\n";
  out << "tol = " << format_number(spec.tol) << "\n";
  out << "refine_mesh = " << (spec.refine_mesh ? "true" : "false") << "\n";
  return out.str();
}

std::string spec_hash(const ExperimentSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(to_config_text(spec, false))));
  return buf;
}

void validate_spec(const ExperimentSpec& spec) {
  require(spec.dim >= 1 && spec.dim <= 3, "model.d", "dimension must be 1, 2 or 3");
  require(!spec.sides.empty(), "model.L", "required");
  for (int side : spec.sides)
    require(side >= 1 && side % 2 == 1, "model.L",
            "L = " + std::to_string(side) + " must be an odd positive integer (boxes are centered on a site)");
  require(!single_side_kind(spec.kind) || spec.sides.size() == 1, "model.L",
          std::string(to_string(spec.kind)) + " takes a single L");
  require(spec.density >= 2, "model.m", "points per unit length must be >= 2");
  wrap("model.omega_minus", [&] {
    spec.dist.validate();
    return 0;
  });
  require(spec.k0_assumed > 0.0, "run.K0_assumed", "must be positive");
  require(spec.tol > 0.0 && spec.tol <= 1e-6, "run.tol", "must lie in (0, 1e-6]");
  require(spec.threads >= 1, "run.threads", "must be >= 1");
  require(spec.scale_ratio > 0.0 && spec.scale_ratio <= 1.0, "run.scale_ratio", "must lie in (0, 1]");
  require(spec.poly_residual > 0.0, "run.poly_residual", "must be positive");
  require(!spec.out_dir.empty(), "run.out_dir", "must not be empty");

  const std::string potential = spec.potential_name();
  if (uses_recipe(spec.kind)) {
    wrap("model.potential", [&] { return parse_potential_kind(potential); });
  } else {
    wrap("model.potential", [&] { return parse_potential_model(potential); });
    require(spec.kind != ExperimentKind::Lifting || potential == "breather", "model.potential",
            "lifting uses the breather model");
    check_random_model_resolution(spec, potential);
  }
  const bool needs_energy = spec.kind != ExperimentKind::Lifting && spec.kind != ExperimentKind::Ids;
  require(!needs_energy || spec.energy.has_value(), "model.E", "required for " + std::string(to_string(spec.kind)));

  switch (spec.kind) {
    case ExperimentKind::Spectrum: {
      const Grid grid(spec.dim, spec.sides.front(), spec.density, spec.bc);
      wrap("model.potential", [&] {
        make_potential(recipe_of(spec), grid);
        return 0;
      });
      break;
    }
    case ExperimentKind::UcScale:
      require(spec.deltas.size() == 1, "model.delta", "uc-scale takes a single delta");
      require(!spec.placements.empty(), "model.placements", "at least one placement is required");
      for (int side : spec.sides) check_uc_point(spec, side, spec.deltas.front());
      break;
    case ExperimentKind::UcDelta:
      require(spec.deltas.size() >= 3, "model.delta_list", "uc-delta needs at least 3 values for the fit");
      require(!spec.placements.empty(), "model.placements", "at least one placement is required");
      for (double delta : spec.deltas) check_uc_point(spec, spec.sides.front(), delta);
      break;
    case ExperimentKind::Wegner: {
      require(!spec.epsilons.empty(), "model.epsilon", "required for wegner");
      require(spec.n_samples >= 30, "run.n_samples", "must be >= 30");
      WegnerSpec ws = wegner_spec_of(spec);
      for (double eps : spec.epsilons) {
        ws.epsilon = eps;
        wrap("model.epsilon", [&] {
          ws.validate();
          return 0;
        });
      }
      break;
    }
    case ExperimentKind::Lifting: {
      require(!spec.deltas.empty(), "model.delta", "required for lifting");
      const double admissible = 0.5 - spec.dist.omega_plus;
      const double h = 1.0 / spec.density;
      for (double delta : spec.deltas) {
        require(delta >= 0.0 && delta <= admissible + 1e-15, "model.delta",
                "delta = " + format_number(delta) + " outside [0, 1/2 - omega_plus] = [0, " +
                    format_number(admissible) + "]");
        require(delta == 0.0 || h <= delta / 4.0 * (1.0 + 1e-12), "model.m",
                "h = 1/m = " + format_number(h) + " must satisfy h <= delta/4 = " + format_number(delta / 4.0));
      }
      break;
    }
    case ExperimentKind::Ids: {
      require(spec.n_samples >= 30, "run.n_samples", "must be >= 30");
      require(spec.n_energies >= 2, "model.n_energies", "must be >= 2");
      const double hi = spec.e_max.value_or(spec.energy_cap);
      require(spec.e_min < hi, "model.E_min", "must be below E_max");
      require(hi <= spec.energy_cap, "model.E_max", "must not exceed E0");
      break;
    }
  }
}

int ResultSet::exit_code() const {
  if (!failure.empty()) return 2;
  for (const PropertyCheck& c : checks)
    if (c.hard && !c.passed) return 3;
  return 0;
}

ResultSet run_experiment(const ExperimentSpec& spec) {
  validate_spec(spec);
  ResultSet r;
  r.spec = spec;
  r.hash = spec_hash(spec);
  r.version = BREATHER_VERSION;
  r.started = utc_now();
  r.directory = std::filesystem::path(spec.out_dir) / r.hash;
  std::filesystem::create_directories(r.directory);
  std::filesystem::remove(r.directory / "FAILED");

  Writer w(r);
  w.file("spec.ini", to_config_text(spec, false));
  try {
    switch (spec.kind) {
      case ExperimentKind::Spectrum: run_spectrum(spec, r, w); break;
      case ExperimentKind::UcScale:
      case ExperimentKind::UcDelta: run_uc(spec, r, w); break;
      case ExperimentKind::Wegner: run_wegner(spec, r, w); break;
      case ExperimentKind::Lifting: run_lifting(spec, r, w); break;
      case ExperimentKind::Ids: run_ids(spec, r, w); break;
    }
  } catch (const std::exception& e) {
    r.failure = e.what();
  }
  if (!r.failure.empty()) w.file("FAILED", r.failure + "\n");
  r.finished = utc_now();
  write_manifest(r);
  return r;
}

void emit_report(ResultSet& r) {
  Writer w(r);
  std::vector<std::string> warnings;
  for (const auto& [name, plot] : r.plots) {
    try {
      w.file(name, render_svg(plot));
    } catch (const std::exception& e) {
      warnings.push_back("plot " + name + " skipped: " + e.what());
    }
  }

  std::ostringstream s;
  s << "experiment: " << to_string(r.spec.kind) << "\n";
  s << "spec hash: " << r.hash << "\n";
  s << "version: " << r.version << "\n";
  s << "status: " << (r.exit_code() == 0 ? "ok" : r.exit_code() == 2 ? "computation failed" : "property check failed")
    << "\n";
  if (!r.failure.empty()) s << "failure: " << r.failure << "\n";
  s << "K0_assumed: " << format_number(r.spec.k0_assumed) << " (overlay only; exponent brackets read as grouping)\n";
  s << "\nproperty checks:\n";
  if (r.checks.empty()) s << "  (none)\n";
  for (const PropertyCheck& c : r.checks)
    s << "  [" << (c.passed ? "PASS" : "FAIL") << "] " << c.name << (c.hard ? "" : " (soft)") << ": " << c.detail
      << "\n";
  if (!r.notes.empty()) {
    s << "\nnotes:\n";
    for (const std::string& n : r.notes) s << "  " << n << "\n";
  }
  if (!warnings.empty()) {
    s << "\nwarnings:\n";
    for (const std::string& wmsg : warnings) s << "  " << wmsg << "\n";
  }
  w.file("summary.txt", s.str());
  write_manifest(r);
}

}  // namespace breather

#include "hetsis/experiments.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include "hetsis/detdyn.hpp"
#include "hetsis/errors.hpp"
#include "hetsis/hetspace.hpp"
#include "hetsis/io.hpp"
#include "hetsis/stochsim.hpp"

namespace hetsis {

namespace fs = std::filesystem;

namespace {

std::string list_text(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_double(values[i]);
  }
  return out + "]";
}

constexpr const char* kPGrid = "[0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95]";
constexpr const char* kMuGrid = "[0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1]";

using Defaults = std::map<std::string, std::string>;

Defaults base_model() {
  return {{"model.beta", "0.3"},  {"model.gamma", "0.4"}, {"model.sigma", "0.01"},
          {"model.eps", "0.0001"}, {"model.i0", "0"}};
}

Defaults base_sim(const std::string& boundary, const std::string& noise, const std::string& frac) {
  return {{"sim.dt", "0.1"},           {"sim.stride", "10"},
          {"sim.boundary", boundary},  {"sim.noise", noise},
          {"sim.divergence_bound", "1000"}, {"fit.fraction", frac}};
}

Defaults merged(std::initializer_list<Defaults> parts) {
  Defaults out;
  for (const auto& part : parts) out.insert(part.begin(), part.end());
  return out;
}

Defaults defaults_for(const std::string& name) {
  const std::string p_grid = kPGrid;
  if (name == "hom_free") return merged({base_model(), base_sim("free", "shared", "0.8")});
  if (name == "hom_clamped") return merged({base_model(), base_sim("clamped", "shared", "0.9")});
  if (name == "discrete_n_sweep")
    return merged({base_model(), base_sim("clamped", "independent", "0.9"),
                   {{"density.p", "0.5"}, {"sweep.n", list_text(log_spaced_integers(2, 100, 12))}}});
  if (name == "continuous_p_sweep")
    return merged({base_model(), base_sim("clamped", "shared", "0.9"),
                   {{"space.m", "100"}, {"sweep.p", p_grid}}});
  if (name == "continuous_p_sweep_free")
    return merged({base_model(), base_sim("free", "shared", "0.8"),
                   {{"space.m", "100"}, {"sweep.p", p_grid}}});
  if (name == "nonseparable_mu_sweep")
    return merged({base_model(), base_sim("clamped", "shared", "0.9"),
                   {{"space.m", "100"}, {"density.sd", "0.1"},
                    {"sweep.mu", kMuGrid}}});
  if (name == "drift_exponent_sweep")
    return merged({base_model(), base_sim("clamped", "shared", "0.9"), {{"sweep.r", "[0.8, 1.5]"}}});
  if (name == "lambda_curves")
    return merged({base_model(), {{"space.m", "100"}, {"density.sd", "0.1"},
                                  {"sweep.mu", "[0, 0.5, 1]"}, {"lambda.points", "400"}}});
  if (name == "normalization_curve") {
    std::vector<double> ns;
    for (int n = 2; n <= 100; ++n) ns.push_back(n);
    return {{"density.p", "0.5"}, {"sweep.n", list_text(ns)}};
  }
  if (name == "density_plot") return {{"space.m", "100"}, {"sweep.p", p_grid}};
  if (name == "mean_path") return merged({base_model(), base_sim("clamped", "shared", "0.9")});
  throw InvalidArgument("unknown experiment '" + name + "'");
}

// Holds an exclusive lock file in the output directory for the lifetime of
// the run.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".hetsis.lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw IoError("cannot lock " + dir.string() + " (another run active or not writable)");
    ::close(fd);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

struct Scenario {
  HeterogeneitySpace space;
  ModelFields fields;
  Drift drift;
  double tc;
};

class Runner {
 public:
  Runner(const ExperimentSpec& spec, KeyValueConfig params)
      : spec_(spec), p_(std::move(params)) {}

  RunRecord run();

 private:
  void single(BoundaryMode boundary);
  void sweep(const std::string& key, const std::function<Scenario(double)>& make);
  void lambda_curves();
  void normalization_curve();
  void density_plot();
  void mean_path();

  Scenario homogeneous(double exponent) const;
  Scenario continuous_p(double p) const;
  Scenario discrete_n(double n) const;
  Scenario nonseparable(double mu) const;

  SimConfig sim_config(const Scenario& s, std::optional<BoundaryMode> boundary = {}) const;
  FitResult fit_and_write(const Scenario& s, const EnsembleStats& stats, const std::string& suffix);
  void write_variance(const EnsembleStats& stats, const std::string& file);
  void write_csv(const std::string& file, const std::vector<CsvColumn>& columns);
  void write_json_file(const std::string& file, const nlohmann::ordered_json& value);

  const ExperimentSpec& spec_;
  KeyValueConfig p_;
  RunRecord record_;
  std::set<std::string> written_;
};

BoundaryMode parse_boundary(const std::string& text) {
  if (text == "clamped") return BoundaryMode::Clamped;
  if (text == "free") return BoundaryMode::Free;
  throw InvalidArgument("sim.boundary must be clamped or free, got '" + text + "'");
}

NoiseMode parse_noise(const std::string& text) {
  if (text == "shared") return NoiseMode::SharedAcrossNodes;
  if (text == "independent") return NoiseMode::IndependentPerNode;
  throw InvalidArgument("sim.noise must be shared or independent, got '" + text + "'");
}

std::size_t positive_count(const KeyValueConfig& p, const std::string& key) {
  const auto v = p.get_int(key, 0);
  if (v < 1) throw InvalidArgument(key + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

Scenario Runner::homogeneous(double exponent) const {
  auto space = make_quadrature_space(1);
  auto fields = ModelFields::homogeneous(1, p_.get_double("model.beta", 0), p_.get_double("model.gamma", 0),
                                         p_.get_double("model.sigma", 0));
  auto drift = Drift::separable_power(p_.get_double("model.eps", 0), exponent, fields.beta);
  const double tc = t_crit(drift, space, fields);
  return {std::move(space), std::move(fields), std::move(drift), tc};
}

Scenario Runner::continuous_p(double p) const {
  auto space = make_quadrature_space(static_cast<int>(positive_count(p_, "space.m")));
  auto fields = ModelFields::homogeneous(space.size(), p_.get_double("model.beta", 0),
                                         p_.get_double("model.gamma", 0), p_.get_double("model.sigma", 0));
  fields.f = truncated_normal_density(space, 0.5, theta_of_p(p)).f;
  auto drift = Drift::separable_power(p_.get_double("model.eps", 0), 1.0, fields.beta);
  const double tc = t_crit(drift, space, fields);
  return {std::move(space), std::move(fields), std::move(drift), tc};
}

Scenario Runner::discrete_n(double n) const {
  if (n != std::floor(n)) throw InvalidArgument("sweep.n entries must be integers");
  auto space = make_discrete_space(static_cast<int>(n));
  auto fields = ModelFields::homogeneous(space.size(), p_.get_double("model.beta", 0),
                                         p_.get_double("model.gamma", 0), p_.get_double("model.sigma", 0));
  fields.f = truncated_normal_density(space, 0.5, theta_of_p(p_.get_double("density.p", 0))).f;
  auto drift = Drift::separable_power(p_.get_double("model.eps", 0), 1.0, fields.beta);
  const double tc = t_crit(drift, space, fields);
  return {std::move(space), std::move(fields), std::move(drift), tc};
}

Scenario Runner::nonseparable(double mu) const {
  auto space = make_quadrature_space(static_cast<int>(positive_count(p_, "space.m")));
  auto fields = ModelFields::homogeneous(space.size(), p_.get_double("model.beta", 0),
                                         p_.get_double("model.gamma", 0), p_.get_double("model.sigma", 0));
  fields.f = truncated_normal_density(space, mu, p_.get_double("density.sd", 0)).f;
  auto drift = Drift::non_separable(p_.get_double("model.eps", 0), space.nodes());
  const double tc = t_crit(drift, space, fields);
  return {std::move(space), std::move(fields), std::move(drift), tc};
}

SimConfig Runner::sim_config(const Scenario& s, std::optional<BoundaryMode> boundary) const {
  SimConfig c;
  c.dt = p_.get_double("sim.dt", 0);
  c.record_stride = positive_count(p_, "sim.stride");
  c.n_paths = spec_.paths;
  c.seed = spec_.seed;
  c.noise = parse_noise(p_.get_string("sim.noise", ""));
  c.boundary = boundary ? *boundary : parse_boundary(p_.get_string("sim.boundary", ""));
  c.i0 = std::vector<double>(s.space.size(), p_.get_double("model.i0", 0));
  c.t_end = s.tc;
  c.threads = spec_.threads;
  c.divergence_bound = p_.get_double("sim.divergence_bound", 0);
  return c;
}

void Runner::write_csv(const std::string& file, const std::vector<CsvColumn>& columns) {
  emit_csv(spec_.output_dir / file, columns);
  written_.insert(file);
}

void Runner::write_json_file(const std::string& file, const nlohmann::ordered_json& value) {
  write_json(spec_.output_dir / file, value);
  written_.insert(file);
}

void Runner::write_variance(const EnsembleStats& stats, const std::string& file) {
  std::vector<double> counts(stats.counts.begin(), stats.counts.end());
  write_csv(file, {{"t", stats.times}, {"mean", stats.mean_path}, {"var", stats.var_path}, {"count", counts}});
}

FitResult Runner::fit_and_write(const Scenario& s, const EnsembleStats& stats, const std::string& suffix) {
  write_variance(stats, "variance" + suffix + ".csv");
  const double fraction = p_.get_double("fit.fraction", 0);
  const FitResult fit = fit_power_law(stats.times, stats.var_path, s.tc, fraction);
  write_json_file("fit" + suffix + ".json", fit_to_json(fit));

  if (!fit.degenerate) {
    std::vector<double> t;
    for (double x : stats.times)
      if (x < s.tc) t.push_back(x);
    const FitResult unit = fit_amplitude(stats.times, stats.var_path, s.tc, fraction, 1.0);
    write_csv("reference" + suffix + ".csv",
              {{"t", t},
               {"fitted", theoretical_reference(t, s.tc, fit.A, fit.alpha)},
               {"alpha_one", theoretical_reference(t, s.tc, unit.A, 1.0)}});
  }
  return fit;
}

void Runner::single(BoundaryMode boundary) {
  const Scenario s = homogeneous(1.0);
  const auto stats = simulate_ensemble(s.space, s.fields, s.drift, sim_config(s, boundary));
  record_.fits.emplace_back(0.0, fit_and_write(s, stats, ""));
}

void Runner::sweep(const std::string& key, const std::function<Scenario(double)>& make) {
  const auto grid = p_.get_list("sweep." + key, {});
  if (grid.empty()) throw InvalidArgument("sweep." + key + " must not be empty");
  std::vector<std::pair<double, FitResult>> results;
  for (double value : grid) {
    const Scenario s = make(value);
    const auto stats = simulate_ensemble(s.space, s.fields, s.drift, sim_config(s));
    results.emplace_back(value, fit_and_write(s, stats, "_" + key + "_" + format_double(value)));
  }
  record_.fits = results;
  record_.sweep = sweep_summary(results);

  std::vector<double> param, a, alpha, tc, rss, n;
  for (const auto& [value, fit] : results) {
    param.push_back(value);
    a.push_back(fit.A);
    alpha.push_back(fit.alpha);
    tc.push_back(fit.t_crit);
    rss.push_back(fit.rss);
    n.push_back(static_cast<double>(fit.n_points));
  }
  write_csv("sweep.csv", {{key, param}, {"A", a}, {"alpha", alpha}, {"t_crit", tc}, {"rss", rss},
                          {"n_points", n}});
  nlohmann::ordered_json summary;
  summary["parameter"] = key;
  summary["rho_alpha"] = record_.sweep.rho_alpha;
  summary["rho_A"] = record_.sweep.rho_A;
  write_json_file("sweep_summary.json", summary);
}

void Runner::lambda_curves() {
  const auto points = positive_count(p_, "lambda.points");
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (double mu : p_.get_list("sweep.mu", {})) {
    const Scenario s = nonseparable(mu);
    ModelFields at = s.fields;
    std::vector<double> t(points), lambda(points);
    // Grid starts one step in: at t = 0 every beta vanishes.
    for (std::size_t k = 0; k < points; ++k) {
      t[k] = s.tc * static_cast<double>(k + 1) / static_cast<double>(points);
      s.drift.fill_beta(t[k], at.beta);
      lambda[k] = leading_eigenvalue(s.space, at);
    }
    write_csv("lambda_mu_" + format_double(mu) + ".csv", {{"t", t}, {"lambda", lambda}});
    nlohmann::ordered_json row;
    row["mu"] = mu;
    row["t_crit"] = s.tc;
    row["lambda_at_t_crit"] = lambda.back();
    summary.push_back(row);
  }
  write_json_file("lambda_summary.json", summary);
}

void Runner::normalization_curve() {
  const double p = p_.get_double("density.p", 0);
  std::vector<double> ns, cs;
  for (double n : p_.get_list("sweep.n", {})) {
    if (n != std::floor(n)) throw InvalidArgument("sweep.n entries must be integers");
    const auto space = make_discrete_space(static_cast<int>(n));
    ns.push_back(n);
    cs.push_back(truncated_normal_density(space, 0.5, theta_of_p(p)).normalization);
  }
  write_csv("normalization.csv", {{"n", ns}, {"C", cs}});
}

void Runner::density_plot() {
  const auto space = make_quadrature_space(static_cast<int>(positive_count(p_, "space.m")));
  std::vector<CsvColumn> columns{{"w", {space.nodes().begin(), space.nodes().end()}}};
  for (double p : p_.get_list("sweep.p", {}))
    columns.push_back({"f_p_" + format_double(p), truncated_normal_density(space, 0.5, theta_of_p(p)).f});
  write_csv("density.csv", columns);
}

void Runner::mean_path() {
  const Scenario s = homogeneous(1.0);
  const auto clamped = simulate_ensemble(s.space, s.fields, s.drift, sim_config(s, BoundaryMode::Clamped));
  const auto free = simulate_ensemble(s.space, s.fields, s.drift, sim_config(s, BoundaryMode::Free));
  const std::size_t rows = clamped.times.size();
  std::vector<double> mean_free(rows, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> count_free(rows, 0.0);
  for (std::size_t k = 0; k < free.times.size() && k < rows; ++k) {
    mean_free[k] = free.mean_path[k];
    count_free[k] = static_cast<double>(free.counts[k]);
  }
  write_csv("mean_path.csv", {{"t", clamped.times}, {"mean_clamped", clamped.mean_path},
                              {"mean_free", mean_free}, {"count_free", count_free}});
}

RunRecord Runner::run() {
  const std::string& name = spec_.name;
  if (name == "hom_free") single(BoundaryMode::Free);
  else if (name == "hom_clamped") single(BoundaryMode::Clamped);
  else if (name == "discrete_n_sweep") sweep("n", [this](double n) { return discrete_n(n); });
  else if (name == "continuous_p_sweep" || name == "continuous_p_sweep_free")
    sweep("p", [this](double p) { return continuous_p(p); });
  else if (name == "nonseparable_mu_sweep") sweep("mu", [this](double mu) { return nonseparable(mu); });
  else if (name == "drift_exponent_sweep") sweep("r", [this](double r) { return homogeneous(r); });
  else if (name == "lambda_curves") lambda_curves();
  else if (name == "normalization_curve") normalization_curve();
  else if (name == "density_plot") density_plot();
  else if (name == "mean_path") mean_path();
  else throw InvalidArgument("unknown experiment '" + name + "'");

  const std::string params_text = p_.canonical();
  const std::string identity = "experiment = " + name + "\nseed = " + std::to_string(spec_.seed) +
                               "\npaths = " + std::to_string(spec_.paths) + "\n" + params_text;
  {
    std::ofstream out(spec_.output_dir / "params.cfg", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write params.cfg");
    out << identity;
    written_.insert("params.cfg");
  }

  record_.spec_hash = crc32_of(identity);
  record_.seed = spec_.seed;
  record_.version = kVersionTag;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& file : written_) {  // std::set keeps them sorted
    const fs::path path = spec_.output_dir / file;
    ManifestEntry entry{file, fs::file_size(path), crc32_of_file(path)};
    nlohmann::ordered_json row;
    row["file"] = entry.file;
    row["bytes"] = entry.bytes;
    row["crc32"] = entry.crc32;
    files.push_back(row);
    record_.files.push_back(entry);
  }
  nlohmann::ordered_json manifest;
  manifest["experiment"] = name;
  manifest["spec_hash"] = record_.spec_hash;
  manifest["seed"] = record_.seed;
  manifest["version"] = record_.version;
  manifest["files"] = files;
  write_json(spec_.output_dir / "manifest.json", manifest);
  return record_;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "hom_free",          "hom_clamped",          "discrete_n_sweep", "continuous_p_sweep",
      "continuous_p_sweep_free", "nonseparable_mu_sweep", "drift_exponent_sweep", "lambda_curves",
      "normalization_curve", "density_plot",       "mean_path"};
  return names;
}

std::vector<double> log_spaced_integers(double lo, double hi, std::size_t count) {
  if (!(lo >= 1.0) || !(hi > lo) || count < 2)
    throw InvalidArgument("log_spaced_integers: need 1 <= lo < hi and count >= 2");
  std::vector<double> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double x = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(count - 1));
    const double v = std::round(x);
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

KeyValueConfig resolve_parameters(const std::string& name, const KeyValueConfig& overrides) {
  const Defaults defaults = defaults_for(name);
  KeyValueConfig out;
  for (const auto& [key, value] : defaults) out.set(key, value);
  for (const auto& [key, value] : overrides.entries()) {
    if (!defaults.count(key))
      throw InvalidArgument("experiment " + name + " has no parameter '" + key + "'");
    out.set(key, value);
  }
  return out;
}

ExperimentSpec ExperimentSpec::from_config(const KeyValueConfig& config) {
  ExperimentSpec spec;
  if (!config.has("experiment")) throw InvalidArgument("spec file needs an 'experiment' key");
  spec.name = config.get_string("experiment", "");
  const auto seed = config.get_int("seed", 1);
  const auto paths = config.get_int("paths", 100);
  const auto threads = config.get_int("threads", 0);
  if (seed < 0) throw InvalidArgument("seed must be nonnegative");
  if (paths < 1) throw InvalidArgument("paths must be at least 1");
  if (threads < 0) throw InvalidArgument("threads must be nonnegative");
  spec.seed = static_cast<std::uint64_t>(seed);
  spec.paths = static_cast<std::size_t>(paths);
  spec.threads = static_cast<unsigned>(threads);
  spec.output_dir = config.get_string("output_dir", "out");
  for (const auto& [key, value] : config.entries())
    if (key != "experiment" && key != "seed" && key != "paths" && key != "threads" && key != "output_dir")
      spec.params.set(key, value);
  return spec;
}

void ExperimentSpec::validate() const {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw InvalidArgument("unknown experiment '" + name + "'");
  if (paths < 1) throw InvalidArgument("paths must be at least 1");
  resolve_parameters(name, params);
}

RunRecord run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  KeyValueConfig params = resolve_parameters(spec.name, spec.params);
  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  if (ec || !fs::is_directory(spec.output_dir))
    throw IoError("cannot create output directory " + spec.output_dir.string());
  DirectoryLock lock(spec.output_dir);
  return Runner(spec, std::move(params)).run();
}

}  // namespace hetsis

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hetsis/config.hpp"
#include "hetsis/detdyn.hpp"
#include "hetsis/errors.hpp"
#include "hetsis/experiments.hpp"
#include "hetsis/hetspace.hpp"
#include "hetsis/io.hpp"
#include "hetsis/warnsign.hpp"

using namespace hetsis;

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kNumerical = 3 };

// A fields file describes the space and the per-node parameters:
//
//   space = quadrature      # or discrete
//   space.n = 100
//   beta = 0.6              # scalar or [list]
//   gamma = 0.4
//   eta = 0
//   q = 1                   # rescaled so that <q f> = 1
//   density.mean = 0.5      # optional: f from a truncated normal
//   density.sd = 0.1        # otherwise f = value of `f` (default 1)
struct LoadedModel {
  HeterogeneitySpace space;
  ModelFields fields;
};

LoadedModel load_fields(const std::string& path) {
  const auto cfg = KeyValueConfig::load(path);
  cfg.require_known({"space", "space.n", "beta", "gamma", "eta", "q", "sigma", "f", "density.mean",
                     "density.sd"});
  const std::string kind = cfg.get_string("space", "quadrature");
  const auto n = cfg.get_int("space.n", 1);
  if (n < 1 || n > 1000000) throw InvalidArgument("space.n out of range");
  HeterogeneitySpace space = kind == "discrete" ? make_discrete_space(static_cast<int>(n))
                             : kind == "quadrature"
                                 ? make_quadrature_space(static_cast<int>(n))
                                 : throw InvalidArgument("space must be discrete or quadrature");
  const std::size_t size = space.size();
  ModelFields fields;
  fields.beta = cfg.get_field("beta", size, 0.0);
  fields.gamma = cfg.get_field("gamma", size, 0.0);
  fields.eta = cfg.get_field("eta", size, 0.0);
  fields.sigma = cfg.get_field("sigma", size, 0.0);
  if (cfg.has("density.sd")) {
    if (cfg.has("f")) throw InvalidArgument("give either f or density.*, not both");
    fields.f = truncated_normal_density(space, cfg.get_double("density.mean", 0.5),
                                        cfg.get_double("density.sd", 0.0)).f;
  } else {
    fields.f = cfg.get_field("f", size, 1.0);
  }
  fields.q = normalize_q(space, cfg.get_field("q", size, 1.0), fields.f);
  return {std::move(space), std::move(fields)};
}

int run(const std::string& spec_path, std::optional<std::uint64_t> seed,
        std::optional<std::size_t> paths, const std::string& out, std::optional<unsigned> threads) {
  ExperimentSpec spec = ExperimentSpec::from_config(KeyValueConfig::load(spec_path));
  if (seed) spec.seed = *seed;
  if (paths) spec.paths = *paths;
  if (!out.empty()) spec.output_dir = out;
  if (threads) spec.threads = *threads;
  const RunRecord record = run_experiment(spec);
  for (const auto& [param, fit] : record.fits)
    std::printf("%-10s A=%-12.6g alpha=%-10.6g t_crit=%.6g n=%zu\n", format_double(param).c_str(), fit.A,
                fit.alpha, fit.t_crit, fit.n_points);
  if (record.fits.size() > 1)
    std::printf("spearman: alpha %.4f, A %.4f\n", record.sweep.rho_alpha, record.sweep.rho_A);
  std::printf("wrote %zu files to %s\n", record.files.size() + 1, spec.output_dir.c_str());
  return kOk;
}

int fit(const std::string& csv, double tcrit, double fraction, const std::string& column) {
  const auto table = read_csv(csv);
  const FitResult result = fit_power_law(table.column("t").values, table.column(column).values, tcrit, fraction);
  std::cout << fit_to_json(result).dump(2) << '\n';
  return kOk;
}

int steady(const std::string& path) {
  const auto model = load_fields(path);
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& s : solve_steady_states(model.space, model.fields)) {
    nlohmann::ordered_json row;
    row["j_hat"] = s.j_hat;
    row["stable"] = s.stable;
    row["i_hat"] = s.i_hat;
    out.push_back(row);
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

int reproduction(const std::string& path) {
  const auto model = load_fields(path);
  nlohmann::ordered_json out;
  out["r0"] = r0(model.space, model.fields);
  out["leading_eigenvalue"] = leading_eigenvalue(model.space, model.fields);
  std::cout << out.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous SIS early-warning experiments"};
  app.require_subcommand(1);

  std::string spec_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<unsigned> threads;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment spec file");
  run_cmd->add_option("spec", spec_path, "Experiment spec file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Master seed");
  run_cmd->add_option("--paths", paths, "Ensemble size")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", out, "Output directory");
  run_cmd->add_option("--threads", threads, "Worker threads, 0 for all cores");

  std::string csv, column = "var";
  double tcrit = 0.0, fraction = 0.9;
  auto* fit_cmd = app.add_subcommand("fit", "Fit A/(t_crit - t)^alpha to a variance CSV");
  fit_cmd->add_option("csv", csv, "CSV with a t column")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--tcrit", tcrit, "Critical time")->required();
  fit_cmd->add_option("--fraction", fraction, "Fitted share of [0, t_crit]");
  fit_cmd->add_option("--column", column, "Variance column name");

  std::string fields_path;
  auto* steady_cmd = app.add_subcommand("steady", "Steady states of a fields file");
  steady_cmd->add_option("fields", fields_path)->required()->check(CLI::ExistingFile);
  auto* r0_cmd = app.add_subcommand("r0", "R0 and leading eigenvalue of a fields file");
  r0_cmd->add_option("fields", fields_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run_cmd) return run(spec_path, seed, paths, out, threads);
    if (*fit_cmd) return fit(csv, tcrit, fraction, column);
    if (*steady_cmd) return steady(fields_path);
    if (*r0_cmd) return reproduction(fields_path);
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DegenerateInput& e) {
    std::cerr << "degenerate input: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}

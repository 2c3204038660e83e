#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "hetsis/config.hpp"
#include "hetsis/errors.hpp"
#include "hetsis/experiments.hpp"
#include "hetsis/io.hpp"

using namespace hetsis;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hetsis_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("csv shape") {
  const auto dir = scratch("csv");
  emit_csv(dir / "a.csv", {{"t", {0.0, 1.0, 2.0}}, {"var", {0.5, 0.25, 0.125}}});
  const std::string text = slurp(dir / "a.csv");
  CHECK(text == "t,var\n0,0.5\n1,0.25\n2,0.125\n");
  CHECK(text.find('\r') == std::string::npos);

  emit_csv(dir / "empty.csv", {{"t", {}}, {"var", {}}});
  CHECK(slurp(dir / "empty.csv") == "t,var\n");
  CHECK(read_csv(dir / "empty.csv").rows() == 0);

  CHECK_THROWS_AS(emit_csv(dir / "bad.csv", {{"t", {1.0}}, {"var", {}}}), InvalidArgument);
  CHECK_THROWS_AS(emit_csv(dir / "missing" / "x.csv", {{"t", {1.0}}}), IoError);
}

TEST_CASE("csv round trip is bit exact") {
  const auto dir = scratch("roundtrip");
  std::vector<double> values{0.1, 1.0 / 3.0, 1e-300, 5e-324, -2.5e17, 13333.333333333334,
                             std::numeric_limits<double>::max(), std::nan(""),
                             std::numeric_limits<double>::infinity()};
  std::vector<double> index(values.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<double>(i);
  emit_csv(dir / "r.csv", {{"i", index}, {"x", values}});
  const auto table = read_csv(dir / "r.csv");
  const auto& back = table.column("x").values;
  REQUIRE(back.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) {
      CHECK(std::isnan(back[i]));
      continue;
    }
    CHECK(std::memcmp(&back[i], &values[i], sizeof(double)) == 0);
  }
  CHECK_THROWS_AS(table.column("nope"), InvalidArgument);
}

TEST_CASE("fit json") {
  FitResult fit;
  fit.A = 0.1;
  fit.alpha = 0.8;
  fit.t_crit = 13333.333333333334;
  fit.fit_fraction = 0.9;
  fit.rss = 1e-6;
  fit.n_points = 12001;
  const auto j = fit_to_json(fit);
  std::vector<std::string> keys;
  for (const auto& [key, value] : j.items()) keys.push_back(key);
  CHECK(keys == std::vector<std::string>{"A", "alpha", "t_crit", "fit_fraction", "rss", "n_points"});
  const auto back = fit_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.t_crit == fit.t_crit);
  CHECK(back.n_points == fit.n_points);
}

TEST_CASE("config parsing") {
  const auto cfg = KeyValueConfig::parse(
      "# comment\nexperiment = hom_free\n  sim.dt = 0.05   # trailing\nsweep.n = [2, 10, 100]\n\n");
  CHECK(cfg.get_string("experiment", "") == "hom_free");
  CHECK(cfg.get_double("sim.dt", 0) == 0.05);
  CHECK(cfg.get_list("sweep.n", {}) == std::vector<double>{2, 10, 100});
  CHECK(cfg.get_double("missing", 7.0) == 7.0);
  CHECK(cfg.get_field("sim.dt", 3, 0) == std::vector<double>(3, 0.05));
  CHECK_THROWS_AS(cfg.get_field("sweep.n", 2, 0), InvalidArgument);
  CHECK_THROWS_AS(cfg.get_double("sweep.n", 0), InvalidArgument);
  CHECK_THROWS_AS(cfg.get_int("sim.dt", 0), InvalidArgument);
  CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), InvalidArgument);
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), InvalidArgument);
  CHECK_THROWS_AS(KeyValueConfig::parse("x = [1, , 2]\n").get_list("x", {}), InvalidArgument);
  CHECK_THROWS_AS(KeyValueConfig::parse("x = abc\n").get_double("x", 0), InvalidArgument);
  CHECK(KeyValueConfig::parse("b = 2\na = 1\n").canonical() == "a = 1\nb = 2\n");
}

TEST_CASE("default parameters") {
  const auto p = resolve_parameters("hom_free", {});
  CHECK(p.get_double("model.beta", 0) == 0.3);
  CHECK(p.get_double("model.gamma", 0) == 0.4);
  CHECK(p.get_double("model.sigma", 0) == 0.01);
  CHECK(p.get_double("model.eps", 0) == 1e-4);
  CHECK(p.get_double("model.i0", 1) == 0.0);
  CHECK(p.get_string("sim.boundary", "") == "free");
  CHECK(p.get_double("fit.fraction", 0) == 0.8);
  CHECK(ExperimentSpec{}.paths == 100);

  CHECK(log_spaced_integers(2, 100, 12).size() == 12);
  CHECK(resolve_parameters("discrete_n_sweep", {}).get_list("sweep.n", {}).front() == 2);
  CHECK(resolve_parameters("continuous_p_sweep", {}).get_list("sweep.p", {}).size() == 10);
  CHECK(resolve_parameters("nonseparable_mu_sweep", {}).get_list("sweep.mu", {}).size() == 9);

  KeyValueConfig over;
  over.set("sim.dt", "0.2");
  CHECK(resolve_parameters("hom_free", over).get_double("sim.dt", 0) == 0.2);
  over.set("sim.bogus", "1");
  CHECK_THROWS_AS(resolve_parameters("hom_free", over), InvalidArgument);
  CHECK_THROWS_AS(resolve_parameters("nope", {}), InvalidArgument);
  for (const auto& name : experiment_names()) CHECK_NOTHROW(resolve_parameters(name, {}));
}

TEST_CASE("spec from config") {
  const auto spec = ExperimentSpec::from_config(
      KeyValueConfig::parse("experiment = hom_clamped\nseed = 9\npaths = 12\nsim.dt = 0.2\n"));
  CHECK(spec.name == "hom_clamped");
  CHECK(spec.seed == 9);
  CHECK(spec.paths == 12);
  CHECK(spec.params.get_double("sim.dt", 0) == 0.2);
  CHECK_THROWS_AS(ExperimentSpec::from_config(KeyValueConfig::parse("seed = 1\n")), InvalidArgument);
  CHECK_THROWS_AS(ExperimentSpec::from_config(KeyValueConfig::parse("experiment = x\npaths = 0\n")),
                  InvalidArgument);
}

TEST_CASE("run_experiment errors") {
  ExperimentSpec spec;
  spec.name = "not_an_experiment";
  spec.output_dir = scratch("err");
  CHECK_THROWS_AS(run_experiment(spec), InvalidArgument);

  spec.name = "density_plot";
  spec.output_dir = "/proc/hetsis_cannot_write";
  CHECK_THROWS_AS(run_experiment(spec), IoError);

  spec.output_dir = scratch("locked");
  std::ofstream(spec.output_dir / ".hetsis.lock") << "";
  CHECK_THROWS_AS(run_experiment(spec), IoError);
  fs::remove(spec.output_dir / ".hetsis.lock");
  CHECK_NOTHROW(run_experiment(spec));
  CHECK_FALSE(fs::exists(spec.output_dir / ".hetsis.lock"));
}

TEST_CASE("experiment outputs are reproducible and re-derivable") {
  ExperimentSpec spec;
  spec.name = "hom_clamped";
  spec.paths = 16;
  spec.params.set("model.eps", "0.001");
  spec.threads = 1;
  const fs::path dir_a = scratch("det_a");
  spec.output_dir = dir_a;
  const auto a = run_experiment(spec);
  spec.threads = 3;
  spec.output_dir = scratch("det_b");
  const auto b = run_experiment(spec);
  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    CHECK(a.files[i].file == b.files[i].file);
    CHECK(slurp(dir_a / a.files[i].file) == slurp(spec.output_dir / b.files[i].file));
  }
  CHECK(slurp(dir_a / "manifest.json") == slurp(spec.output_dir / "manifest.json"));

  // Refitting the written variance reproduces the written fit.
  const auto table = read_csv(spec.output_dir / "variance.csv");
  const auto stored = fit_from_json(nlohmann::json::parse(slurp(spec.output_dir / "fit.json")));
  const auto refit = fit_power_law(table.column("t").values, table.column("var").values, stored.t_crit,
                                   stored.fit_fraction);
  CHECK(refit.alpha == stored.alpha);
  CHECK(refit.A == stored.A);
}

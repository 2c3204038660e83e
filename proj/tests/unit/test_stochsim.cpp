#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hetsis/errors.hpp"
#include "hetsis/stochsim.hpp"

using namespace hetsis;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

SimConfig base_config(double t_end) {
  SimConfig c;
  c.t_end = t_end;
  c.seed = 42;
  c.n_paths = 20;
  return c;
}

}  // namespace

TEST_CASE("beta_at") {
  const auto sep = Drift::separable_power(1e-4, 1.0, {0.3});
  CHECK(sep.beta_at(1000, 0) == doctest::Approx(0.03).epsilon(1e-14));
  CHECK(sep.beta_at(0, 0) == 0.0);
  const std::vector<double> half{0.5};
  const auto ns = Drift::non_separable(1e-4, half);
  CHECK(ns.beta_at(100, 0) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(ns.beta_at(0, 0) == 0.0);
  CHECK_THROWS_AS(sep.beta_at(-1, 0), InvalidArgument);
  CHECK_THROWS_AS(Drift::separable_power(0.0, 1.0, {0.3}), InvalidArgument);
  CHECK_THROWS_AS(Drift::separable_power(1e-4, 0.0, {0.3}), InvalidArgument);
}

TEST_CASE("fill_beta agrees with beta_at") {
  const auto space = make_quadrature_space(100);
  const auto ns = Drift::non_separable(1e-4, space.nodes());
  std::vector<double> out(100);
  for (double t : {0.0, 0.37, 1.0, 13.5, 2910.2, 7.6e5}) {
    ns.fill_beta(t, out);
    for (std::size_t i = 0; i < 100; ++i) CHECK(std::abs(out[i] - ns.beta_at(t, i)) <= 1e-14 * ns.beta_at(t, i));
  }
}

TEST_CASE("t_crit") {
  const auto s = make_quadrature_space(1);
  const auto fields = ModelFields::homogeneous(1, 0.3, 0.4);
  const double tc = t_crit(Drift::separable_power(1e-4, 1.0, fields.beta), s, fields);
  CHECK(tc == doctest::Approx(0.4 / (0.3 * 1e-4)).epsilon(1e-12));
  CHECK(t_crit(Drift::separable_power(2e-4, 1.0, fields.beta), s, fields) == doctest::Approx(tc / 2).epsilon(1e-12));
  CHECK_THROWS_AS(t_crit(Drift::frozen({0.3}), s, fields), NoCrossing);

  // Dense-grid scan of R0(t) for the non-separable drift.
  const auto space = make_quadrature_space(100);
  auto ns_fields = ModelFields::homogeneous(100, 1.0, 0.4);
  ns_fields.f = truncated_normal_density(space, 0.5, 0.1).f;
  const auto drift = Drift::non_separable(1e-4, space.nodes());
  auto r0_direct = [&](double t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 100; ++i)
      sum += space.weights()[i] * ns_fields.f[i] * 1e-4 * std::pow(t, space.nodes()[i] + 0.5) / 0.4;
    return sum;
  };
  double lo = 0.0, hi = 0.0;
  for (double t = 1.0;; t += 1.0)
    if (r0_direct(t) >= 1.0) {
      lo = t - 1.0;
      hi = t;
      break;
    }
  const double root = t_crit(drift, space, ns_fields);
  CHECK(root > lo);
  CHECK(root <= hi);
  CHECK(std::abs(r0_at(drift, root, space, ns_fields) - 1.0) <= 1e-12);
}

TEST_CASE("zero noise reproduces the Euler scheme") {
  const auto space = make_quadrature_space(3);
  auto fields = ModelFields::homogeneous(3, 0.0, 0.4, 0.0);
  fields.f = {0.5, 1.0, 1.5};
  const auto drift = Drift::separable_power(1e-3, 1.0, {1.0, 2.0, 3.0});
  SimConfig c = base_config(400);
  c.i0 = {0.1, 0.2, 0.3};
  c.record_stride = 1;
  c.boundary = BoundaryMode::Free;
  const auto path = simulate_path(space, fields, drift, c, 0);

  std::vector<double> state = c.i0;
  double max_err = 0.0;
  for (std::size_t k = 0; k < c.steps(); ++k) {
    double j = 0.0;
    for (std::size_t i = 0; i < 3; ++i) j += state[i] / 3.0;
    const double t = static_cast<double>(k) * c.dt;
    for (std::size_t i = 0; i < 3; ++i)
      state[i] += c.dt * (1e-3 * t * (i + 1.0) * j * (fields.f[i] - state[i]) - 0.4 * state[i]);
    const double agg = (state[0] + state[1] + state[2]) / 3.0;
    max_err = std::max(max_err, std::abs(agg - path.aggregate[k + 1]));
  }
  CHECK(max_err <= 1e-13);

  c.i0.clear();
  const auto zero = simulate_ensemble(space, fields, drift, c);
  for (std::size_t k = 0; k < zero.times.size(); ++k) {
    CHECK(zero.mean_path[k] == 0.0);
    CHECK(zero.var_path[k] == 0.0);
  }
}

TEST_CASE("clamped states stay in [0, f]") {
  const auto space = make_quadrature_space(8);
  auto fields = ModelFields::homogeneous(8, 0.3, 0.4, 0.05);
  fields.f = truncated_normal_density(space, 0.3, 0.2).f;
  const auto drift = Drift::separable_power(1e-3, 1.0, fields.beta);
  SimConfig c = base_config(t_crit(drift, space, fields));
  c.noise = NoiseMode::IndependentPerNode;
  c.record_nodes = true;
  c.record_stride = 1;
  for (std::uint64_t p = 0; p < 5; ++p) {
    const auto rec = simulate_path(space, fields, drift, c, p);
    for (std::size_t k = 0; k < c.records(); ++k) {
      for (std::size_t i = 0; i < 8; ++i) {
        const double v = rec.node_states[k * 8 + i];
        CHECK(v >= 0.0);
        CHECK(v <= fields.f[i]);
      }
      CHECK(rec.aggregate[k] >= 0.0);
      CHECK(rec.aggregate[k] <= 1.0);
    }
  }
}

TEST_CASE("free mode paths diverge past the unstable branch") {
  const auto s = make_quadrature_space(1);
  const auto fields = ModelFields::homogeneous(1, 0.3, 0.4, 0.01);
  const auto drift = Drift::separable_power(1e-4, 1.0, fields.beta);
  SimConfig c = base_config(t_crit(drift, s, fields));
  c.boundary = BoundaryMode::Free;
  const auto stats = simulate_ensemble(s, fields, drift, c);
  CHECK(stats.diverged_paths > 0);
  CHECK(stats.counts.back() < c.n_paths);
  for (double v : stats.var_path) CHECK(v >= 0.0);
}

TEST_CASE("ensemble conventions") {
  const auto s = make_quadrature_space(1);
  const auto fields = ModelFields::homogeneous(1, 0.3, 0.4, 0.01);
  const auto drift = Drift::separable_power(1e-4, 1.0, fields.beta);
  SimConfig c = base_config(t_crit(drift, s, fields));

  c.n_paths = 1;
  const auto single = simulate_ensemble(s, fields, drift, c);
  CHECK(single.single_sample);
  for (double v : single.var_path) CHECK(v == 0.0);

  c.n_paths = 100;
  const auto clamped = simulate_ensemble(s, fields, drift, c);
  for (std::size_t k = 0; k < clamped.times.size(); ++k)
    if (clamped.times[k] >= 100.0) CHECK(clamped.mean_path[k] > 0.0);
  CHECK(clamped.times.size() == clamped.var_path.size());
  CHECK(clamped.times.size() == clamped.mean_path.size());
}

TEST_CASE("bit-identical across thread counts") {
  const auto space = make_quadrature_space(10);
  auto fields = ModelFields::homogeneous(10, 0.3, 0.4, 0.01);
  fields.f = truncated_normal_density(space, 0.5, 0.3).f;
  const auto drift = Drift::separable_power(1e-3, 1.0, fields.beta);
  SimConfig c = base_config(t_crit(drift, space, fields));
  c.n_paths = 37;
  c.noise = NoiseMode::IndependentPerNode;
  c.threads = 1;
  const auto serial = simulate_ensemble(space, fields, drift, c);
  c.threads = 4;
  const auto parallel = simulate_ensemble(space, fields, drift, c);
  CHECK(same_bits(serial.mean_path, parallel.mean_path));
  CHECK(same_bits(serial.var_path, parallel.var_path));

  c.seed = 43;
  const auto other = simulate_ensemble(space, fields, drift, c);
  CHECK_FALSE(same_bits(serial.var_path, other.var_path));
}

TEST_CASE("paths depend only on their index") {
  const auto s = make_quadrature_space(1);
  const auto fields = ModelFields::homogeneous(1, 0.3, 0.4, 0.01);
  const auto drift = Drift::separable_power(1e-3, 1.0, fields.beta);
  SimConfig c = base_config(500);
  const auto a = simulate_path(s, fields, drift, c, 7);
  simulate_path(s, fields, drift, c, 3);
  const auto b = simulate_path(s, fields, drift, c, 7);
  CHECK(same_bits(a.aggregate, b.aggregate));
  CHECK(path_seed(1, 0) != path_seed(1, 1));
  CHECK(path_seed(1, 0) != path_seed(2, 0));
}

TEST_CASE("shared noise on homogeneous nodes matches a single node") {
  const auto one = make_quadrature_space(1);
  const auto many = make_quadrature_space(6);
  const auto drift1 = Drift::separable_power(1e-3, 1.0, {0.3});
  const auto drift6 = Drift::separable_power(1e-3, 1.0, std::vector<double>(6, 0.3));
  const auto f1 = ModelFields::homogeneous(1, 0.3, 0.4, 0.01);
  const auto f6 = ModelFields::homogeneous(6, 0.3, 0.4, 0.01);
  SimConfig c = base_config(t_crit(drift1, one, f1));
  const auto a = simulate_path(one, f1, drift1, c, 0);
  const auto b = simulate_path(many, f6, drift6, c, 0);
  double max_diff = 0.0;
  for (std::size_t k = 0; k < a.aggregate.size(); ++k)
    max_diff = std::max(max_diff, std::abs(a.aggregate[k] - b.aggregate[k]));
  CHECK(max_diff <= 1e-12);
}

TEST_CASE("accumulator is location invariant") {
  std::vector<std::vector<double>> paths;
  for (int p = 0; p < 9; ++p) {
    std::vector<double> v(4);
    for (int k = 0; k < 4; ++k) v[k] = std::sin(p * 1.7 + k * 0.3) * 0.01;
    paths.push_back(v);
  }
  EnsembleAccumulator base(4), shifted(4), left(4), right(4);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    base.add_path(paths[p], 4);
    auto moved = paths[p];
    for (double& x : moved) x += 1000.0;
    shifted.add_path(moved, 4);
    (p < 4 ? left : right).add_path(paths[p], 4);
  }
  left.merge(right);
  const std::vector<double> times{0, 1, 2, 3};
  const auto s0 = base.finish(times, 9, 0);
  const auto s1 = shifted.finish(times, 9, 0);
  const auto s2 = left.finish(times, 9, 0);
  for (int k = 0; k < 4; ++k) {
    // Two-pass oracle.
    double mean = 0.0, m2 = 0.0;
    for (const auto& p : paths) mean += p[k] / 9.0;
    for (const auto& p : paths) m2 += (p[k] - mean) * (p[k] - mean);
    CHECK(s0.var_path[k] == doctest::Approx(m2 / 8.0).epsilon(1e-12));
    CHECK(s1.var_path[k] == doctest::Approx(m2 / 8.0).epsilon(1e-6));
    CHECK(s2.var_path[k] == doctest::Approx(m2 / 8.0).epsilon(1e-12));
  }
}

TEST_CASE("accumulator with partial paths") {
  EnsembleAccumulator acc(3);
  acc.add_path(std::vector<double>{1.0, 2.0, 3.0}, 3);
  acc.add_path(std::vector<double>{1.0, 4.0, std::nan("")}, 2);
  const auto stats = acc.finish(std::vector<double>{0, 1, 2}, 2, 1);
  CHECK(stats.counts[2] == 1);
  CHECK(stats.var_path[1] == 2.0);
  CHECK(stats.var_path[2] == 0.0);
  CHECK(stats.single_sample);

  EnsembleAccumulator gone(3);
  gone.add_path(std::vector<double>{1.0, 2.0, 0.0}, 2);
  gone.add_path(std::vector<double>{1.0, 2.0, 0.0}, 2);
  const auto cut = gone.finish(std::vector<double>{0, 1, 2}, 2, 2);
  CHECK(cut.truncated);
  CHECK(cut.times.size() == 2);
}

TEST_CASE("stationary variance is stable under halving dt") {
  const auto s = make_quadrature_space(1);
  const auto fields = ModelFields::homogeneous(1, 0.3, 0.4, 0.01);
  const auto drift = Drift::frozen({0.3});
  auto late_variance = [&](double dt) {
    SimConfig c = base_config(500);
    c.dt = dt;
    c.record_stride = static_cast<std::size_t>(std::lround(1.0 / dt));
    c.n_paths = 1000;
    c.boundary = BoundaryMode::Free;
    const auto stats = simulate_ensemble(s, fields, drift, c);
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < stats.times.size(); ++k)
      if (stats.times[k] >= 100.0) {
        sum += stats.var_path[k];
        ++n;
      }
    return sum / n;
  };
  const double v1 = late_variance(0.1);
  const double v2 = late_variance(0.05);
  // Monte Carlo error of a time-averaged variance over 1000 paths is a
  // few percent; the dt effect of Euler here is about dt*kappa/2 = 0.5%.
  CHECK(std::abs(v1 - v2) / v2 < 0.05);
  CHECK(std::abs(v1 - 5e-4) / 5e-4 < 0.1);
}

TEST_CASE("config validation") {
  const auto s = make_quadrature_space(2);
  const auto fields = ModelFields::homogeneous(2, 0.3, 0.4, 0.01);
  SimConfig c = base_config(10);
  CHECK_NOTHROW(c.validate(s, fields));
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(s, fields), InvalidArgument);
  c = base_config(10);
  c.n_paths = 0;
  CHECK_THROWS_AS(c.validate(s, fields), InvalidArgument);
  c = base_config(10);
  c.record_stride = 0;
  CHECK_THROWS_AS(c.validate(s, fields), InvalidArgument);
  c = base_config(10);
  c.i0 = {0.5, 1.5};
  CHECK_THROWS_AS(c.validate(s, fields), InvalidArgument);
}

#include "hetsis/detdyn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hetsis/errors.hpp"

namespace hetsis {

namespace {

// Bisection for a function that is positive at lo and negative at hi. Runs
// until the bracket cannot shrink any further in double precision.
template <typename Fn>
double bisect_sign_change(Fn&& fn, double lo, double hi) {
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (fn(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::abs(fn(lo)) <= std::abs(fn(hi)) ? lo : hi;
}

double aggregate(const HeterogeneitySpace& space, const ModelFields& fields,
                 std::span<const double> infected) {
  double j = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i)
    j += space.weights()[i] * fields.q[i] * infected[i];
  return j;
}

}  // namespace

bool has_import(const HeterogeneitySpace& space, const ModelFields& fields) {
  for (std::size_t i = 0; i < space.size(); ++i)
    if (space.weights()[i] * fields.eta[i] * fields.f[i] > 0.0) return true;
  return false;
}

double r0(const HeterogeneitySpace& space, const ModelFields& fields) {
  fields.validate(space, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (!(fields.gamma[i] > 0.0)) throw InvalidArgument("r0: gamma vanishes at a node");
    sum += space.weights()[i] * fields.q[i] * fields.f[i] * fields.beta[i] / fields.gamma[i];
  }
  return sum;
}

double g_eval(double x, const HeterogeneitySpace& space, const ModelFields& fields) {
  double sum = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double inflow = fields.beta[i] * x + fields.eta[i];
    sum += space.weights()[i] * fields.q[i] * fields.f[i] * inflow / (inflow + fields.gamma[i]);
  }
  return sum - x;
}

std::vector<double> steady_profile(double j, const ModelFields& fields) {
  std::vector<double> profile(fields.size());
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const double inflow = fields.beta[i] * j + fields.eta[i];
    profile[i] = fields.f[i] * inflow / (inflow + fields.gamma[i]);
  }
  return profile;
}

std::vector<SteadyState> solve_steady_states(const HeterogeneitySpace& space,
                                             const ModelFields& fields) {
  fields.validate(space);
  auto g = [&](double x) { return g_eval(x, space, fields); };
  auto make_state = [&](double j, bool stable) {
    return SteadyState{j, steady_profile(j, fields), stable};
  };

  if (has_import(space, fields)) {
    if (!(g(0.0) > 0.0) || !(g(1.0) < 0.0))
      throw NumericalFailure("solve_steady_states: root not bracketed on [0,1]");
    return {make_state(bisect_sign_change(g, 0.0, 1.0), true)};
  }

  if (r0(space, fields) <= 1.0) return {make_state(0.0, true)};

  // g is concave with g(0) = 0 and g'(0) = R0 - 1 > 0, so g is positive just
  // right of zero. Shrink the seed until that shows numerically.
  double lo = 1e-8;
  while (!(g(lo) > 0.0) && lo > 1e-300) lo *= 1e-2;
  if (!(g(lo) > 0.0) || !(g(1.0) < 0.0))
    throw NumericalFailure("solve_steady_states: endemic root not bracketed");
  return {make_state(0.0, false), make_state(bisect_sign_change(g, lo, 1.0), true)};
}

double leading_eigenvalue(const HeterogeneitySpace& space, const ModelFields& fields) {
  fields.validate(space);
  const std::size_t n = space.size();
  std::vector<double> weight(n);
  double total = 0.0;
  double pole = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    weight[i] = space.weights()[i] * fields.q[i] * fields.f[i] * fields.beta[i];
    total += weight[i];
    if (weight[i] > 0.0) pole = std::min(pole, fields.gamma[i]);
  }
  if (!(total > 0.0)) throw DegenerateInput("leading_eigenvalue: <q f beta> vanishes");

  auto excess = [&](double lambda) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (weight[i] > 0.0) sum += weight[i] / (fields.gamma[i] + lambda);
    return sum - 1.0;
  };
  // The sum decreases from +inf at -pole to 0 at +inf.
  double hi = std::max(1.0, total);
  double offset = std::max(1.0, pole);
  while (!(excess(-pole + offset) > 0.0) && offset > 1e-300) offset *= 0.5;
  const double lo = -pole + offset;
  if (!(excess(lo) > 0.0) || !(excess(hi) < 0.0))
    throw NumericalFailure("leading_eigenvalue: root not bracketed");
  return bisect_sign_change(excess, lo, hi);
}

Trajectory integrate_deterministic(const HeterogeneitySpace& space, const ModelFields& fields,
                                   std::span<const double> i0, double t_end, double dt,
                                   std::size_t record_stride) {
  fields.validate(space);
  const std::size_t n = space.size();
  if (i0.size() != n) throw InvalidArgument("integrate_deterministic: i0 has wrong length");
  for (std::size_t i = 0; i < n; ++i)
    if (!(i0[i] >= 0.0 && i0[i] <= fields.f[i]))
      throw InvalidArgument("integrate_deterministic: i0 must lie in [0, f]");
  if (!(dt > 0.0) || !(t_end > 0.0) || !std::isfinite(t_end))
    throw InvalidArgument("integrate_deterministic: dt and t_end must be positive");
  if (record_stride == 0) throw InvalidArgument("integrate_deterministic: stride must be >= 1");

  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  const double h = t_end / static_cast<double>(steps);

  auto rhs = [&](std::span<const double> state, std::span<double> out) {
    const double j = aggregate(space, fields, state);
    for (std::size_t i = 0; i < n; ++i) {
      const double inflow = fields.beta[i] * j + fields.eta[i];
      out[i] = inflow * fields.f[i] - (inflow + fields.gamma[i]) * state[i];
    }
  };

  Trajectory traj;
  std::vector<double> state(i0.begin(), i0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.i_of_t.push_back(state);
    traj.j_of_t.push_back(aggregate(space, fields, state));
  };
  record(0.0);
  for (std::size_t step = 1; step <= steps; ++step) {
    rhs(state, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k1[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * h * k2[i];
    rhs(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + h * k3[i];
    rhs(tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (step % record_stride == 0 || step == steps)
      record(step == steps ? t_end : static_cast<double>(step) * h);
  }
  return traj;
}

ConvergenceReport convergence_diagnostics(const Trajectory& trajectory) {
  constexpr double kJitter = 1e-10;
  ConvergenceReport report;
  const auto& j = trajectory.j_of_t;
  const auto& t = trajectory.times;
  if (j.size() < 3 || j.size() != t.size()) return report;

  report.limit = j.back();
  const double t0 = t.front();
  const double t_end = t.back();
  const auto mid = static_cast<std::size_t>(
      std::lower_bound(t.begin(), t.end(), 0.5 * (t0 + t_end)) - t.begin());
  if (std::abs(j.back() - j[std::min(mid, j.size() - 1)]) >= 0.01) return report;

  // Walk backwards from the end until the finite differences change sign.
  int tail = 0;
  std::size_t onset = 0;
  for (std::size_t k = j.size() - 1; k-- > 0;) {
    const double d = j[k + 1] - j[k];
    const int sign = std::abs(d) <= kJitter ? 0 : (d > 0.0 ? 1 : -1);
    if (sign == 0) continue;
    if (tail == 0) {
      tail = sign;
    } else if (sign != tail) {
      onset = k + 1;
      break;
    }
  }
  report.status = ConvergenceStatus::Converged;
  report.direction = tail;
  report.onset_time = t[onset];
  report.monotone = report.onset_time <= t0 + 0.5 * (t_end - t0);
  return report;
}

}  // namespace hetsis

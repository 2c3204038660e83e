#include "hetsis/warnsign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hetsis/errors.hpp"

namespace hetsis {

namespace {

struct Window {
  std::vector<double> log_gap;  // log(t_crit - t_k)
  std::vector<double> var;
};

Window select_window(std::span<const double> times, std::span<const double> var, double t_crit,
                     double fit_fraction) {
  if (times.size() != var.size()) throw InvalidArgument("fit: times and variances differ in length");
  if (!(t_crit > 0.0) || !std::isfinite(t_crit)) throw InvalidArgument("fit: t_crit must be > 0");
  if (!(fit_fraction > 0.0 && fit_fraction < 1.0))
    throw InvalidArgument("fit: fit fraction must lie in (0,1)");
  const double edge = fit_fraction * t_crit;
  Window w;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0 && !(times[k] > times[k - 1])) throw InvalidArgument("fit: times must increase");
    if (times[k] < 0.0 || times[k] > edge) continue;
    if (!std::isfinite(var[k]) || var[k] < 0.0)
      throw InvalidArgument("fit: variances must be finite and >= 0");
    w.log_gap.push_back(std::log(t_crit - times[k]));
    w.var.push_back(var[k]);
  }
  if (w.var.size() < 10) throw InsufficientData("fit: fewer than 10 points in the fit window");
  return w;
}

struct Evaluation {
  double A;
  double rss;
};

Evaluation evaluate(const Window& w, double alpha) {
  double vw = 0.0, ww = 0.0;
  for (std::size_t k = 0; k < w.var.size(); ++k) {
    const double weight = std::exp(-alpha * w.log_gap[k]);
    vw += w.var[k] * weight;
    ww += weight * weight;
  }
  const double A = std::max(0.0, vw / ww);
  double rss = 0.0;
  for (std::size_t k = 0; k < w.var.size(); ++k) {
    const double r = w.var[k] - A * std::exp(-alpha * w.log_gap[k]);
    rss += r * r;
  }
  return {A, rss};
}

FitResult make_result(const Window& w, double alpha, double t_crit, double fit_fraction) {
  const Evaluation e = evaluate(w, alpha);
  return {e.A, alpha, t_crit, fit_fraction, e.rss, w.var.size(), false};
}

}  // namespace

FitResult fit_power_law(std::span<const double> times, std::span<const double> var, double t_crit,
                        double fit_fraction) {
  const Window w = select_window(times, var, t_crit, fit_fraction);
  if (std::all_of(w.var.begin(), w.var.end(), [](double v) { return v == 0.0; })) {
    return {0.0, std::numeric_limits<double>::quiet_NaN(), t_crit, fit_fraction, 0.0,
            w.var.size(), true};
  }

  // Coarse scan, then golden-section refinement around the best grid point.
  constexpr double kStep = 0.05;
  constexpr int kGrid = 60;
  int best = 0;
  double best_rss = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= kGrid; ++g) {
    const double rss = evaluate(w, g * kStep).rss;
    if (rss < best_rss) {
      best_rss = rss;
      best = g;
    }
  }
  double lo = std::max(0.0, (best - 1) * kStep);
  double hi = std::min(kAlphaMax, (best + 1) * kStep);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = evaluate(w, a).rss, fb = evaluate(w, b).rss;
  while (hi - lo > 1e-9) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = evaluate(w, a).rss;
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = evaluate(w, b).rss;
    }
  }
  double alpha = 0.5 * (lo + hi);
  if (evaluate(w, best * kStep).rss < evaluate(w, alpha).rss) alpha = best * kStep;
  return make_result(w, alpha, t_crit, fit_fraction);
}

FitResult fit_amplitude(std::span<const double> times, std::span<const double> var, double t_crit,
                        double fit_fraction, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("fit: alpha must be >= 0");
  return make_result(select_window(times, var, t_crit, fit_fraction), alpha, t_crit, fit_fraction);
}

std::vector<double> theoretical_reference(std::span<const double> times, double t_crit, double A,
                                          double alpha) {
  std::vector<double> curve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] < t_crit)) throw InvalidArgument("theoretical_reference: t must be < t_crit");
    curve[k] = A / std::pow(t_crit - times[k], alpha);
  }
  return curve;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = shared;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

// Fits that differ only by rounding should tie in the rank statistics, so
// values are compared at a resolution well above the fitter's tolerance.
double to_significant(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
  return std::round(x * scale) / scale;
}

}  // namespace

SweepSummary sweep_summary(std::vector<std::pair<double, FitResult>> results) {
  if (results.empty()) throw InvalidArgument("sweep_summary: empty sweep");
  std::stable_sort(results.begin(), results.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  SweepSummary summary;
  std::vector<double> params, alphas, amps;
  for (const auto& [param, fit] : results) {
    summary.rows.push_back({param, fit.A, fit.alpha});
    if (fit.degenerate || !std::isfinite(fit.alpha)) continue;
    params.push_back(param);
    alphas.push_back(std::round(fit.alpha * 1e6) / 1e6);
    amps.push_back(to_significant(fit.A, 6));
  }
  summary.rho_alpha = spearman(params, alphas);
  summary.rho_A = spearman(params, amps);
  return summary;
}

}  // namespace hetsis

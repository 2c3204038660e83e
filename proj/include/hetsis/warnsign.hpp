#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace hetsis {

/// Least-squares fit of A/(t_crit - t)^alpha to a variance series.
struct FitResult {
  double A = 0.0;
  double alpha = 0.0;  // NaN when the fit is degenerate
  double t_crit = 0.0;
  double fit_fraction = 0.0;
  double rss = 0.0;
  std::size_t n_points = 0;
  bool degenerate = false;  // all variances in the window were zero
};

inline constexpr double kAlphaMax = 3.0;

/// Fits over the points with t <= fit_fraction * t_crit. Throws
/// InsufficientData with fewer than ten such points.
FitResult fit_power_law(std::span<const double> times, std::span<const double> var, double t_crit,
                        double fit_fraction);

/// Best amplitude for a fixed exponent on the same window, e.g. to draw the
/// alpha = 1 reference curve next to the fitted one.
FitResult fit_amplitude(std::span<const double> times, std::span<const double> var, double t_crit,
                        double fit_fraction, double alpha);

std::vector<double> theoretical_reference(std::span<const double> times, double t_crit, double A,
                                          double alpha);

/// Spearman rank correlation, ties sharing their average rank. Zero when
/// either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct SweepRow {
  double param = 0.0;
  double A = 0.0;
  double alpha = 0.0;
};

struct SweepSummary {
  std::vector<SweepRow> rows;  // sorted by param
  double rho_alpha = 0.0;      // Spearman of alpha against param
  double rho_A = 0.0;
};

SweepSummary sweep_summary(std::vector<std::pair<double, FitResult>> results);

}  // namespace hetsis

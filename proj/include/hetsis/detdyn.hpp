#pragma once

#include <span>
#include <vector>

#include "hetsis/hetspace.hpp"

namespace hetsis {

/// An equilibrium of the deterministic heterogeneous SIS system.
struct SteadyState {
  double j_hat = 0.0;          // aggregate infected <q I>
  std::vector<double> i_hat;   // per-node infected density
  bool stable = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> i_of_t;  // one node vector per recorded time
  std::vector<double> j_of_t;
};

/// True when eta * f is positive on a node of positive weight.
bool has_import(const HeterogeneitySpace& space, const ModelFields& fields);

/// Basic reproduction number <q f beta/gamma>.
double r0(const HeterogeneitySpace& space, const ModelFields& fields);

/// Fixed-point residual whose roots in [0,1] are the steady-state values of J.
double g_eval(double x, const HeterogeneitySpace& space, const ModelFields& fields);

/// Per-node equilibrium density for a given aggregate J.
std::vector<double> steady_profile(double j, const ModelFields& fields);

/// All steady states, classified by the threshold trichotomy: a unique stable
/// state when there is import; otherwise the disease-free state, plus an
/// endemic one (which takes over stability) when R0 > 1.
std::vector<SteadyState> solve_steady_states(const HeterogeneitySpace& space,
                                             const ModelFields& fields);

/// Root lambda > -min gamma of <q f beta/(gamma + lambda)> = 1, i.e. the
/// growth rate of the system linearized at I = 0. Import is ignored.
double leading_eigenvalue(const HeterogeneitySpace& space, const ModelFields& fields);

/// Fixed-step RK4 integration of the deterministic system. Every
/// `record_stride`-th step is stored; the final time is always stored.
Trajectory integrate_deterministic(const HeterogeneitySpace& space, const ModelFields& fields,
                                   std::span<const double> i0, double t_end, double dt,
                                   std::size_t record_stride = 1);

enum class ConvergenceStatus { Converged, Inconclusive };

struct ConvergenceReport {
  ConvergenceStatus status = ConvergenceStatus::Inconclusive;
  double limit = 0.0;        // estimate of lim J(t)
  double onset_time = 0.0;   // J is monotone on [onset_time, t_end]
  bool monotone = false;     // onset lies in the first half of the trajectory
  int direction = 0;         // +1 increasing, -1 decreasing, 0 constant tail
};

ConvergenceReport convergence_diagnostics(const Trajectory& trajectory);

}  // namespace hetsis

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hetsis/hetspace.hpp"

namespace hetsis {

/// Slow time dependence of the transmission rate beta(t, w).
///
///   SeparablePower: beta(t, w_i) = rate * t^exponent * shape_i
///   NonSeparable:   beta(t, w_i) = rate * t^(w_i + 0.5)
///   Frozen:         beta(t, w_i) = shape_i (no drift; used for stationary checks)
class Drift {
 public:
  enum class Kind { SeparablePower, NonSeparable, Frozen };

  static Drift separable_power(double rate, double exponent, std::vector<double> beta_shape);
  static Drift non_separable(double rate, std::span<const double> nodes);
  static Drift frozen(std::vector<double> beta);

  Kind kind() const { return kind_; }
  double rate() const { return rate_; }
  double exponent() const { return exponent_; }
  std::size_t size() const { return per_node_.size(); }

  double beta_at(double t, std::size_t i) const;
  /// All nodes at once. Agrees with beta_at to within a few ulps.
  void fill_beta(double t, std::span<double> out) const;

 private:
  Drift(Kind kind, double rate, double exponent, std::vector<double> per_node);

  Kind kind_;
  double rate_;
  double exponent_;
  // beta shape for SeparablePower/Frozen, node exponent w_i + 0.5 for NonSeparable.
  std::vector<double> per_node_;
  double uniform_step_ = 0.0;  // spacing of equally spaced NonSeparable exponents, else 0
  static constexpr std::size_t kBlock = 16;
};

/// R0(t) = <q f beta(t,.)/gamma>.
double r0_at(const Drift& drift, double t, const HeterogeneitySpace& space,
             const ModelFields& fields);

/// Time at which R0(t) reaches one. Throws NoCrossing if it never does.
double t_crit(const Drift& drift, const HeterogeneitySpace& space, const ModelFields& fields);

enum class NoiseMode { SharedAcrossNodes, IndependentPerNode };
enum class BoundaryMode { Clamped, Free };

struct SimConfig {
  double dt = 0.1;
  std::size_t record_stride = 10;
  std::size_t n_paths = 100;
  std::uint64_t seed = 0;
  NoiseMode noise = NoiseMode::SharedAcrossNodes;
  BoundaryMode boundary = BoundaryMode::Clamped;
  std::vector<double> i0;  // empty means I(0) = 0 at every node
  double t_end = 0.0;
  unsigned threads = 0;    // 0: use hardware concurrency
  // A Free-mode path is flagged diverged once the aggregate leaves
  // [-bound, bound] or stops being finite.
  double divergence_bound = 1e3;
  bool record_nodes = false;

  void validate(const HeterogeneitySpace& space, const ModelFields& fields) const;
  std::size_t steps() const;
  std::size_t records() const;
};

std::vector<double> record_times(const SimConfig& config);

struct PathRecord {
  std::vector<double> aggregate;  // sum_i mu_i I(t, w_i) at each recorded time
  std::size_t valid = 0;          // leading entries of `aggregate` that are meaningful
  bool diverged = false;
  std::vector<double> node_states;  // records() x size(), only with record_nodes
};

/// One Euler-Maruyama sample path. Deterministic in (config.seed, path_index).
PathRecord simulate_path(const HeterogeneitySpace& space, const ModelFields& fields,
                         const Drift& drift, const SimConfig& config, std::uint64_t path_index);

/// Seed of the per-path random stream.
std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index);

struct EnsembleStats {
  std::vector<double> times;
  std::vector<double> mean_path;
  std::vector<double> var_path;
  std::vector<std::size_t> counts;  // paths contributing at each time
  std::size_t n_paths = 0;
  std::size_t diverged_paths = 0;
  bool single_sample = false;  // some time had a single contributor; its variance is 0
  bool truncated = false;      // series cut where no path was left
};

/// One-pass mean/variance accumulator over paths, per recorded time.
class EnsembleAccumulator {
 public:
  explicit EnsembleAccumulator(std::size_t n_records);

  void add_path(std::span<const double> values, std::size_t valid);
  /// Pairwise combination; the result depends on merge order, so callers
  /// fix the order to get reproducible bits.
  void merge(const EnsembleAccumulator& other);

  EnsembleStats finish(std::span<const double> times, std::size_t n_paths,
                       std::size_t diverged_paths) const;

 private:
  std::vector<std::size_t> count_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Runs config.n_paths paths in fixed blocks and merges them in path order,
/// so the result is bit-identical for any thread count.
EnsembleStats simulate_ensemble(const HeterogeneitySpace& space, const ModelFields& fields,
                                const Drift& drift, const SimConfig& config);

}  // namespace hetsis

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hetsis {

enum class SpaceKind { DiscreteCounting, ContinuousQuadrature };

/// Weighted point masses on [0,1] standing in for the measure space of
/// h-states. Weights sum to one; nodes are strictly increasing.
class HeterogeneitySpace {
 public:
  HeterogeneitySpace(std::vector<double> nodes, std::vector<double> weights, SpaceKind kind);

  std::size_t size() const { return nodes_.size(); }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }
  SpaceKind kind() const { return kind_; }

  /// Sum of weight * value over all nodes.
  double integrate(std::span<const double> values) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
  SpaceKind kind_;
};

/// Nodes i/(n-1), i = 0..n-1, each with weight 1/n.
HeterogeneitySpace make_discrete_space(int n);

/// Midpoint rule on [0,1]: nodes (i+0.5)/m, weights 1/m.
HeterogeneitySpace make_quadrature_space(int m);

/// Per-node parameter values of the heterogeneous SIS model.
struct ModelFields {
  std::vector<double> beta;   // transmission rate
  std::vector<double> gamma;  // recovery rate
  std::vector<double> q;      // risky-interaction intensity
  std::vector<double> eta;    // import rate
  std::vector<double> sigma;  // additive noise level
  std::vector<double> f;      // population density

  /// Constant fields over `size` nodes with q = f = 1.
  static ModelFields homogeneous(std::size_t size, double beta, double gamma, double sigma = 0.0,
                                 double eta = 0.0);

  std::size_t size() const { return beta.size(); }

  /// Throws InvalidArgument unless every field matches the space size, is
  /// finite and nonnegative, beta and gamma are at least `floor`, and the
  /// normalizations <f> = 1 and <q f> = 1 hold to 1e-10.
  void validate(const HeterogeneitySpace& space, double floor = 1e-12) const;

  /// Same as validate but skips the beta floor, for fields whose
  /// transmission rate is supplied by a time-dependent drift.
  void validate_without_beta(const HeterogeneitySpace& space, double floor = 1e-12) const;
};

struct DensityParams {
  double mean = 0.5;
  double theta = 0.75;
  std::optional<double> p;

  static DensityParams from_p(double p, double mean = 0.5);
  void validate() const;
};

/// theta = 1/(2p-2)^2 - 1/4 for p in (0,1).
double theta_of_p(double p);

struct TruncatedNormal {
  std::vector<double> f;
  /// Sum over nodes of weight * phi((w - mean)/theta)/theta.
  double normalization = 0.0;
};

/// Normal density with the given mean and standard deviation restricted to
/// the space and rescaled so that <f> = 1.
TruncatedNormal truncated_normal_density(const HeterogeneitySpace& space, double mean, double theta);

/// Rescales q so that <q f> = 1.
std::vector<double> normalize_q(const HeterogeneitySpace& space, std::span<const double> q_raw,
                                std::span<const double> f);

}  // namespace hetsis

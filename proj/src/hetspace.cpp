#include "hetsis/hetspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hetsis/errors.hpp"

namespace hetsis {

HeterogeneitySpace::HeterogeneitySpace(std::vector<double> nodes, std::vector<double> weights,
                                       SpaceKind kind)
    : nodes_(std::move(nodes)), weights_(std::move(weights)), kind_(kind) {
  if (nodes_.empty()) throw InvalidArgument("heterogeneity space needs at least one node");
  if (nodes_.size() != weights_.size())
    throw InvalidArgument("heterogeneity space: node and weight counts differ");
  double total = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!(nodes_[i] >= 0.0 && nodes_[i] <= 1.0))
      throw InvalidArgument("heterogeneity space: node outside [0,1]");
    if (i > 0 && !(nodes_[i] > nodes_[i - 1]))
      throw InvalidArgument("heterogeneity space: nodes must be strictly increasing");
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
      throw InvalidArgument("heterogeneity space: weights must be positive");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidArgument("heterogeneity space: weights must sum to one");
}

double HeterogeneitySpace::integrate(std::span<const double> values) const {
  if (values.size() != size()) throw InvalidArgument("integrate: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < size(); ++i) sum += weights_[i] * values[i];
  return sum;
}

HeterogeneitySpace make_discrete_space(int n) {
  if (n < 2) throw InvalidArgument("make_discrete_space: n must be at least 2");
  std::vector<double> nodes(n), weights(n, 1.0 / n);
  for (int i = 0; i < n; ++i) nodes[i] = static_cast<double>(i) / (n - 1);
  nodes.back() = 1.0;
  return {std::move(nodes), std::move(weights), SpaceKind::DiscreteCounting};
}

HeterogeneitySpace make_quadrature_space(int m) {
  if (m < 1) throw InvalidArgument("make_quadrature_space: m must be at least 1");
  std::vector<double> nodes(m), weights(m, 1.0 / m);
  for (int i = 0; i < m; ++i) nodes[i] = (i + 0.5) / m;
  return {std::move(nodes), std::move(weights), SpaceKind::ContinuousQuadrature};
}

ModelFields ModelFields::homogeneous(std::size_t size, double beta, double gamma, double sigma,
                                     double eta) {
  ModelFields fields;
  fields.beta.assign(size, beta);
  fields.gamma.assign(size, gamma);
  fields.q.assign(size, 1.0);
  fields.eta.assign(size, eta);
  fields.sigma.assign(size, sigma);
  fields.f.assign(size, 1.0);
  return fields;
}

namespace {

void check_field(const std::vector<double>& v, std::size_t n, const char* name) {
  if (v.size() != n)
    throw InvalidArgument(std::string("model fields: '") + name + "' has wrong length");
  for (double x : v)
    if (!std::isfinite(x) || x < 0.0)
      throw InvalidArgument(std::string("model fields: '") + name + "' must be finite and >= 0");
}

void validate_common(const ModelFields& fields, const HeterogeneitySpace& space, double floor,
                     bool check_beta) {
  const std::size_t n = space.size();
  check_field(fields.beta, n, "beta");
  check_field(fields.gamma, n, "gamma");
  check_field(fields.q, n, "q");
  check_field(fields.eta, n, "eta");
  check_field(fields.sigma, n, "sigma");
  check_field(fields.f, n, "f");
  for (std::size_t i = 0; i < n; ++i) {
    if (fields.gamma[i] < floor) throw InvalidArgument("model fields: gamma below positivity floor");
    if (check_beta && fields.beta[i] < floor)
      throw InvalidArgument("model fields: beta below positivity floor");
  }
  if (std::abs(space.integrate(fields.f) - 1.0) > 1e-10)
    throw InvalidArgument("model fields: density f must integrate to one");
  double qf = 0.0;
  for (std::size_t i = 0; i < n; ++i) qf += space.weights()[i] * fields.q[i] * fields.f[i];
  if (std::abs(qf - 1.0) > 1e-10)
    throw InvalidArgument("model fields: q f must integrate to one");
}

}  // namespace

void ModelFields::validate(const HeterogeneitySpace& space, double floor) const {
  validate_common(*this, space, floor, true);
}

void ModelFields::validate_without_beta(const HeterogeneitySpace& space, double floor) const {
  validate_common(*this, space, floor, false);
}

double theta_of_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("theta_of_p: p must lie in (0,1)");
  const double d = 2.0 * p - 2.0;
  return 1.0 / (d * d) - 0.25;
}

DensityParams DensityParams::from_p(double p, double mean) {
  DensityParams params{mean, theta_of_p(p), p};
  params.validate();
  return params;
}

void DensityParams::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidArgument("density: theta must be > 0");
  if (!(mean >= 0.0 && mean <= 1.0)) throw InvalidArgument("density: mean must lie in [0,1]");
  if (p && std::abs(theta_of_p(*p) - theta) > 1e-12 * std::max(1.0, theta))
    throw InvalidArgument("density: theta inconsistent with p");
}

TruncatedNormal truncated_normal_density(const HeterogeneitySpace& space, double mean,
                                         double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta))
    throw InvalidArgument("truncated_normal_density: theta must be > 0");
  const std::size_t n = space.size();
  std::vector<double> exponent(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (space.nodes()[i] - mean) / theta;
    exponent[i] = -0.5 * z * z;
  }
  // Shift by the largest exponent so narrow densities do not underflow.
  const double top = *std::max_element(exponent.begin(), exponent.end());
  TruncatedNormal out;
  out.f.resize(n);
  double shifted_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.f[i] = std::exp(exponent[i] - top);
    shifted_sum += space.weights()[i] * out.f[i];
  }
  for (double& v : out.f) v /= shifted_sum;
  out.normalization =
      std::exp(top) * shifted_sum / (std::sqrt(2.0 * std::numbers::pi) * theta);
  return out;
}

std::vector<double> normalize_q(const HeterogeneitySpace& space, std::span<const double> q_raw,
                                std::span<const double> f) {
  if (q_raw.size() != space.size() || f.size() != space.size())
    throw InvalidArgument("normalize_q: size mismatch");
  double scale = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (!(q_raw[i] > 0.0)) throw InvalidArgument("normalize_q: q must be positive at every node");
    scale += space.weights()[i] * q_raw[i] * f[i];
  }
  if (!(scale > 0.0)) throw DegenerateInput("normalize_q: <q f> vanishes");
  std::vector<double> q(q_raw.begin(), q_raw.end());
  for (double& v : q) v /= scale;
  return q;
}

}  // namespace hetsis

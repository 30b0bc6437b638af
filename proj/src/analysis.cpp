#include "entroshape/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "entroshape/error.hpp"
#include "entroshape/kernel.hpp"
#include "entroshape/losses.hpp"

namespace entroshape {

TaskPartition::TaskPartition(std::vector<Task> labels) : labels_(std::move(labels)) {
  count_a_ = static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), Task::A));
  if (count_a_ == 0 || count_a_ == labels_.size())
    throw InputError("task partition needs at least one sample in each group");
}

double renyi_entropy_estimate(const ErrorSet& errors, double sigma, const EvalOptions& options) {
  return tmee_loss(errors, sigma, options);
}

TaylorExpansion taylor_potential(const ErrorSet& errors, double sigma, int order) {
  if (order < 1 || order > 6) throw ConfigError("Taylor order must lie in [1, 6]");
  require_bandwidth(sigma);
  errors.require_nonempty_finite();
  const std::size_t n = errors.size();
  const PairwiseDistances dist(errors);

  // power_sums[k] = sum_{t,s} |e_t - e_s|^{2k}, both orderings counted.
  std::vector<double> power_sums(static_cast<std::size_t>(order) + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d2 = dist(i, j);
      double p = 1.0;
      for (int k = 1; k <= order; ++k) {
        p *= d2;
        power_sums[static_cast<std::size_t>(k)] += 2.0 * p;
      }
    }
  }

  TaylorExpansion out;
  const double nd = static_cast<double>(n);
  out.terms.push_back(nd * nd);
  double coeff = 1.0;  // (-1)^k / (k! 2^k sigma^2k)
  for (int k = 1; k <= order; ++k) {
    coeff *= -1.0 / (static_cast<double>(k) * 2.0 * sigma * sigma);
    out.terms.push_back(coeff * power_sums[static_cast<std::size_t>(k)]);
  }
  for (double t : out.terms) out.approx_potential += t;
  return out;
}

IdentityCheck msr_identity_check(const ErrorSet& errors) {
  errors.require_nonempty_finite();
  const std::size_t n = errors.size();
  const std::size_t dim = errors.dim();
  const PairwiseDistances dist(errors);
  IdentityCheck out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.lhs += 2.0 * dist(i, j);

  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += errors.sample(i)[d];
  for (double& m : mean) m /= static_cast<double>(n);
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) {
      const double c = errors.sample(i)[d] - mean[d];
      spread += c * c;
    }
  out.rhs = 2.0 * static_cast<double>(n) * spread;
  const double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
  out.residual = scale > 0.0 ? std::abs(out.lhs - out.rhs) / scale : 0.0;
  return out;
}

CouplingReport coupling_ratio(const ErrorSet& errors, const TaskPartition& partition,
                              double sigma, const EvalOptions& options) {
  if (partition.size() != errors.size())
    throw InputError("task partition does not cover every error sample");
  const KernelMatrix k = pairwise_kernel(errors, sigma, options);
  const auto& labels = partition.labels();
  const std::size_t n = errors.size();

  double sum_aa = 0.0, sum_ab = 0.0, sum_bb = 0.0, z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = k.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      z += row[j];
      if (labels[i] == Task::A && labels[j] == Task::A)
        sum_aa += row[j];
      else if (labels[i] == Task::B && labels[j] == Task::B)
        sum_bb += row[j];
      else if (labels[i] == Task::A)
        sum_ab += row[j];
    }
  }
  const double na = static_cast<double>(partition.count_a());
  const double nb = static_cast<double>(partition.count_b());
  CouplingReport out;
  out.k_bar_aa = sum_aa / (na * na);
  out.k_bar_ab = sum_ab / (na * nb);
  out.k_bar_bb = sum_bb / (nb * nb);
  out.coupling_ratio = 2.0 * (na / nb) * (out.k_bar_ab / out.k_bar_bb);
  out.total_potential = z;
  const double rebuilt =
      na * na * out.k_bar_aa + 2.0 * na * nb * out.k_bar_ab + nb * nb * out.k_bar_bb;
  out.decomposition_residual = std::abs(rebuilt - z) / z;
  return out;
}

PcaProjection pca_project(const ErrorSet& errors, std::size_t components) {
  errors.require_nonempty_finite();
  const std::size_t n = errors.size();
  const std::size_t dim = errors.dim();
  if (n < 2) throw InputError("PCA needs at least two samples");
  if (components == 0 || components > dim)
    throw ConfigError("PCA components must lie in [1, D]");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      errors.values().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw InputError("covariance eigendecomposition failed");
  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd values = solver.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double total = values.sum();

  PcaProjection out;
  out.components = components;
  out.axes.resize(components * dim);
  for (std::size_t c = 0; c < components; ++c) {
    auto v = vectors.col(static_cast<Eigen::Index>(c));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    for (std::size_t d = 0; d < dim; ++d) out.axes[c * dim + d] = v(static_cast<Eigen::Index>(d));
    out.explained_fraction.push_back(total > 0.0 ? values(static_cast<Eigen::Index>(c)) / total
                                                 : 0.0);
  }
  const Eigen::MatrixXd proj = centred * vectors.leftCols(static_cast<Eigen::Index>(components));
  out.coordinates.resize(n * components);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < components; ++c)
      out.coordinates[i * components + c] =
          proj(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  return out;
}

std::vector<EntropyPoint> entropy_curve(const std::vector<Snapshot>& history, double sigma,
                                        const EvalOptions& options) {
  if (history.empty()) throw InputError("entropy curve needs at least one snapshot");
  std::vector<const Snapshot*> ordered;
  for (const auto& s : history) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Snapshot* a, const Snapshot* b) { return a->step < b->step; });
  std::vector<EntropyPoint> curve;
  curve.reserve(history.size());
  for (const auto* s : ordered)
    curve.push_back({s->step, renyi_entropy_estimate(s->errors, sigma, options)});
  return curve;
}

}  // namespace entroshape

#pragma once

#include <cstdint>
#include <vector>

#include "entroshape/error_set.hpp"
#include "entroshape/parallel.hpp"

namespace entroshape {

enum class Task : unsigned char { A = 0, B = 1 };

/// Assignment of each error sample to task group A or B.
class TaskPartition {
 public:
  /// Throws InputError unless both groups are nonempty.
  explicit TaskPartition(std::vector<Task> labels);

  const std::vector<Task>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t count_a() const { return count_a_; }
  std::size_t count_b() const { return labels_.size() - count_a_; }

 private:
  std::vector<Task> labels_;
  std::size_t count_a_ = 0;
};

struct CouplingReport {
  double k_bar_aa = 0.0;
  double k_bar_ab = 0.0;
  double k_bar_bb = 0.0;
  double coupling_ratio = 0.0;  // R_B = 2 (N_A / N_B) (k_AB / k_BB)
  double total_potential = 0.0;
  /// |N_A^2 k_AA + 2 N_A N_B k_AB + N_B^2 k_BB - Z| / Z
  double decomposition_residual = 0.0;
};

/// Parzen quadratic Renyi entropy of the errors; same value as tmee_loss.
double renyi_entropy_estimate(const ErrorSet& errors, double sigma,
                              const EvalOptions& options = {});

struct TaylorExpansion {
  double approx_potential = 0.0;
  /// terms[0] = N^2, terms[k] = (-1)^k / (k! 2^k sigma^2k) sum_{t,s} |e_t - e_s|^2k
  std::vector<double> terms;
};

/// Truncated bandwidth expansion of Z up to `order` (1..6).
TaylorExpansion taylor_potential(const ErrorSet& errors, double sigma, int order);

struct IdentityCheck {
  double lhs = 0.0;       // sum_{t,s} |e_t - e_s|^2
  double rhs = 0.0;       // 2 N sum_t |e_t - mean|^2
  double residual = 0.0;  // |lhs - rhs| / max(|lhs|, tiny)
};

IdentityCheck msr_identity_check(const ErrorSet& errors);

CouplingReport coupling_ratio(const ErrorSet& errors, const TaskPartition& partition,
                              double sigma, const EvalOptions& options = {});

struct PcaProjection {
  std::size_t components = 0;
  std::vector<double> coordinates;          // N x components, row-major
  std::vector<double> explained_fraction;   // nonincreasing, sum <= 1
  std::vector<double> axes;                 // components x D, row-major
};

/// Mean-centred projection onto the leading eigenvectors of the D x D
/// error covariance. Each axis is signed so its largest-magnitude entry is
/// positive.
PcaProjection pca_project(const ErrorSet& errors, std::size_t components = 2);

struct Snapshot {
  std::uint64_t step = 0;
  ErrorSet errors;
};

struct EntropyPoint {
  std::uint64_t step = 0;
  double entropy = 0.0;
};

/// Renyi entropy per snapshot, sorted by step.
std::vector<EntropyPoint> entropy_curve(const std::vector<Snapshot>& history, double sigma,
                                        const EvalOptions& options = {});

}  // namespace entroshape

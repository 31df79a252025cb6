#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace emg {

/// Dense symmetric kernel (Gram) matrix, row-major.
class KernelMatrix {
 public:
  KernelMatrix() = default;
  explicit KernelMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct SmoOptions {
  double c = 1.0;
  double tolerance = 1e-3;
  int max_passes = 200;
  std::uint64_t seed = 0;
  double eps = 1e-10;  // minimum relative multiplier change for a step
};

/// Snapshot passed to the observer after every accepted pair update.
struct SmoStep {
  std::size_t first = 0;
  std::size_t second = 0;
  double objective = 0.0;           // dual objective after the update
  double equality_residual = 0.0;   // sum_i alpha_i * y_i
};

using SmoObserver = std::function<void(const SmoStep&)>;

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;
  bool converged = false;
  int passes = 0;            // outer sweeps of the two-loop heuristic
  std::size_t steps = 0;     // accepted pair updates
  double gap = 0.0;          // max violating-pair gap at exit (<= 2 tol when converged)
};

/// Solves  max  sum(a) - 1/2 a'Qa,  Q_ij = y_i y_j K_ij,
///         s.t. 0 <= a_i <= C,  sum a_i y_i = 0
/// with Platt's SMO: the outer loop alternates sweeps over all examples and
/// over non-bound ones; the second multiplier maximises |E1 - E2|, falling
/// back to a seeded random scan. If the heuristic stalls before the
/// tolerance is met, maximal violating pairs are stepped until it is.
/// The bias is placed in the middle of the feasible threshold interval.
///
/// Labels must be +1/-1. The decision function is sum a_j y_j K(x_j, .) + b.
SmoResult solve_smo(const KernelMatrix& kernel, std::span<const int> labels,
                    const SmoOptions& options, const SmoObserver& observer = {});

double dual_objective(const KernelMatrix& kernel, std::span<const int> labels,
                      std::span<const double> alpha);

struct KktReport {
  bool satisfied = true;
  double max_violation = 0.0;
  std::size_t worst_index = 0;
};

/// Checks the box-constrained KKT conditions on the training set:
///   a_i = 0      =>  y_i f(x_i) >= 1 - tol
///   0 < a_i < C  =>  |y_i f(x_i) - 1| <= tol
///   a_i = C      =>  y_i f(x_i) <= 1 + tol
KktReport check_kkt(const KernelMatrix& kernel, std::span<const int> labels,
                    std::span<const double> alpha, double bias, double c, double tol);

}  // namespace emg

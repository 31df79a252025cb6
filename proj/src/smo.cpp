#include "emg_affect/smo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "emg_affect/error.hpp"
#include "emg_affect/rng.hpp"

namespace emg {

namespace {

class SmoSolver {
 public:
  SmoSolver(const KernelMatrix& k, std::span<const int> y, const SmoOptions& opt,
            const SmoObserver& observer)
      : k_(k),
        y_(y),
        opt_(opt),
        observer_(observer),
        rng_(opt.seed),
        n_(y.size()),
        alpha_(n_, 0.0),
        grad_sum_(n_, 0.0) {}

  SmoResult run() {
    SmoResult result;
    bool examine_all = true;
    std::size_t changed = 0;
    while ((changed > 0 || examine_all) && result.passes < opt_.max_passes) {
      changed = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (examine_all || !at_bound(i)) changed += examine(i);
      }
      ++result.passes;
      if (examine_all) {
        examine_all = false;
      } else if (changed == 0) {
        examine_all = true;
      }
    }
    polish();

    const auto [up, low] = threshold_bounds();
    result.gap = low - up;
    result.converged = result.gap <= 2.0 * opt_.tolerance;
    // f(x) = s(x) + b with F_i = s_i - y_i; the feasible thresholds are
    // -b in [up, low] (or [low, up] once optimal). Take the midpoint.
    result.bias = -(up + low) / 2.0;
    result.alpha = alpha_;
    result.steps = steps_;
    return result;
  }

 private:
  bool at_bound(std::size_t i) const { return alpha_[i] <= 0.0 || alpha_[i] >= opt_.c; }

  // Error with the running Platt threshold.
  double error(std::size_t i) const { return grad_sum_[i] + bias_ - y_[i]; }

  std::size_t examine(std::size_t i2) {
    const double y2 = y_[i2];
    const double a2 = alpha_[i2];
    const double e2 = error(i2);
    const double r2 = e2 * y2;
    if (!((r2 < -opt_.tolerance && a2 < opt_.c) || (r2 > opt_.tolerance && a2 > 0.0))) {
      return 0;
    }

    std::size_t non_bound = 0;
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (at_bound(i)) continue;
      ++non_bound;
      const double gap = std::abs(error(i) - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (non_bound > 1 && best < n_ && take_step(best, i2)) return 1;

    const std::size_t start = static_cast<std::size_t>(rng_.below(n_));
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i1 = (start + k) % n_;
      if (!at_bound(i1) && take_step(i1, i2)) return 1;
    }
    const std::size_t start_all = static_cast<std::size_t>(rng_.below(n_));
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i1 = (start_all + k) % n_;
      if (take_step(i1, i2)) return 1;
    }
    return 0;
  }

  // Objective change for a step (d1, d2) on the pair.
  double objective_delta(std::size_t i1, std::size_t i2, double d1, double d2) const {
    const double g1 = 1.0 - y_[i1] * grad_sum_[i1];
    const double g2 = 1.0 - y_[i2] * grad_sum_[i2];
    const double s = static_cast<double>(y_[i1] * y_[i2]);
    const double quad = d1 * d1 * k_(i1, i1) + d2 * d2 * k_(i2, i2) +
                        2.0 * s * d1 * d2 * k_(i1, i2);
    return g1 * d1 + g2 * d2 - 0.5 * quad;
  }

  double snap(double a) const {
    const double eps = 1e-12 * opt_.c;
    if (a < eps) return 0.0;
    if (a > opt_.c - eps) return opt_.c;
    return a;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double c = opt_.c;
    const double alph1 = alpha_[i1];
    const double alph2 = alpha_[i2];
    const int y1 = y_[i1];
    const int y2 = y_[i2];
    const double e1 = error(i1);
    const double e2 = error(i2);
    const double s = static_cast<double>(y1 * y2);

    double lo = 0.0;
    double hi = 0.0;
    if (y1 != y2) {
      lo = std::max(0.0, alph2 - alph1);
      hi = std::min(c, c + alph2 - alph1);
    } else {
      lo = std::max(0.0, alph1 + alph2 - c);
      hi = std::min(c, alph1 + alph2);
    }
    if (lo >= hi) return false;

    const double k11 = k_(i1, i1);
    const double k12 = k_(i1, i2);
    const double k22 = k_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;

    double a2 = alph2;
    if (eta > 0.0) {
      a2 = std::clamp(alph2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // Flat or non-convex direction: take the better endpoint.
      const double w_lo = objective_delta(i1, i2, -s * (lo - alph2), lo - alph2);
      const double w_hi = objective_delta(i1, i2, -s * (hi - alph2), hi - alph2);
      if (w_lo > w_hi + opt_.eps) {
        a2 = lo;
      } else if (w_hi > w_lo + opt_.eps) {
        a2 = hi;
      }
    }
    a2 = snap(a2);
    if (std::abs(a2 - alph2) < opt_.eps * (a2 + alph2 + opt_.eps)) return false;

    double a1 = snap(std::clamp(alph1 + s * (alph2 - a2), 0.0, c));
    const double d1 = a1 - alph1;
    const double d2 = a2 - alph2;
    if (objective_delta(i1, i2, d1, d2) < 0.0) return false;

    const double b1 = bias_ - e1 - y1 * d1 * k11 - y2 * d2 * k12;
    const double b2 = bias_ - e2 - y1 * d1 * k12 - y2 * d2 * k22;
    if (a1 > 0.0 && a1 < c) {
      bias_ = b1;
    } else if (a2 > 0.0 && a2 < c) {
      bias_ = b2;
    } else {
      bias_ = (b1 + b2) / 2.0;
    }

    for (std::size_t i = 0; i < n_; ++i) {
      grad_sum_[i] += y1 * d1 * k_(i1, i) + y2 * d2 * k_(i2, i);
    }
    alpha_[i1] = a1;
    alpha_[i2] = a2;
    ++steps_;
    if (observer_) notify(i1, i2);
    return true;
  }

  void notify(std::size_t i1, std::size_t i2) const {
    SmoStep step;
    step.first = i1;
    step.second = i2;
    step.objective = dual_objective(k_, y_, alpha_);
    for (std::size_t i = 0; i < n_; ++i) step.equality_residual += alpha_[i] * y_[i];
    observer_(step);
  }

  bool in_up(std::size_t i) const {
    return (alpha_[i] > 0.0 && alpha_[i] < opt_.c) || (y_[i] > 0 && alpha_[i] <= 0.0) ||
           (y_[i] < 0 && alpha_[i] >= opt_.c);
  }
  bool in_low(std::size_t i) const {
    return (alpha_[i] > 0.0 && alpha_[i] < opt_.c) || (y_[i] > 0 && alpha_[i] >= opt_.c) ||
           (y_[i] < 0 && alpha_[i] <= 0.0);
  }

  // (min F over the "up" set, max F over the "low" set), F_i = s_i - y_i.
  std::pair<double, double> threshold_bounds(std::size_t* arg_up = nullptr,
                                             std::size_t* arg_low = nullptr) const {
    double up = std::numeric_limits<double>::infinity();
    double low = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) {
      const double f = grad_sum_[i] - y_[i];
      if (in_up(i) && f < up) {
        up = f;
        if (arg_up) *arg_up = i;
      }
      if (in_low(i) && f > low) {
        low = f;
        if (arg_low) *arg_low = i;
      }
    }
    if (!std::isfinite(up)) up = low;
    if (!std::isfinite(low)) low = up;
    if (!std::isfinite(up)) up = low = 0.0;
    return {up, low};
  }

  void polish() {
    const std::size_t limit = static_cast<std::size_t>(std::max(opt_.max_passes, 1)) *
                              std::max<std::size_t>(n_, 1);
    for (std::size_t iter = 0; iter < limit; ++iter) {
      std::size_t i_up = 0;
      std::size_t i_low = 0;
      const auto [up, low] = threshold_bounds(&i_up, &i_low);
      if (low - up <= 2.0 * opt_.tolerance) return;
      if (!take_step(i_low, i_up)) return;
    }
  }

  const KernelMatrix& k_;
  std::span<const int> y_;
  SmoOptions opt_;
  const SmoObserver& observer_;
  Rng rng_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> grad_sum_;  // s_i = sum_j a_j y_j K_ij
  double bias_ = 0.0;
  std::size_t steps_ = 0;
};

}  // namespace

SmoResult solve_smo(const KernelMatrix& kernel, std::span<const int> labels,
                    const SmoOptions& options, const SmoObserver& observer) {
  if (kernel.size() != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "kernel is " + std::to_string(kernel.size()) + "x" +
                    std::to_string(kernel.size()) + " but " +
                    std::to_string(labels.size()) + " labels given");
  }
  if (!(options.c > 0.0) || !(options.tolerance > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "C and tolerance must be positive");
  }
  bool pos = false;
  bool neg = false;
  for (int y : labels) {
    if (y == 1) {
      pos = true;
    } else if (y == -1) {
      neg = true;
    } else {
      throw Error(ErrorCode::InvalidConfig, "labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw Error(ErrorCode::SingleClass, "both classes are required");
  return SmoSolver(kernel, labels, options, observer).run();
}

double dual_objective(const KernelMatrix& kernel, std::span<const int> labels,
                      std::span<const double> alpha) {
  const std::size_t n = alpha.size();
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    linear += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      quad += alpha[i] * alpha[j] * labels[i] * labels[j] * kernel(i, j);
    }
  }
  return linear - 0.5 * quad;
}

KktReport check_kkt(const KernelMatrix& kernel, std::span<const int> labels,
                    std::span<const double> alpha, double bias, double c, double tol) {
  KktReport report;
  const std::size_t n = alpha.size();
  for (std::size_t i = 0; i < n; ++i) {
    double f = bias;
    for (std::size_t j = 0; j < n; ++j) f += alpha[j] * labels[j] * kernel(j, i);
    const double margin = labels[i] * f;
    double violation = 0.0;
    if (alpha[i] <= 0.0) {
      violation = std::max(0.0, 1.0 - margin);
    } else if (alpha[i] >= c) {
      violation = std::max(0.0, margin - 1.0);
    } else {
      violation = std::abs(margin - 1.0);
    }
    if (violation > report.max_violation) {
      report.max_violation = violation;
      report.worst_index = i;
    }
  }
  report.satisfied = report.max_violation <= tol;
  return report;
}

}  // namespace emg

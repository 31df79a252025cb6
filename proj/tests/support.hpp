// Shared fixtures and independent oracles for the test binaries.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "emg_affect/features.hpp"
#include "emg_affect/rng.hpp"
#include "emg_affect/smo.hpp"
#include "emg_affect/svm.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline std::vector<double> random_slot(emg::Rng& rng, std::size_t min_n = 3, std::size_t max_n = 400) {
  const std::size_t n = min_n + static_cast<std::size_t>(rng.below(max_n - min_n + 1));
  std::vector<double> x(n);
  for (auto& v : x) v = static_cast<double>(rng.below(1000));
  return x;
}

/// Fresh empty directory under the system temp dir.
inline fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("emg_affect_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Matrix whose label is a function of the RMS columns; everything else is noise.
inline emg::FeatureMatrix rms_separable_matrix(std::uint64_t seed, std::size_t users = 10,
                                               std::size_t per_user = 4, std::size_t slots = 10) {
  emg::Rng rng(seed);
  std::vector<emg::FeatureVector> rows;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t r = 0; r < per_user; ++r) {
      emg::FeatureVector fv;
      fv.label = r % 2 == 0 ? emg::Label::Relaxed : emg::Label::Angry;
      fv.provenance.user_id = "u" + std::to_string(100 + u);
      fv.provenance.condition = r < per_user / 2 ? emg::Condition::Fixed : emg::Condition::Open;
      fv.values.resize(slots * emg::kFeatureKindCount);
      for (std::size_t c = 0; c < fv.values.size(); ++c) fv.values[c] = rng.normal();
      const double shift = fv.label == emg::Label::Angry ? 4.0 : -4.0;
      for (std::size_t s = 0; s < slots; ++s) {
        fv.values[emg::column_index(s, emg::FeatureKind::RMS)] += shift;
      }
      rows.push_back(std::move(fv));
    }
  }
  return emg::build_matrix(std::move(rows));
}

struct SmoInstance {
  emg::KernelMatrix kernel;
  std::vector<int> labels;
};

/// n random 2-D points with an RBF kernel and mixed labels.
inline SmoInstance random_smo_instance(emg::Rng& rng, std::size_t n = 6, double gamma = 0.5) {
  SmoInstance inst{emg::KernelMatrix(n), std::vector<int>(n)};
  std::vector<std::array<double, 2>> pts(n);
  for (auto& p : pts) p = {rng.uniform() * 4.0 - 2.0, rng.uniform() * 4.0 - 2.0};
  for (std::size_t i = 0; i < n; ++i) inst.labels[i] = rng.uniform() < 0.5 ? 1 : -1;
  inst.labels[0] = 1;
  inst.labels[1] = -1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = pts[i][0] - pts[j][0];
      const double dy = pts[i][1] - pts[j][1];
      inst.kernel(i, j) = std::exp(-gamma * (dx * dx + dy * dy));
    }
  }
  return inst;
}

inline double objective(const SmoInstance& inst, const double* a) {
  const std::size_t n = inst.labels.size();
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < n; ++j) {
      quad += a[i] * a[j] * inst.labels[i] * inst.labels[j] * inst.kernel(i, j);
    }
  }
  return lin - 0.5 * quad;
}

/// Brute force: every grid point of alpha_1..alpha_{n-1} in [0,C] at `step`;
/// alpha_n is the projection onto sum(alpha_i y_i) = 0, kept when it lands in [0,C].
inline double grid_oracle(const SmoInstance& inst, double c, double step) {
  const std::size_t n = inst.labels.size();
  const auto levels = static_cast<std::size_t>(std::llround(c / step));
  std::vector<std::size_t> idx(n - 1, 0);
  std::vector<double> a(n, 0.0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      a[i] = static_cast<double>(idx[i]) * step;
      s += a[i] * inst.labels[i];
    }
    double last = -s * inst.labels[n - 1];
    if (last > -1e-12 && last < c + 1e-12) {
      a[n - 1] = std::clamp(last, 0.0, c);
      best = std::max(best, objective(inst, a.data()));
    }
    std::size_t k = 0;
    while (k < n - 1 && ++idx[k] > levels) idx[k++] = 0;
    if (k == n - 1) break;
  }
  return best;
}

/// Exact optimum by enumerating which multipliers sit at 0, at C, or free,
/// solving the equality-constrained stationarity system for the free ones and
/// keeping the best feasible solution. Exact for any C (n small).
inline double active_set_oracle(const SmoInstance& inst, double c) {
  const std::size_t n = inst.labels.size();
  std::size_t patterns = 1;
  for (std::size_t i = 0; i < n; ++i) patterns *= 3;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> state(n);
  for (std::size_t p = 0; p < patterns; ++p) {
    std::size_t q = p;
    std::vector<std::size_t> free;
    std::vector<double> a(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      state[i] = static_cast<int>(q % 3);
      q /= 3;
      if (state[i] == 1) a[i] = c;
      if (state[i] == 2) free.push_back(i);
    }
    const std::size_t m = free.size();
    if (m > 0) {
      // [Q_FF  y_F] [a_F]   [1 - Q_FB a_B]
      // [y_F'  0  ] [nu ] = [ -y_B' a_B  ]
      const std::size_t dim = m + 1;
      std::vector<double> mat(dim * (dim + 1), 0.0);
      auto at = [&](std::size_t r, std::size_t col) -> double& { return mat[r * (dim + 1) + col]; };
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = free[r];
        double rhs = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (state[j] != 2) rhs -= inst.labels[i] * inst.labels[j] * inst.kernel(i, j) * a[j];
        }
        for (std::size_t s = 0; s < m; ++s) {
          const std::size_t j = free[s];
          at(r, s) = inst.labels[i] * inst.labels[j] * inst.kernel(i, j);
        }
        at(r, m) = inst.labels[i];
        at(r, dim) = rhs;
      }
      double rhs = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (state[j] != 2) rhs -= inst.labels[j] * a[j];
      }
      for (std::size_t s = 0; s < m; ++s) at(m, s) = inst.labels[free[s]];
      at(m, dim) = rhs;
      // Gaussian elimination with partial pivoting.
      bool singular = false;
      for (std::size_t col = 0; col < dim && !singular; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < dim; ++r) {
          if (std::abs(at(r, col)) > std::abs(at(piv, col))) piv = r;
        }
        if (std::abs(at(piv, col)) < 1e-12) {
          singular = true;
          break;
        }
        for (std::size_t k = 0; k <= dim; ++k) std::swap(at(col, k), at(piv, k));
        for (std::size_t r = 0; r < dim; ++r) {
          if (r == col) continue;
          const double f = at(r, col) / at(col, col);
          for (std::size_t k = col; k <= dim; ++k) at(r, k) -= f * at(col, k);
        }
      }
      if (singular) continue;
      bool feasible = true;
      for (std::size_t s = 0; s < m; ++s) {
        const double v = at(s, dim) / at(s, s);
        if (v < -1e-9 || v > c + 1e-9) feasible = false;
        a[free[s]] = std::clamp(v, 0.0, c);
      }
      if (!feasible) continue;
    }
    double eq = 0.0;
    for (std::size_t i = 0; i < n; ++i) eq += a[i] * inst.labels[i];
    if (std::abs(eq) > 1e-9) continue;
    best = std::max(best, objective(inst, a.data()));
  }
  return best;
}

}  // namespace testsupport

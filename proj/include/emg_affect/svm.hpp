#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "emg_affect/features.hpp"
#include "emg_affect/smo.hpp"

namespace emg {

/// z-score statistics over a chosen column set, fitted on training rows.
struct Normalizer {
  std::size_t input_dim = 0;              // full row length it accepts
  std::vector<std::size_t> columns;       // sorted, unique
  std::vector<double> mean;
  std::vector<double> sd;                 // population sd; 0 maps to output 0

  /// Projects a full row onto the columns and standardises it.
  /// Throws DimensionMismatch if row.size() != input_dim.
  std::vector<double> apply(std::span<const double> row) const;
};

/// Throws EmptyMatrix on zero rows, DimensionMismatch for bad column indices.
Normalizer fit_normalizer(const FeatureMatrix& matrix, std::span<const std::size_t> columns);

struct SvmHyperparams {
  double c = 1.0;
  std::optional<double> gamma;  // empty = auto
  double tolerance = 1e-3;
  int max_passes = 200;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

struct SvmModel {
  std::vector<std::vector<double>> support_vectors;  // normalised, active columns only
  std::vector<double> dual_coefs;                    // alpha_i * y_i
  double bias = 0.0;
  double gamma = 1.0;
  Normalizer normalizer;

  const std::vector<std::size_t>& active_columns() const { return normalizer.columns; }
};

struct TrainReport {
  bool converged = false;
  int passes = 0;
  std::size_t steps = 0;
  std::size_t support_vector_count = 0;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// Resolves auto gamma: 1 / (d * mean column variance), or 1/d when that
/// variance is zero.
double resolve_gamma(const SvmHyperparams& hp,
                     const std::vector<std::vector<double>>& normalized_rows,
                     std::size_t active_dim);

/// Fits the normaliser and trains an RBF SVM on the selected columns.
/// Throws SingleClass, NonFinite, TooFewRows (< 2 rows), DimensionMismatch.
SvmModel train(const FeatureMatrix& matrix, std::span<const std::size_t> columns,
               const SvmHyperparams& hp, TrainReport* report = nullptr);

/// Kernel expansion on a full-length row.
double decision_value(const SvmModel& model, std::span<const double> row);

/// Angry when the decision value is >= 0.
Label predict(const SvmModel& model, std::span<const double> row);
inline Label predict(const SvmModel& model, const FeatureVector& row) {
  return predict(model, row.values);
}

/// Stratified fold assignment for every row, seeded. Throws TooFewRows when
/// there are fewer rows than folds or either class has fewer than 2 rows.
std::vector<std::size_t> stratified_folds(const FeatureMatrix& matrix, std::size_t folds,
                                          std::uint64_t seed);

/// Mean accuracy over hp.folds stratified folds. Fold f trains with seed
/// hp.seed + f.
double cross_validate(const FeatureMatrix& matrix, std::span<const std::size_t> columns,
                      const SvmHyperparams& hp);

/// Every column of the matrix, 0..cols-1.
std::vector<std::size_t> all_columns(const FeatureMatrix& matrix);

}  // namespace emg

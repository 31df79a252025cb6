#include "emg_affect/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "emg_affect/error.hpp"
#include "emg_affect/rng.hpp"

namespace emg {

namespace {

std::vector<std::size_t> sorted_unique(std::span<const std::size_t> columns,
                                       std::size_t width) {
  std::vector<std::size_t> out(columns.begin(), columns.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no columns selected");
  if (out.back() >= width) {
    throw Error(ErrorCode::DimensionMismatch, "column " + std::to_string(out.back()) +
                                                  " beyond width " + std::to_string(width));
  }
  return out;
}

}  // namespace

std::vector<double> Normalizer::apply(std::span<const double> row) const {
  if (row.size() != input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(row.size()) +
                                                  " values, model expects " +
                                                  std::to_string(input_dim));
  }
  std::vector<double> out(columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out[k] = sd[k] > 0.0 ? (row[columns[k]] - mean[k]) / sd[k] : 0.0;
  }
  return out;
}

Normalizer fit_normalizer(const FeatureMatrix& matrix, std::span<const std::size_t> columns) {
  if (matrix.rows() == 0) throw Error(ErrorCode::EmptyMatrix, "cannot fit on zero rows");
  Normalizer norm;
  norm.input_dim = matrix.cols();
  norm.columns = sorted_unique(columns, matrix.cols());
  const auto n = static_cast<double>(matrix.rows());
  for (std::size_t col : norm.columns) {
    double sum = 0.0;
    for (const auto& r : matrix.row_data()) sum += r.values[col];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : matrix.row_data()) {
      const double d = r.values[col] - mean;
      ss += d * d;
    }
    norm.mean.push_back(mean);
    norm.sd.push_back(std::sqrt(ss / n));
  }
  return norm;
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double dist = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    dist += d * d;
  }
  return std::exp(-gamma * dist);
}

double resolve_gamma(const SvmHyperparams& hp,
                     const std::vector<std::vector<double>>& normalized_rows,
                     std::size_t active_dim) {
  if (hp.gamma) {
    if (!(*hp.gamma > 0.0) || !std::isfinite(*hp.gamma)) {
      throw Error(ErrorCode::InvalidConfig, "gamma must be positive");
    }
    return *hp.gamma;
  }
  const auto d = static_cast<double>(active_dim);
  if (normalized_rows.empty() || active_dim == 0) return 1.0 / std::max(d, 1.0);
  const auto n = static_cast<double>(normalized_rows.size());
  double var_sum = 0.0;
  for (std::size_t c = 0; c < active_dim; ++c) {
    double sum = 0.0;
    for (const auto& r : normalized_rows) sum += r[c];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : normalized_rows) ss += (r[c] - mean) * (r[c] - mean);
    var_sum += ss / n;
  }
  const double mean_var = var_sum / d;
  return mean_var > 0.0 ? 1.0 / (d * mean_var) : 1.0 / d;
}

SvmModel train(const FeatureMatrix& matrix, std::span<const std::size_t> columns,
               const SvmHyperparams& hp, TrainReport* report) {
  if (matrix.rows() < 2) throw Error(ErrorCode::TooFewRows, "training needs >= 2 rows");
  if (matrix.count(Label::Angry) == 0 || matrix.count(Label::Relaxed) == 0) {
    throw Error(ErrorCode::SingleClass, "training rows contain only one label");
  }
  for (const auto& r : matrix.row_data()) {
    for (double v : r.values) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite feature value");
    }
  }

  SvmModel model;
  model.normalizer = fit_normalizer(matrix, columns);
  const std::size_t n = matrix.rows();
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  x.reserve(n);
  y.reserve(n);
  for (const auto& r : matrix.row_data()) {
    x.push_back(model.normalizer.apply(r.values));
    y.push_back(label_sign(r.label));
  }
  model.gamma = resolve_gamma(hp, x, model.normalizer.columns.size());

  KernelMatrix k(n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      k(i, j) = k(j, i) = rbf_kernel(x[i], x[j], model.gamma);
    }
  }

  SmoOptions opt;
  opt.c = hp.c;
  opt.tolerance = hp.tolerance;
  opt.max_passes = hp.max_passes;
  opt.seed = hp.seed;
  const SmoResult solved = solve_smo(k, y, opt);

  model.bias = solved.bias;
  for (std::size_t i = 0; i < n; ++i) {
    if (solved.alpha[i] == 0.0) continue;
    model.support_vectors.push_back(std::move(x[i]));
    model.dual_coefs.push_back(solved.alpha[i] * y[i]);
  }
  if (report) {
    report->converged = solved.converged;
    report->passes = solved.passes;
    report->steps = solved.steps;
    report->support_vector_count = model.support_vectors.size();
  }
  return model;
}

double decision_value(const SvmModel& model, std::span<const double> row) {
  const auto u = model.normalizer.apply(row);
  double sum = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    sum += model.dual_coefs[i] * rbf_kernel(model.support_vectors[i], u, model.gamma);
  }
  return sum;
}

Label predict(const SvmModel& model, std::span<const double> row) {
  return decision_value(model, row) >= 0.0 ? Label::Angry : Label::Relaxed;
}

std::vector<std::size_t> stratified_folds(const FeatureMatrix& matrix, std::size_t folds,
                                          std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 folds");
  std::vector<std::size_t> angry;
  std::vector<std::size_t> relaxed;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    (matrix.row(i).label == Label::Angry ? angry : relaxed).push_back(i);
  }
  // Every fold must be non-empty and every training part must see both
  // classes; folds == rows is leave-one-row-out.
  if (matrix.rows() < folds || angry.size() < 2 || relaxed.size() < 2) {
    throw Error(ErrorCode::TooFewRows,
                std::to_string(angry.size()) + " angry / " + std::to_string(relaxed.size()) +
                    " relaxed rows for " + std::to_string(folds) + " stratified folds");
  }
  Rng rng(seed);
  rng.shuffle(angry);
  rng.shuffle(relaxed);
  std::vector<std::size_t> assignment(matrix.rows());
  // Deal both classes round-robin with one running counter so fold sizes
  // differ by at most one.
  std::size_t slot = 0;
  for (std::size_t i : angry) assignment[i] = slot++ % folds;
  for (std::size_t i : relaxed) assignment[i] = slot++ % folds;
  return assignment;
}

double cross_validate(const FeatureMatrix& matrix, std::span<const std::size_t> columns,
                      const SvmHyperparams& hp) {
  if (matrix.rows() < hp.folds) {
    throw Error(ErrorCode::TooFewRows, std::to_string(matrix.rows()) + " rows for " +
                                           std::to_string(hp.folds) + " folds");
  }
  const auto assignment = stratified_folds(matrix, hp.folds, hp.seed);
  double total = 0.0;
  for (std::size_t f = 0; f < hp.folds; ++f) {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
      (assignment[i] == f ? test_idx : train_idx).push_back(i);
    }
    SvmHyperparams fold_hp = hp;
    fold_hp.seed = hp.seed + f;
    const auto model = train(matrix.subset(train_idx), columns, fold_hp);
    std::size_t correct = 0;
    for (std::size_t i : test_idx) {
      if (predict(model, matrix.row(i)) == matrix.row(i).label) ++correct;
    }
    total += static_cast<double>(correct) / static_cast<double>(test_idx.size());
  }
  return total / static_cast<double>(hp.folds);
}

std::vector<std::size_t> all_columns(const FeatureMatrix& matrix) {
  std::vector<std::size_t> cols(matrix.cols());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return cols;
}

}  // namespace emg

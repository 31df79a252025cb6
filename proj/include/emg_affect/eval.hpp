#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emg_affect/features.hpp"
#include "emg_affect/selection.hpp"
#include "emg_affect/svm.hpp"

namespace emg {

/// Binary confusion counts, Angry positive.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t positives() const { return tp + fn; }
  std::uint64_t negatives() const { return fp + tn; }
  std::uint64_t total() const { return tp + fp + fn + tn; }

  void add(Label truth, Label predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsReport {
  double accuracy = 0.0;     // (TP + TN) / (P + N)
  double precision = 0.0;    // TP / (TP + FP)
  double sensitivity = 0.0;  // TP / (TP + FN)
  double specificity = 0.0;  // TN / (FP + TN)
  double fpr = 0.0;          // FP / (FP + TN)
  double fnr = 0.0;          // FN / (FN + TP)
  double f1 = 0.0;           // 2TP / (2TP + FP + FN)
  bool degenerate = false;   // some ratio had a zero denominator and reads 0
};

/// Throws EmptyMatrix when every count is zero.
MetricsReport metrics(const ConfusionMatrix& cm);

enum class EvalMode { LeaveOneUserOut, Split8020 };

struct EvalPlan {
  EvalMode mode = EvalMode::LeaveOneUserOut;
  std::size_t iterations = 400;
  std::uint64_t seed = 42;
  SelectionSpec selection;
  SvmHyperparams hp;
  bool reselect_per_iteration = true;
  bool stratify_split = true;
  std::size_t jobs = 1;
};

struct Split {
  FeatureMatrix train;
  FeatureMatrix test;
};

/// All rows of `user_id` become the test set. Throws UnknownUser.
Split split_louo(const FeatureMatrix& matrix, const std::string& user_id);

/// ceil(0.2 N) test rows drawn without replacement, per label in
/// proportion when `stratify` is set and both labels can supply their
/// share. Throws TooFewRows below 5 rows.
Split split_8020(const FeatureMatrix& matrix, std::uint64_t seed, bool stratify);

struct IterationRecord {
  std::size_t index = 0;
  std::string test_user;  // LOUO only
  std::vector<std::size_t> chosen;
  double selection_score = 0.0;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
};

struct EvalResult {
  ConfusionMatrix confusion;
  MetricsReport metrics;
  double mean_accuracy = 0.0;
  std::vector<IterationRecord> iterations;  // ordered by index
  std::optional<SelectionResult> global_selection;
};

/// Iteration i uses seed plan.seed + i for its split and SVM, and
/// plan.selection.seed + i for re-selection. LOUO holds out the
/// (i mod U)-th user in sorted order. Results do not depend on plan.jobs.
EvalResult run_eval(const FeatureMatrix& matrix, const EvalPlan& plan);

}  // namespace emg

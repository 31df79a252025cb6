#include "emg_affect/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emg_affect/error.hpp"
#include "emg_affect/parallel.hpp"
#include "emg_affect/rng.hpp"

namespace emg {

void ConfusionMatrix::add(Label truth, Label predicted) {
  if (truth == Label::Angry) {
    ++(predicted == Label::Angry ? tp : fn);
  } else {
    ++(predicted == Label::Angry ? fp : tn);
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix is empty");
  MetricsReport r;
  auto ratio = [&r](std::uint64_t num, std::uint64_t den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  r.specificity = ratio(cm.tn, cm.fp + cm.tn);
  r.fpr = ratio(cm.fp, cm.fp + cm.tn);
  r.fnr = ratio(cm.fn, cm.fn + cm.tp);
  r.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
  return r;
}

Split split_louo(const FeatureMatrix& matrix, const std::string& user_id) {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    (matrix.row(i).provenance.user_id == user_id ? test : train).push_back(i);
  }
  if (test.empty()) throw Error(ErrorCode::UnknownUser, "no rows for user '" + user_id + "'");
  return {matrix.subset(train), matrix.subset(test)};
}

Split split_8020(const FeatureMatrix& matrix, std::uint64_t seed, bool stratify) {
  const std::size_t n = matrix.rows();
  if (n < 5) throw Error(ErrorCode::TooFewRows, "80-20 split needs >= 5 rows");
  const std::size_t test_count = (n + 4) / 5;  // ceil(0.2 n)

  Rng rng(seed);
  std::vector<bool> is_test(n, false);
  std::vector<std::size_t> angry;
  std::vector<std::size_t> relaxed;
  for (std::size_t i = 0; i < n; ++i) {
    (matrix.row(i).label == Label::Angry ? angry : relaxed).push_back(i);
  }
  const auto angry_share = static_cast<std::size_t>(std::llround(
      static_cast<double>(test_count) * static_cast<double>(angry.size()) / static_cast<double>(n)));
  const bool feasible = angry_share <= angry.size() && test_count - angry_share <= relaxed.size();

  if (stratify && feasible) {
    rng.shuffle(angry);
    rng.shuffle(relaxed);
    for (std::size_t i = 0; i < angry_share; ++i) is_test[angry[i]] = true;
    for (std::size_t i = 0; i < test_count - angry_share; ++i) is_test[relaxed[i]] = true;
  } else {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < test_count; ++i) is_test[order[i]] = true;
  }
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test : train).push_back(i);
  return {matrix.subset(train), matrix.subset(test)};
}

namespace {

IterationRecord run_iteration(const FeatureMatrix& matrix, const EvalPlan& plan,
                              const std::vector<std::string>& users, std::size_t index,
                              const SelectionResult* global, std::size_t selection_jobs) {
  IterationRecord rec;
  rec.index = index;
  const std::uint64_t seed = plan.seed + index;

  Split split;
  if (plan.mode == EvalMode::LeaveOneUserOut) {
    rec.test_user = users[index % users.size()];
    split = split_louo(matrix, rec.test_user);
  } else {
    split = split_8020(matrix, seed, plan.stratify_split);
  }

  SvmHyperparams hp = plan.hp;
  hp.seed = seed;
  if (global) {
    rec.chosen = global->chosen;
    rec.selection_score = global->score;
  } else {
    SelectionSpec spec = plan.selection;
    spec.seed = plan.selection.seed + index;
    spec.keep_log = false;
    spec.jobs = selection_jobs;
    const auto sel = select_features(split.train, spec, hp);
    rec.chosen = sel.chosen;
    rec.selection_score = sel.score;
  }

  const auto cols = columns_for(matrix, plan.selection.granularity, rec.chosen);
  const auto model = train(split.train, cols, hp);
  for (const auto& row : split.test.row_data()) {
    rec.confusion.add(row.label, predict(model, row));
  }
  rec.accuracy = static_cast<double>(rec.confusion.tp + rec.confusion.tn) /
                 static_cast<double>(rec.confusion.total());
  return rec;
}

}  // namespace

EvalResult run_eval(const FeatureMatrix& matrix, const EvalPlan& plan) {
  if (plan.iterations == 0) throw Error(ErrorCode::InvalidConfig, "iterations must be >= 1");
  if (matrix.rows() == 0) throw Error(ErrorCode::EmptyMatrix, "no rows to evaluate");
  if (matrix.count(Label::Angry) == 0 || matrix.count(Label::Relaxed) == 0) {
    throw Error(ErrorCode::SingleClass, "evaluation needs both labels");
  }
  auto users = matrix.users();
  std::sort(users.begin(), users.end());
  if (plan.mode == EvalMode::LeaveOneUserOut && users.size() < 2) {
    throw Error(ErrorCode::TooFewUsers,
                "leave-one-user-out needs >= 2 users, found " + std::to_string(users.size()));
  }
  if (plan.mode == EvalMode::Split8020 && matrix.rows() < 5) {
    throw Error(ErrorCode::TooFewRows, "80-20 split needs >= 5 rows");
  }

  EvalResult result;
  if (!plan.reselect_per_iteration) {
    SelectionSpec spec = plan.selection;
    spec.jobs = plan.jobs;
    result.global_selection = select_features(matrix, spec, plan.hp);
  }
  const SelectionResult* global = result.global_selection ? &*result.global_selection : nullptr;

  // Parallelism goes to iterations; selection inside an iteration runs
  // inline unless there is only one iteration.
  const std::size_t selection_jobs = plan.iterations == 1 ? plan.jobs : 1;
  result.iterations.resize(plan.iterations);
  parallel_for(plan.iterations, plan.jobs, [&](std::size_t i) {
    try {
      result.iterations[i] = run_iteration(matrix, plan, users, i, global, selection_jobs);
    } catch (const Error& e) {
      throw Error(ErrorCode::IterationFailure,
                  "iteration " + std::to_string(i) + ": " + e.what());
    }
  });

  double acc_sum = 0.0;
  for (const auto& rec : result.iterations) {
    result.confusion += rec.confusion;
    acc_sum += rec.accuracy;
  }
  result.mean_accuracy = acc_sum / static_cast<double>(plan.iterations);
  result.metrics = metrics(result.confusion);
  return result;
}

}  // namespace emg

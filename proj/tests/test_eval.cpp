#include <doctest.h>

#include <algorithm>
#include <set>

#include "emg_affect/error.hpp"
#include "emg_affect/eval.hpp"
#include "support.hpp"

using namespace emg;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an emg::Error");
  return ErrorCode::ParseError;
}

EvalPlan quick_plan(EvalMode mode, std::size_t iterations) {
  EvalPlan plan;
  plan.mode = mode;
  plan.iterations = iterations;
  plan.selection.k = 2;
  return plan;
}

}  // namespace

// The printed references and the 5e-5 bound are decimals with no exact binary
// form; 1e-15 covers that representation error (777/800 sits exactly 5e-5 from
// the printed 0.9713).
constexpr double kTable3Tolerance = 5e-5 + 1e-15;

TEST_CASE("table 3 metrics") {
  const auto m = metrics({777, 88, 23, 712});
  CHECK(std::abs(m.accuracy - 0.9306) <= kTable3Tolerance);
  CHECK(std::abs(m.precision - 0.8983) <= kTable3Tolerance);
  CHECK(std::abs(m.sensitivity - 0.9713) <= kTable3Tolerance);
  CHECK(std::abs(m.specificity - 0.8900) <= kTable3Tolerance);
  CHECK(std::abs(m.fpr - 0.1100) <= kTable3Tolerance);
  CHECK(std::abs(m.fnr - 0.0288) <= kTable3Tolerance);
  CHECK(std::abs(m.f1 - 0.9333) <= kTable3Tolerance);
  CHECK(!m.degenerate);
  CHECK(std::abs(metrics({1473, 331, 76, 1320}).accuracy - 0.8728) <= kTable3Tolerance);
}

TEST_CASE("perfect and degenerate matrices") {
  const auto p = metrics({1, 0, 0, 1});
  CHECK(p.accuracy == 1);
  CHECK(p.precision == 1);
  CHECK(p.sensitivity == 1);
  CHECK(p.specificity == 1);
  CHECK(p.f1 == 1);
  CHECK(p.fpr == 0);
  CHECK(p.fnr == 0);

  const auto d = metrics({0, 0, 0, 5});
  CHECK(d.degenerate);
  CHECK(d.precision == 0);
  CHECK(d.sensitivity == 0);
  CHECK(d.accuracy == 1);
  CHECK(code_of([] { metrics({0, 0, 0, 0}); }) == ErrorCode::EmptyMatrix);
}

TEST_CASE("metric identities") {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    ConfusionMatrix cm{rng.below(1000) + 1, rng.below(1000) + 1, rng.below(1000) + 1, rng.below(1000) + 1};
    const auto m = metrics(cm);
    CHECK(std::abs(m.sensitivity + m.fnr - 1.0) <= 1e-12);
    CHECK(std::abs(m.specificity + m.fpr - 1.0) <= 1e-12);
  }
}

TEST_CASE("confusion accumulation") {
  ConfusionMatrix cm;
  cm.add(Label::Angry, Label::Angry);
  cm.add(Label::Angry, Label::Relaxed);
  cm.add(Label::Relaxed, Label::Angry);
  cm.add(Label::Relaxed, Label::Relaxed);
  cm.add(Label::Relaxed, Label::Relaxed);
  CHECK(cm.tp == 1);
  CHECK(cm.fn == 1);
  CHECK(cm.fp == 1);
  CHECK(cm.tn == 2);
  ConfusionMatrix sum;
  sum += cm;
  sum += cm;
  CHECK(sum.tn == 4);
}

TEST_CASE("LOUO split shapes") {
  const auto m = testsupport::rms_separable_matrix(1);
  const auto users = m.users();
  REQUIRE(users.size() == 10);
  const auto s = split_louo(m, users[3]);
  CHECK(s.train.rows() == 36);
  CHECK(s.test.rows() == 4);
  for (std::size_t i = 0; i < s.test.rows(); ++i) CHECK(s.test.row(i).provenance.user_id == users[3]);
  for (std::size_t i = 0; i < s.train.rows(); ++i) CHECK(s.train.row(i).provenance.user_id != users[3]);
  CHECK(code_of([&] { split_louo(m, "nobody"); }) == ErrorCode::UnknownUser);

  const auto tiny = testsupport::rms_separable_matrix(2, 2, 1);
  const auto t = split_louo(tiny, tiny.users()[0]);
  CHECK(t.train.rows() == 1);
  CHECK(t.test.rows() == 1);
}

namespace {

std::vector<std::vector<double>> row_values(const FeatureMatrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(m.row(i).values);
  return out;
}

}  // namespace

TEST_CASE("80-20 split shapes") {
  const auto m = testsupport::rms_separable_matrix(1);
  const auto s = split_8020(m, 5, true);
  CHECK(s.train.rows() == 32);
  CHECK(s.test.rows() == 8);
  CHECK(s.test.count(Label::Angry) == 4);
  CHECK(row_values(split_8020(m, 5, true).test) == row_values(s.test));
  CHECK(row_values(split_8020(m, 6, true).test) != row_values(s.test));
  auto all = row_values(s.train);
  for (auto& r : row_values(s.test)) all.push_back(r);
  std::sort(all.begin(), all.end());
  auto orig = row_values(m);
  std::sort(orig.begin(), orig.end());
  CHECK(all == orig);
  CHECK(split_8020(m, 5, false).test.rows() == 8);

  const auto small = testsupport::rms_separable_matrix(3, 2, 2);
  CHECK(code_of([&] { split_8020(small, 1, true); }) == ErrorCode::TooFewRows);
  const auto five = testsupport::rms_separable_matrix(3, 5, 1);
  CHECK(split_8020(five, 1, true).test.rows() == 1);
}

TEST_CASE("run_eval on a separable matrix") {
  const auto m = testsupport::rms_separable_matrix(9);
  auto plan = quick_plan(EvalMode::LeaveOneUserOut, 1);
  const auto r = run_eval(m, plan);
  CHECK(r.metrics.accuracy == 1.0);
  REQUIRE(r.iterations.size() == 1);
  CHECK(r.iterations[0].test_user == m.users()[0]);
}

TEST_CASE("run_eval counts and determinism") {
  const auto m = testsupport::rms_separable_matrix(10);
  for (auto mode : {EvalMode::LeaveOneUserOut, EvalMode::Split8020}) {
    auto plan = quick_plan(mode, 12);
    const auto a = run_eval(m, plan);
    const std::size_t per = mode == EvalMode::LeaveOneUserOut ? 4 : 8;
    const auto& cm = a.confusion;
    CHECK(cm.tp + cm.fp + cm.fn + cm.tn == 12 * per);
    for (std::size_t i = 0; i < a.iterations.size(); ++i) {
      const auto& it = a.iterations[i];
      CHECK(it.index == i);
      CHECK(it.confusion.tp + it.confusion.fp + it.confusion.fn + it.confusion.tn == per);
    }
    plan.jobs = 3;
    plan.selection.jobs = 2;
    const auto b = run_eval(m, plan);
    CHECK(b.confusion.tp == a.confusion.tp);
    CHECK(b.confusion.tn == a.confusion.tn);
    CHECK(b.mean_accuracy == a.mean_accuracy);
    for (std::size_t i = 0; i < a.iterations.size(); ++i) {
      CHECK(a.iterations[i].chosen == b.iterations[i].chosen);
      CHECK(a.iterations[i].accuracy == b.iterations[i].accuracy);
    }
  }
}

TEST_CASE("global selection mode") {
  const auto m = testsupport::rms_separable_matrix(11);
  auto plan = quick_plan(EvalMode::LeaveOneUserOut, 3);
  plan.reselect_per_iteration = false;
  const auto r = run_eval(m, plan);
  REQUIRE(r.global_selection.has_value());
  for (const auto& it : r.iterations) CHECK(it.chosen == r.global_selection->chosen);
}

TEST_CASE("run_eval preconditions") {
  auto rows = std::vector<FeatureVector>{};
  const auto base = testsupport::rms_separable_matrix(12);
  for (std::size_t i = 0; i < base.rows(); ++i) {
    auto r = base.row(i);
    r.label = Label::Angry;
    rows.push_back(r);
  }
  const auto all_angry = build_matrix(rows);
  CHECK(code_of([&] { run_eval(all_angry, quick_plan(EvalMode::Split8020, 1)); }) == ErrorCode::SingleClass);

  const auto one_user = testsupport::rms_separable_matrix(13, 1, 4);
  CHECK(code_of([&] { run_eval(one_user, quick_plan(EvalMode::LeaveOneUserOut, 1)); }) ==
        ErrorCode::TooFewUsers);
}

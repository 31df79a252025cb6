// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "emg_affect/cli.hpp"
#include "emg_affect/dataio.hpp"
#include "emg_affect/error.hpp"
#include "emg_affect/eval.hpp"
#include "emg_affect/selection.hpp"
#include "support.hpp"

using namespace emg;

namespace {

// Frozen from the reference run: default corpus, seed 42, 50 LOUO iterations.
constexpr double kReferenceLouoAccuracy = 0.975;
constexpr double kReferenceTolerance = 0.02;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-22s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string cli(std::vector<std::string> args, int* code = nullptr) {
  args.insert(args.begin(), "emg-affect");
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  if (code) *code = rc;
  if (rc != 0 && !code) throw std::runtime_error("cli exited " + std::to_string(rc) + ": " + err.str());
  return out.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string drop_first_line(const std::string& s) { return s.substr(s.find('\n') + 1); }

}  // namespace

int main() {
  const auto work = testsupport::temp_dir("acceptance");
  const auto corpus_dir = work / "corpus";
  std::string matrix_path;

  report("table3-metrics", [] {
    const auto m = metrics({777, 88, 23, 712});
    const std::vector<std::pair<double, double>> pairs = {
        {m.accuracy, 0.9306}, {m.precision, 0.8983}, {m.sensitivity, 0.9713}, {m.specificity, 0.8900},
        {m.fpr, 0.1100},      {m.fnr, 0.0288},       {m.f1, 0.9333}};
    double worst = 0.0;
    for (const auto& [got, want] : pairs) worst = std::max(worst, std::abs(got - want));
    // 1e-15 covers the binary representation of the decimal references.
    return Outcome{worst <= 5e-5 + 1e-15, "max |delta| " + std::to_string(worst)};
  });

  report("table2-accuracy", [] {
    const double acc = metrics({1473, 331, 76, 1320}).accuracy;
    return Outcome{std::abs(acc - 0.8728) <= 5e-5 + 1e-15, "ACC " + fmt(acc)};
  });

  report("louo-synthetic", [&] {
    cli({"--seed", "42", "--out-dir", corpus_dir.string(), "generate"});
    cli({"--out-dir", work.string(), "extract", "--manifest", (corpus_dir / "manifest.csv").string()});
    matrix_path = (work / "matrix.csv").string();
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = cli({"--seed", "42", "--format", "csv", "eval", "--matrix", matrix_path, "--mode", "louo",
                          "--iterations", "50", "--k", "5", "--granularity", "type"});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto key = std::string("\nmean_iteration_accuracy,");
    const auto pos = out.find(key);
    if (pos == std::string::npos) return Outcome{false, "no accuracy in report"};
    const double acc = parse_real(out.substr(pos + key.size(), out.find('\n', pos + 1) - pos - key.size()));
    const bool ok = acc >= 0.90 && std::abs(acc - kReferenceLouoAccuracy) <= kReferenceTolerance && secs < 60.0;
    return Outcome{ok, "mean accuracy " + fmt(acc) + " (reference " + fmt(kReferenceLouoAccuracy) + " +/- " +
                           fmt(kReferenceTolerance) + "), eval " + fmt(secs) + "s"};
  });

  report("smo-oracle", [] {
    Rng rng(20260101);
    double worst_gap = 0.0;
    double worst_kkt = 0.0;
    bool kkt_ok = true;
    for (int i = 0; i < 200; ++i) {
      const auto inst = testsupport::random_smo_instance(rng, 6, 0.2 + 2.0 * rng.uniform());
      SmoOptions opt;
      opt.c = 0.1;
      opt.seed = static_cast<std::uint64_t>(i);
      const auto res = solve_smo(inst.kernel, inst.labels, opt);
      const double obj = dual_objective(inst.kernel, inst.labels, res.alpha);
      worst_gap = std::max(worst_gap, std::abs(obj - testsupport::grid_oracle(inst, opt.c, 0.01)));
      const auto kkt = check_kkt(inst.kernel, inst.labels, res.alpha, res.bias, opt.c, 1e-3);
      kkt_ok = kkt_ok && kkt.satisfied;
      worst_kkt = std::max(worst_kkt, kkt.max_violation);
    }
    return Outcome{worst_gap <= 1e-3 && kkt_ok,
                   "200 instances, max |obj - grid| " + std::to_string(worst_gap) + ", max KKT violation " +
                       std::to_string(worst_kkt)};
  });

  report("feature-identities", [] {
    Rng rng(77);
    std::size_t bad = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto x = testsupport::random_slot(rng, 2, 500);
      const double n1 = static_cast<double>(x.size() - 1);
      const double aac = feature::aac(x);
      const double wl = feature::wl(x);
      if (wl != n1 * aac || aac != wl / n1 || feature::dasdv(x) < aac) ++bad;
      const std::vector<double> c(x.size() + 1, x[0]);
      std::vector<double> got;
      for (auto k : kAllFeatureKinds) got.push_back(feature::compute(k, c));
      if (got != std::vector<double>{x[0], x[0], 0, 0, x[0], 0, 0, 0}) ++bad;
    }
    return Outcome{bad == 0, "10000 random slots, " + std::to_string(bad) + " violations"};
  });

  report("shapes", [&] {
    const auto m = read_matrix(matrix_path);
    const auto louo = split_louo(m, m.users()[3]);
    const auto split = split_8020(m, 42, true);
    SelectionSpec spec;
    const auto sel = select_features(m, spec, {});
    const bool ok = m.rows() == 40 && m.cols() == 80 && louo.train.rows() == 36 && louo.test.rows() == 4 &&
                    split.train.rows() == 32 && split.test.rows() == 8 && sel.evaluated_count == 56;
    return Outcome{ok, std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", louo " +
                           std::to_string(louo.train.rows()) + "/" + std::to_string(louo.test.rows()) +
                           ", 80-20 " + std::to_string(split.train.rows()) + "/" +
                           std::to_string(split.test.rows()) + ", subsets " + std::to_string(sel.evaluated_count)};
  });

  report("round-trips", [&] {
    Rng rng(31337);
    std::size_t mismatches = 0;
    std::size_t untyped = 0;
    const auto m = read_matrix(matrix_path);
    for (int i = 0; i < 1000; ++i) {
      // Recording: random meta and body.
      Recording rec;
      rec.meta.user_id = "u" + std::to_string(rng.below(100000));
      rec.meta.condition = rng.below(2) ? Condition::Open : Condition::Fixed;
      rec.meta.label = rng.below(2) ? Label::Angry : Label::Relaxed;
      rec.meta.sample_rate_hz = static_cast<std::uint32_t>(1 + rng.below(1000));
      rec.meta.extra["note"] = std::to_string(rng.next_u64());
      std::int64_t t = static_cast<std::int64_t>(rng.below(1000));
      for (std::size_t k = rng.below(200); k > 0; --k) {
        rec.timestamps_ms.push_back(t);
        rec.values.push_back(static_cast<int>(rng.below(1000)));
        t += 1 + static_cast<std::int64_t>(rng.below(20));
      }
      const auto rtext = format_recording(rec);
      const auto rback = parse_recording(rtext);
      if (!(rback.meta == rec.meta) || rback.values != rec.values || rback.timestamps_ms != rec.timestamps_ms ||
          format_recording(rback) != rtext) {
        ++mismatches;
      }
      // Model: trained on a random column subset, random numbers perturbed.
      std::vector<std::size_t> cols;
      for (std::size_t c = 0; c < 80; ++c) {
        if (rng.below(16) == 0) cols.push_back(c);
      }
      if (cols.empty()) cols.push_back(rng.below(80));
      SvmModel model;
      model.normalizer.input_dim = 80;
      model.normalizer.columns = cols;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        model.normalizer.mean.push_back(rng.normal() * 1e3);
        model.normalizer.sd.push_back(std::abs(rng.normal()) * 1e-3);
      }
      model.gamma = rng.uniform() + 1e-9;
      model.bias = rng.normal();
      for (std::size_t s = rng.below(30); s > 0; --s) {
        model.dual_coefs.push_back(rng.normal());
        std::vector<double> sv;
        for (std::size_t c = 0; c < cols.size(); ++c) sv.push_back(rng.normal() * std::pow(10.0, std::clamp(rng.normal() * 50, -300.0, 300.0)));
        model.support_vectors.push_back(sv);
      }
      const auto mtext = format_model(model);
      const auto mback = parse_model(mtext);
      if (format_model(mback) != mtext) ++mismatches;
      const auto& row = m.row(rng.below(m.rows())).values;
      if (decision_value(model, row) != decision_value(mback, row) &&
          !(std::isnan(decision_value(model, row)) && std::isnan(decision_value(mback, row)))) {
        ++mismatches;
      }
      // Malformed copies must fail with typed errors only.
      for (std::string text : {rtext, mtext}) {
        const std::size_t pos = text.empty() ? 0 : rng.below(text.size());
        if (!text.empty()) text[pos] = static_cast<char>(rng.below(256));
        try {
          if (text.rfind("emg-affect-model", 0) == 0) {
            parse_model(text);
          } else {
            parse_recording(text);
          }
        } catch (const Error&) {
        } catch (...) {
          ++untyped;
        }
      }
    }
    return Outcome{mismatches == 0 && untyped == 0, "1000 recordings + 1000 models, " +
                                                        std::to_string(mismatches) + " mismatches, " +
                                                        std::to_string(untyped) + " untyped failures"};
  });

  report("determinism", [&] {
    const std::vector<std::string> base = {"--seed", "42", "eval", "--matrix", matrix_path, "--iterations", "20"};
    auto with = [&](std::vector<std::string> pre, std::vector<std::string> extra) {
      std::vector<std::string> a = pre;
      a.insert(a.end(), base.begin(), base.end());
      a.insert(a.end(), extra.begin(), extra.end());
      return cli(a);
    };
    const auto j1 = with({}, {});
    const auto j1b = with({}, {});
    const auto j4 = with({"--jobs", "4"}, {});
    const auto j4b = with({"--jobs", "4"}, {});
    const auto s4 = with({"--jobs", "4"}, {"--mode", "split8020"});
    const auto s4b = with({"--jobs", "4"}, {"--mode", "split8020"});
    const auto s1 = with({}, {"--mode", "split8020"});
    const bool same_flags = j1 == j1b && j4 == j4b && s4 == s4b;
    const bool across_jobs = drop_first_line(j1) == drop_first_line(j4) && drop_first_line(s1) == drop_first_line(s4);
    return Outcome{same_flags && across_jobs,
                   std::string("repeat runs ") + (same_flags ? "identical" : "DIFFER") + ", jobs 1 vs 4 " +
                       (across_jobs ? "identical" : "DIFFER")};
  });

  std::printf("%d failing\n", failures);
  return failures == 0 ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "emg_affect/dataio.hpp"
#include "emg_affect/eval.hpp"
#include "emg_affect/signal.hpp"

namespace emg {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

enum class OutputFormat { Table, Csv, JsonLines };

/// Parses arguments, runs one subcommand and returns its exit code.
/// argv[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CorpusOptions {
  std::size_t users = 10;
  bool fixed = true;
  bool open = true;
  double duration_s = 60.0;
  std::uint32_t sample_rate_hz = 200;
  std::uint64_t seed = 42;
};

/// Writes users x {fixed, open} x {relaxed, angry} recordings plus
/// manifest.csv under out_dir. Each user gets its own jittered profiles.
/// Returns the manifest path.
fs::path generate_corpus(const CorpusOptions& options, const fs::path& out_dir,
                         bool overwrite = false);

/// Per-user profile with amplitude and rate jitter around the defaults.
SynthProfile user_profile(Label label, std::size_t user_index, std::uint64_t corpus_seed,
                          Condition condition);

/// Eval report in the requested format. Contains nothing that varies
/// between identical runs.
std::string format_eval_report(const EvalResult& result, const EvalPlan& plan,
                               const std::string& config_line, OutputFormat format);

/// Table-3 style metric table.
std::string format_metrics_table(const ConfusionMatrix& cm, const MetricsReport& m);

}  // namespace emg

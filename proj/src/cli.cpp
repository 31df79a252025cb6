#include "emg_affect/cli.hpp"

#include <algorithm>
#include <cmath>
#include <csignal>
#include <pthread.h>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "emg_affect/error.hpp"
#include "emg_affect/rng.hpp"
#include "emg_affect/selection.hpp"
#include "emg_affect/server.hpp"
#include "emg_affect/sources.hpp"

namespace emg {

namespace {

constexpr std::uint64_t kDefaultSeed = 42;
constexpr std::uint64_t kSelectionSeedOffset = 0x5E1EC7ULL;
constexpr const char* kCorpusStartedAt = "2026-01-01T00:00:00Z";

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finaliser
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string user_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%02zu", index + 1);
  return buf;
}

std::string join_indices(const std::vector<std::size_t>& v, char sep = ' ') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

std::string chosen_names(const std::vector<std::size_t>& chosen, Granularity g) {
  std::string out;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (i) out += ' ';
    out += g == Granularity::FeatureType
               ? std::string(to_string(static_cast<FeatureKind>(chosen[i])))
               : column_name(column_label(chosen[i]));
  }
  return out;
}

std::string_view strategy_name(SearchStrategy s) {
  switch (s) {
    case SearchStrategy::Exhaustive: return "exhaustive";
    case SearchStrategy::GreedyForward: return "greedy";
    case SearchStrategy::Auto: return "auto";
  }
  return "auto";
}

std::string_view mode_name(EvalMode m) {
  return m == EvalMode::LeaveOneUserOut ? "louo" : "split8020";
}

}  // namespace

SynthProfile user_profile(Label label, std::size_t user_index, std::uint64_t corpus_seed,
                          Condition condition) {
  Rng user_rng(mix(corpus_seed ^ mix(user_index + 1)));
  // Per-user factors are shared by both labels and both conditions: overall
  // muscle gain (noise and spike size), resting tone and how strongly the
  // user reacts when angry.
  const double baseline = 200.0 + 200.0 * user_rng.uniform();
  const double gain = 0.5 + 1.1 * user_rng.uniform();
  const double reactivity = 0.45 + 0.75 * user_rng.uniform();
  const double tempo = 0.7 + 0.6 * user_rng.uniform();

  const std::uint64_t rec_seed =
      mix(corpus_seed ^ mix((user_index + 1) * 4 + static_cast<std::uint64_t>(condition) * 2 +
                            static_cast<std::uint64_t>(label)));
  SynthProfile p = SynthProfile::defaults_for(label, rec_seed);
  const SynthProfile calm = SynthProfile::relaxed(rec_seed);
  p.baseline = baseline;
  // Angry parameters move from the relaxed defaults towards the angry
  // defaults by the user's reactivity.
  auto blend = [reactivity](double relaxed, double angry) { return relaxed + reactivity * (angry - relaxed); };
  if (label == Label::Angry) {
    p.noise_sd = blend(calm.noise_sd, p.noise_sd);
    p.spike_rate_hz = blend(calm.spike_rate_hz, p.spike_rate_hz);
    p.spike_amplitude_mean = blend(calm.spike_amplitude_mean, p.spike_amplitude_mean);
  }
  p.noise_sd *= gain;
  p.spike_amplitude_mean *= gain;
  p.spike_rate_hz *= tempo * (condition == Condition::Open ? 1.1 : 1.0);
  return p;
}

fs::path generate_corpus(const CorpusOptions& options, const fs::path& out_dir, bool overwrite) {
  if (options.users == 0) throw Error(ErrorCode::InvalidConfig, "users must be >= 1");
  if (!options.fixed && !options.open) throw Error(ErrorCode::InvalidConfig, "no conditions selected");
  std::vector<ManifestEntry> entries;
  for (std::size_t u = 0; u < options.users; ++u) {
    const std::string user = user_name(u);
    for (Condition cond : {Condition::Fixed, Condition::Open}) {
      if ((cond == Condition::Fixed && !options.fixed) || (cond == Condition::Open && !options.open)) {
        continue;
      }
      for (Label label : {Label::Relaxed, Label::Angry}) {
        const auto profile = user_profile(label, u, options.seed, cond);
        const auto series = generate_synthetic(profile, options.duration_s, options.sample_rate_hz);
        RecordingMeta meta;
        meta.user_id = user;
        meta.condition = cond;
        meta.label = label;
        meta.started_at = kCorpusStartedAt;
        const std::string rel = user + "/" + std::string(to_string(cond)) + "_" +
                                std::string(to_string(label)) + ".csv";
        write_recording(make_recording(series, meta), out_dir / rel, overwrite);
        entries.push_back({rel, user, cond, label});
      }
    }
  }
  const auto manifest = out_dir / "manifest.csv";
  write_manifest(entries, manifest, overwrite);
  return manifest;
}

std::string format_metrics_table(const ConfusionMatrix& cm, const MetricsReport& m) {
  std::ostringstream os;
  char buf[128];
  os << "Confusion matrix (rows: predicted, columns: original)\n";
  std::snprintf(buf, sizeof(buf), "%-10s %10s %10s\n", "", "Angry", "Relaxed");
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-10s %10llu %10llu\n", "Angry",
                static_cast<unsigned long long>(cm.tp), static_cast<unsigned long long>(cm.fp));
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-10s %10llu %10llu\n", "Relaxed",
                static_cast<unsigned long long>(cm.fn), static_cast<unsigned long long>(cm.tn));
  os << buf << "\n";
  const std::vector<std::tuple<const char*, double, const char*>> rows = {
      {"Accuracy", m.accuracy, "ACC = (TP + TN) / (P + N)"},
      {"Precision", m.precision, "PPV = TP / (TP + FP)"},
      {"Sensitivity", m.sensitivity, "TPR = TP / (TP + FN)"},
      {"Specificity", m.specificity, "SPC = TN / (FP + TN)"},
      {"False Positive Rate", m.fpr, "FPR = FP / (FP + TN)"},
      {"False Negative Rate", m.fnr, "FNR = FN / (FN + TP)"},
      {"F1 Score", m.f1, "F1 = 2TP / (2TP + FP + FN)"},
  };
  std::snprintf(buf, sizeof(buf), "%-20s %-8s %s\n", "Measure", "Value", "Derivation");
  os << buf;
  for (const auto& [name, value, formula] : rows) {
    std::snprintf(buf, sizeof(buf), "%-20s %-8s %s\n", name, fixed4(value).c_str(), formula);
    os << buf;
  }
  if (m.degenerate) os << "(some ratios had a zero denominator and are reported as 0)\n";
  return os.str();
}

std::string format_eval_report(const EvalResult& result, const EvalPlan& plan,
                               const std::string& config_line, OutputFormat format) {
  std::ostringstream os;
  const auto& cm = result.confusion;
  const auto& m = result.metrics;
  const std::string ratio =
      cm.fp == 0 ? std::string("inf") : format_real(static_cast<double>(cm.fn) / static_cast<double>(cm.fp));

  // How often each unit was chosen across iterations.
  std::map<std::size_t, std::size_t> chosen_counts;
  for (const auto& it : result.iterations) {
    for (std::size_t c : it.chosen) ++chosen_counts[c];
  }
  const Granularity g = plan.selection.granularity;
  auto unit_name = [g](std::size_t c) {
    return g == Granularity::FeatureType ? std::string(to_string(static_cast<FeatureKind>(c)))
                                         : column_name(column_label(c));
  };

  if (format == OutputFormat::JsonLines) {
    using nlohmann::json;
    json summary{{"record", "summary"},
                 {"config", config_line},
                 {"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn},
                 {"accuracy", m.accuracy}, {"precision", m.precision},
                 {"sensitivity", m.sensitivity}, {"specificity", m.specificity},
                 {"fpr", m.fpr}, {"fnr", m.fnr}, {"f1", m.f1},
                 {"degenerate", m.degenerate},
                 {"mean_iteration_accuracy", result.mean_accuracy},
                 {"fn_fp_ratio", ratio}};
    os << summary.dump() << "\n";
    for (const auto& it : result.iterations) {
      json line{{"record", "iteration"}, {"index", it.index}, {"accuracy", it.accuracy},
                {"tp", it.confusion.tp}, {"fp", it.confusion.fp},
                {"fn", it.confusion.fn}, {"tn", it.confusion.tn},
                {"chosen", it.chosen}, {"selection_score", it.selection_score}};
      if (!it.test_user.empty()) line["test_user"] = it.test_user;
      os << line.dump() << "\n";
    }
    return os.str();
  }

  if (format == OutputFormat::Csv) {
    os << "# " << config_line << "\n";
    os << "key,value\n";
    os << "tp," << cm.tp << "\nfp," << cm.fp << "\nfn," << cm.fn << "\ntn," << cm.tn << "\n";
    os << "accuracy," << format_real(m.accuracy) << "\n";
    os << "precision," << format_real(m.precision) << "\n";
    os << "sensitivity," << format_real(m.sensitivity) << "\n";
    os << "specificity," << format_real(m.specificity) << "\n";
    os << "fpr," << format_real(m.fpr) << "\n";
    os << "fnr," << format_real(m.fnr) << "\n";
    os << "f1," << format_real(m.f1) << "\n";
    os << "mean_iteration_accuracy," << format_real(result.mean_accuracy) << "\n";
    os << "fn_fp_ratio," << ratio << "\n";
    os << "\niteration,test_user,accuracy,tp,fp,fn,tn,chosen\n";
    for (const auto& it : result.iterations) {
      os << it.index << "," << it.test_user << "," << format_real(it.accuracy) << ","
         << it.confusion.tp << "," << it.confusion.fp << "," << it.confusion.fn << ","
         << it.confusion.tn << "," << join_indices(it.chosen) << "\n";
    }
    return os.str();
  }

  os << "# " << config_line << "\n\n";
  os << format_metrics_table(cm, m) << "\n";
  os << "Mean per-iteration accuracy: " << fixed4(result.mean_accuracy) << " over "
     << result.iterations.size() << " iterations\n";
  os << "Angry->Relaxed / Relaxed->Angry confusions (fn/fp): " << cm.fn << "/" << cm.fp
     << " = " << (cm.fp == 0 ? std::string("inf") : fixed4(static_cast<double>(cm.fn) / cm.fp))
     << "\n";
  if (result.global_selection) {
    os << "Global selection: " << chosen_names(result.global_selection->chosen, g)
       << " (cv " << fixed4(result.global_selection->score) << ")\n";
  }
  os << "\nSelection frequency\n";
  for (const auto& [unit, count] : chosen_counts) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  %-10s %zu\n", unit_name(unit).c_str(), count);
    os << buf;
  }
  os << "\nPer-iteration trace\n";
  os << "iteration,test_user,accuracy,chosen\n";
  for (const auto& it : result.iterations) {
    os << it.index << "," << it.test_user << "," << fixed4(it.accuracy) << ","
       << chosen_names(it.chosen, g) << "\n";
  }
  return os.str();
}

namespace {

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string format = "table";
  std::size_t jobs = 1;
};

std::uint64_t resolve_seed(const GlobalFlags& g) {
  if (g.seed) return *g.seed;
  if (const char* env = std::getenv("EMG_AFFECT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, std::string("EMG_AFFECT_SEED is not an integer: ") + env);
    }
  }
  return kDefaultSeed;
}

OutputFormat resolve_format(const std::string& f) {
  if (f == "csv") return OutputFormat::Csv;
  if (f == "json-lines") return OutputFormat::JsonLines;
  return OutputFormat::Table;
}

struct ExtractFlags {
  std::size_t slots = 10;
  double head_s = 10.0;
  double tail_s = 5.0;
  std::size_t mavslp_segments = 3;
  bool center = false;

  ExtractOptions options() const { return {head_s, tail_s, slots, mavslp_segments, center}; }
  std::string describe() const {
    return "slots=" + std::to_string(slots) + " head_s=" + format_real(head_s) +
           " tail_s=" + format_real(tail_s) + " mavslp_segments=" + std::to_string(mavslp_segments) +
           " center=" + (center ? "true" : "false");
  }
  void add(CLI::App* cmd) {
    cmd->add_option("--slots", slots, "Time slots per recording")->check(CLI::PositiveNumber);
    cmd->add_option("--head", head_s, "Leading rest window to drop (s)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--tail", tail_s, "Trailing rest window to drop (s)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--mavslp-segments", mavslp_segments, "Sub-segments for MAVSLP")
        ->check(CLI::Range(2, 1000));
    cmd->add_flag("--center", center, "Subtract each recording's mean before extraction");
  }
};

struct ModelFlags {
  std::size_t k = 5;
  std::string granularity = "type";
  std::string strategy = "auto";
  std::uint64_t budget = 100000;
  double c = 1.0;
  double gamma = 0.0;  // 0 = auto
  double tolerance = 1e-3;
  int max_passes = 200;
  std::size_t folds = 5;
  std::optional<std::uint64_t> selection_seed;

  void add(CLI::App* cmd) {
    cmd->add_option("--k", k, "Number of features to select")->check(CLI::PositiveNumber);
    cmd->add_option("--granularity", granularity, "type | column")
        ->check(CLI::IsMember({"type", "column"}));
    cmd->add_option("--strategy", strategy, "auto | exhaustive | greedy")
        ->check(CLI::IsMember({"auto", "exhaustive", "greedy"}));
    cmd->add_option("--budget", budget, "Max subsets for exhaustive search")->check(CLI::PositiveNumber);
    cmd->add_option("--c", c, "SVM box constraint C")->check(CLI::PositiveNumber);
    cmd->add_option("--gamma", gamma, "RBF gamma (0 = auto)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--tolerance", tolerance, "SMO KKT tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--max-passes", max_passes, "SMO outer pass limit")->check(CLI::PositiveNumber);
    cmd->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
    cmd->add_option("--selection-seed", selection_seed, "CV fold seed for feature selection");
  }

  SvmHyperparams hp(std::uint64_t seed) const {
    SvmHyperparams h;
    h.c = c;
    if (gamma > 0.0) h.gamma = gamma;
    h.tolerance = tolerance;
    h.max_passes = max_passes;
    h.folds = folds;
    h.seed = seed;
    return h;
  }

  SelectionSpec spec(std::uint64_t seed, std::size_t jobs) const {
    SelectionSpec s;
    s.granularity = granularity == "column" ? Granularity::Column : Granularity::FeatureType;
    s.k = k;
    s.strategy = strategy == "exhaustive" ? SearchStrategy::Exhaustive
                 : strategy == "greedy"   ? SearchStrategy::GreedyForward
                                          : SearchStrategy::Auto;
    s.budget = budget;
    s.seed = selection_seed.value_or(seed + kSelectionSeedOffset);
    s.jobs = jobs;
    return s;
  }

  std::string describe(std::uint64_t seed) const {
    return "k=" + std::to_string(k) + " granularity=" + granularity + " strategy=" + strategy +
           " budget=" + std::to_string(budget) + " c=" + format_real(c) +
           " gamma=" + (gamma > 0.0 ? format_real(gamma) : std::string("auto")) +
           " tolerance=" + format_real(tolerance) + " max_passes=" + std::to_string(max_passes) +
           " folds=" + std::to_string(folds) +
           " selection_seed=" + std::to_string(selection_seed.value_or(seed + kSelectionSeedOffset));
  }
};

FeatureMatrix load_matrix_input(const std::string& matrix_path, const std::string& manifest_path,
                                const ExtractFlags& extract, std::size_t jobs) {
  if (!matrix_path.empty()) return read_matrix(matrix_path);
  if (!manifest_path.empty()) return extract_corpus(load_corpus(manifest_path), extract.options(), jobs);
  throw Error(ErrorCode::InvalidConfig, "either --matrix or --manifest is required");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forearm EMG affect pipeline: synthesize, extract, select, train, evaluate, capture"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Random seed (falls back to $EMG_AFFECT_SEED, then 42)");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--format", g.format, "table | csv | json-lines")
      ->check(CLI::IsMember({"table", "csv", "json-lines"}));
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

  // generate
  CorpusOptions corpus;
  std::string conditions = "both";
  bool overwrite = false;
  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus and manifest");
  gen->add_option("--users", corpus.users, "Number of users")->check(CLI::PositiveNumber);
  gen->add_option("--conditions", conditions, "fixed | open | both")
      ->check(CLI::IsMember({"fixed", "open", "both"}));
  gen->add_option("--duration", corpus.duration_s, "Recording length (s)")->check(CLI::PositiveNumber);
  gen->add_option("--rate", corpus.sample_rate_hz, "Sample rate (Hz)")->check(CLI::Range(1, 1000));
  gen->add_flag("--overwrite", overwrite, "Replace existing files");

  // ingest
  std::string ingest_input;
  std::string ingest_output;
  RecordingMeta ingest_meta;
  std::string ingest_condition = "fixed";
  std::string ingest_label = "relaxed";
  auto* ingest = app.add_subcommand("ingest", "Convert a raw serial capture into a recording file");
  ingest->add_option("--input", ingest_input, "Line-delimited ADC capture")->required();
  ingest->add_option("--output", ingest_output, "Recording file to write")->required();
  ingest->add_option("--user", ingest_meta.user_id, "User id")->required();
  ingest->add_option("--condition", ingest_condition, "fixed | open")->check(CLI::IsMember({"fixed", "open"}));
  ingest->add_option("--label", ingest_label, "relaxed | angry")->check(CLI::IsMember({"relaxed", "angry"}));
  ingest->add_option("--rate", ingest_meta.sample_rate_hz, "Capture rate (Hz)")->check(CLI::Range(1, 1000));
  ingest->add_option("--started-at", ingest_meta.started_at, "UTC ISO-8601 start time");
  ingest->add_flag("--overwrite", overwrite, "Replace an existing file");

  // extract
  ExtractFlags extract;
  std::string manifest_path;
  std::string matrix_out = "matrix.csv";
  auto* ext = app.add_subcommand("extract", "Trim, segment and extract the feature matrix");
  ext->add_option("--manifest", manifest_path, "Corpus manifest")->required();
  ext->add_option("--output", matrix_out, "Matrix file (relative to --out-dir)");
  extract.add(ext);

  // select
  ModelFlags model_flags;
  std::string matrix_path;
  std::vector<std::size_t> sweep;
  std::string log_path;
  auto* sel = app.add_subcommand("select", "Wrapper feature-subset search");
  sel->add_option("--matrix", matrix_path, "Feature matrix file");
  sel->add_option("--manifest", manifest_path, "Corpus manifest (extracts on the fly)");
  sel->add_option("--sweep", sweep, "Run one search per k, e.g. --sweep 3 5 7 9");
  sel->add_option("--log", log_path, "Write every scored subset here");
  extract.add(sel);
  model_flags.add(sel);

  // train
  std::string model_out = "model.txt";
  auto* trn = app.add_subcommand("train", "Select features on all rows and fit the SVM");
  trn->add_option("--matrix", matrix_path, "Feature matrix file");
  trn->add_option("--manifest", manifest_path, "Corpus manifest (extracts on the fly)");
  trn->add_option("--output", model_out, "Model file (relative to --out-dir)");
  extract.add(trn);
  model_flags.add(trn);

  // predict
  std::string model_path;
  std::string recording_path;
  auto* pred = app.add_subcommand("predict", "Classify one recording");
  pred->add_option("--model", model_path, "Model file")->required();
  pred->add_option("--recording", recording_path, "Recording file")->required();
  extract.add(pred);

  // eval
  std::string mode = "louo";
  std::size_t iterations = 400;
  bool global_selection = false;
  bool no_stratify = false;
  auto* ev = app.add_subcommand("eval", "Leave-one-user-out or 80-20 evaluation");
  ev->add_option("--matrix", matrix_path, "Feature matrix file");
  ev->add_option("--manifest", manifest_path, "Corpus manifest (extracts on the fly)");
  ev->add_option("--mode", mode, "louo | split8020")
      ->check(CLI::IsMember({"louo", "split8020", "split2080", "8020"}));
  ev->add_option("--iterations", iterations, "Repetitions")->check(CLI::PositiveNumber);
  ev->add_flag("--global-selection", global_selection, "Select features once on all rows");
  ev->add_flag("--no-stratify", no_stratify, "Plain random 80-20 split");
  extract.add(ev);
  model_flags.add(ev);

  // report
  ConfusionMatrix counts;
  auto* rep = app.add_subcommand("report", "Metric table for given confusion counts");
  rep->add_option("--tp", counts.tp, "True positives (Angry as Angry)")->required();
  rep->add_option("--fp", counts.fp, "False positives (Relaxed as Angry)")->required();
  rep->add_option("--fn", counts.fn, "False negatives (Angry as Relaxed)")->required();
  rep->add_option("--tn", counts.tn, "True negatives (Relaxed as Relaxed)")->required();

  // serve
  std::string bind_addr = "127.0.0.1:8080";
  std::string ui_dir;
  auto* srv = app.add_subcommand("serve", "Run the session-capture service");
  srv->add_option("--bind", bind_addr, "host:port");
  srv->add_option("--ui-dir", ui_dir, "Static session UI bundle to serve at /");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const std::uint64_t seed = resolve_seed(g);
    const OutputFormat format = resolve_format(g.format);
    const fs::path out_dir(g.out_dir);

    if (*gen) {
      corpus.seed = seed;
      corpus.fixed = conditions != "open";
      corpus.open = conditions != "fixed";
      out << "# generate seed=" << seed << " users=" << corpus.users << " conditions=" << conditions
          << " duration_s=" << format_real(corpus.duration_s) << " rate_hz=" << corpus.sample_rate_hz
          << " out_dir=" << out_dir.string() << "\n";
      const auto manifest = generate_corpus(corpus, out_dir, overwrite);
      out << "manifest " << manifest.string() << "\n";
      return kExitOk;
    }

    if (*ingest) {
      out << "# ingest input=" << ingest_input << " rate_hz=" << ingest_meta.sample_rate_hz << "\n";
      ingest_meta.condition = parse_condition(ingest_condition);
      ingest_meta.label = parse_label(ingest_label);
      const auto text = read_text_file(ingest_input);
      Recording rec;
      rec.meta = ingest_meta;
      std::size_t index = 0;
      std::size_t gaps = 0;
      std::size_t start = 0;
      while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        const auto line = std::string_view(text).substr(start, nl - start);
        start = nl + 1;
        const auto t = std::llround(static_cast<double>(index++) * 1000.0 / ingest_meta.sample_rate_hz);
        try {
          rec.values.push_back(parse_serial_frame(line));
          rec.timestamps_ms.push_back(t);
        } catch (const Error&) {
          ++gaps;
        }
      }
      rec.meta.extra["gap_count"] = std::to_string(gaps);
      write_recording(rec, ingest_output, overwrite);
      out << "wrote " << ingest_output << " samples=" << rec.values.size() << " gaps=" << gaps << "\n";
      return kExitOk;
    }

    if (*ext) {
      out << "# extract manifest=" << manifest_path << " " << extract.describe() << "\n";
      const auto matrix = extract_corpus(load_corpus(manifest_path), extract.options(), g.jobs);
      const auto path = out_dir / matrix_out;
      write_matrix(matrix, path);
      out << "wrote " << path.string() << " rows=" << matrix.rows() << " cols=" << matrix.cols() << "\n";
      return kExitOk;
    }

    if (*sel) {
      const auto matrix = load_matrix_input(matrix_path, manifest_path, extract, g.jobs);
      auto spec = model_flags.spec(seed, g.jobs);
      spec.keep_log = !log_path.empty();
      const auto hp = model_flags.hp(seed);
      out << "# select seed=" << seed << " " << model_flags.describe(seed) << "\n";
      std::vector<std::size_t> ks = sweep.empty() ? std::vector<std::size_t>{model_flags.k} : sweep;
      const auto results = sweep_k(matrix, ks, spec, hp);
      std::string log = "k,subset,score\n";
      out << (format == OutputFormat::Csv ? "k,strategy,evaluated,score,chosen\n" : "");
      for (const auto& [k, r] : results) {
        if (format == OutputFormat::Csv) {
          out << k << "," << strategy_name(r.strategy_used) << "," << r.evaluated_count << ","
              << format_real(r.score) << "," << join_indices(r.chosen) << "\n";
        } else if (format == OutputFormat::JsonLines) {
          out << nlohmann::json{{"k", k},
                                {"strategy", strategy_name(r.strategy_used)},
                                {"evaluated", r.evaluated_count},
                                {"score", r.score},
                                {"chosen", r.chosen}}
                     .dump()
              << "\n";
        } else {
          out << "k=" << k << " strategy=" << strategy_name(r.strategy_used)
              << " evaluated=" << r.evaluated_count << " cv_accuracy=" << fixed4(r.score)
              << " chosen=" << chosen_names(r.chosen, spec.granularity) << "\n";
        }
        for (const auto& [subset, score] : r.per_subset_log) {
          log += std::to_string(k) + "," + join_indices(subset) + "," + format_real(score) + "\n";
        }
      }
      if (!log_path.empty()) write_text_file(log_path, log, true);
      return kExitOk;
    }

    if (*trn) {
      const auto matrix = load_matrix_input(matrix_path, manifest_path, extract, g.jobs);
      const auto spec = model_flags.spec(seed, g.jobs);
      const auto hp = model_flags.hp(seed);
      out << "# train seed=" << seed << " " << model_flags.describe(seed) << "\n";
      const auto selection = select_features(matrix, spec, hp);
      TrainReport report;
      const auto model = train(matrix, columns_for(matrix, spec.granularity, selection.chosen), hp, &report);
      const auto path = out_dir / model_out;
      save_model(model, path);
      out << "chosen " << chosen_names(selection.chosen, spec.granularity) << " cv_accuracy "
          << fixed4(selection.score) << "\n";
      out << "support_vectors " << report.support_vector_count << " converged "
          << (report.converged ? "true" : "false") << "\n";
      out << "wrote " << path.string() << "\n";
      return kExitOk;
    }

    if (*pred) {
      out << "# predict model=" << model_path << " recording=" << recording_path << " "
          << extract.describe() << "\n";
      const auto model = load_model(model_path);
      const auto rec = read_recording(recording_path);
      auto options = extract.options();
      if (model.normalizer.input_dim % kFeatureKindCount != 0) {
        throw Error(ErrorCode::DimensionMismatch, "model input width is not a multiple of 8");
      }
      options.slot_count = model.normalizer.input_dim / kFeatureKindCount;
      const auto row = extract_recording(rec.series(), rec.meta.label,
                                         {rec.meta.user_id, rec.meta.condition}, options);
      const double score = decision_value(model, row.values);
      const Label label = score >= 0.0 ? Label::Angry : Label::Relaxed;
      out << "label " << to_string(label) << "\n";
      out << "decision " << format_real(score) << "\n";
      return kExitOk;
    }

    if (*ev) {
      const auto matrix = load_matrix_input(matrix_path, manifest_path, extract, g.jobs);
      EvalPlan plan;
      plan.mode = mode == "louo" ? EvalMode::LeaveOneUserOut : EvalMode::Split8020;
      plan.iterations = iterations;
      plan.seed = seed;
      plan.selection = model_flags.spec(seed, g.jobs);
      plan.hp = model_flags.hp(seed);
      plan.reselect_per_iteration = !global_selection;
      plan.stratify_split = !no_stratify;
      plan.jobs = g.jobs;
      const std::string config_line =
          "eval mode=" + std::string(mode_name(plan.mode)) + " iterations=" + std::to_string(iterations) +
          " seed=" + std::to_string(seed) + " " + model_flags.describe(seed) +
          " reselect=" + (plan.reselect_per_iteration ? "true" : "false") +
          " stratify=" + (plan.stratify_split ? "true" : "false") + " jobs=" + std::to_string(g.jobs) +
          " rows=" + std::to_string(matrix.rows()) + " cols=" + std::to_string(matrix.cols());
      const auto result = run_eval(matrix, plan);
      out << format_eval_report(result, plan, config_line, format);
      return kExitOk;
    }

    if (*rep) {
      const auto m = metrics(counts);
      out << "# report tp=" << counts.tp << " fp=" << counts.fp << " fn=" << counts.fn
          << " tn=" << counts.tn << "\n";
      if (format == OutputFormat::Table) {
        out << format_metrics_table(counts, m);
      } else {
        out << "accuracy," << format_real(m.accuracy) << "\nprecision," << format_real(m.precision)
            << "\nsensitivity," << format_real(m.sensitivity) << "\nspecificity,"
            << format_real(m.specificity) << "\nfpr," << format_real(m.fpr) << "\nfnr,"
            << format_real(m.fnr) << "\nf1," << format_real(m.f1) << "\n";
      }
      return kExitOk;
    }

    if (*srv) {
      ServerOptions options;
      const auto colon = bind_addr.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--bind expects host:port");
      options.host = bind_addr.substr(0, colon);
      try {
        options.port = std::stoi(bind_addr.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "bad port in --bind");
      }
      options.static_dir = ui_dir;
      SteadyClock clock;
      SessionManager manager(clock, out_dir);
      // Block the stop signals before any thread starts so only sigwait sees them.
      sigset_t stop_signals;
      sigemptyset(&stop_signals);
      sigaddset(&stop_signals, SIGINT);
      sigaddset(&stop_signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
      SessionServer server(manager, options);
      const int port = server.start();
      out << "# serve bind=" << options.host << ":" << port << " out_dir=" << out_dir.string() << "\n"
          << std::flush;
      int sig = 0;
      sigwait(&stop_signals, &sig);
      server.stop();
      pthread_sigmask(SIG_UNBLOCK, &stop_signals, nullptr);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace emg

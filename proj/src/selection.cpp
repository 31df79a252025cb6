#include "emg_affect/selection.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "emg_affect/error.hpp"
#include "emg_affect/parallel.hpp"

namespace emg {

std::size_t candidate_count(const FeatureMatrix& matrix, Granularity granularity) {
  return granularity == Granularity::FeatureType ? kFeatureKindCount : matrix.cols();
}

std::uint64_t combination_count(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step.
    const std::uint64_t factor = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    result = result * factor / i;
  }
  return result;
}

std::vector<std::size_t> columns_for(const FeatureMatrix& matrix, Granularity granularity,
                                     std::span<const std::size_t> chosen) {
  std::vector<std::size_t> cols;
  if (granularity == Granularity::Column) {
    cols.assign(chosen.begin(), chosen.end());
  } else {
    for (std::size_t kind : chosen) {
      if (kind >= kFeatureKindCount) {
        throw Error(ErrorCode::KOutOfRange, "feature kind " + std::to_string(kind));
      }
      for (std::size_t slot = 0; slot < matrix.slot_count(); ++slot) {
        cols.push_back(slot * kFeatureKindCount + kind);
      }
    }
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

namespace {

double score_subset(const FeatureMatrix& matrix, Granularity granularity,
                    std::span<const std::size_t> subset, const SvmHyperparams& cv_hp) {
  const auto cols = columns_for(matrix, granularity, subset);
  return cross_validate(matrix, cols, cv_hp);
}

std::vector<std::vector<std::size_t>> enumerate_subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> current(k);
  for (std::size_t i = 0; i < k; ++i) current[i] = i;
  for (;;) {
    out.push_back(current);
    // Advance to the next combination in lexicographic order.
    std::size_t i = k;
    while (i > 0 && current[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t j = i; j < k; ++j) current[j] = current[j - 1] + 1;
  }
  return out;
}

SelectionResult exhaustive(const FeatureMatrix& matrix, const SelectionSpec& spec,
                           const SvmHyperparams& cv_hp, std::size_t n) {
  const auto subsets = enumerate_subsets(n, spec.k);
  std::vector<double> scores(subsets.size());
  parallel_for(subsets.size(), spec.jobs, [&](std::size_t i) {
    scores[i] = score_subset(matrix, spec.granularity, subsets[i], cv_hp);
  });
  SelectionResult result;
  result.strategy_used = SearchStrategy::Exhaustive;
  result.evaluated_count = subsets.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  result.chosen = subsets[best];
  result.score = scores[best];
  if (spec.keep_log) {
    for (std::size_t i = 0; i < subsets.size(); ++i) {
      result.per_subset_log.emplace_back(subsets[i], scores[i]);
    }
  }
  return result;
}

SelectionResult greedy_forward(const FeatureMatrix& matrix, const SelectionSpec& spec,
                               const SvmHyperparams& cv_hp, std::size_t n) {
  SelectionResult result;
  result.strategy_used = SearchStrategy::GreedyForward;
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(n, false);
  for (std::size_t round = 0; round < spec.k; ++round) {
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < n; ++c) {
      if (!taken[c]) candidates.push_back(c);
    }
    std::vector<std::vector<std::size_t>> trials(candidates.size(), chosen);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      trials[i].push_back(candidates[i]);
      std::sort(trials[i].begin(), trials[i].end());
    }
    std::vector<double> scores(candidates.size());
    parallel_for(candidates.size(), spec.jobs, [&](std::size_t i) {
      scores[i] = score_subset(matrix, spec.granularity, trials[i], cv_hp);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[best]) best = i;
    }
    result.evaluated_count += candidates.size();
    if (spec.keep_log) {
      for (std::size_t i = 0; i < trials.size(); ++i) {
        result.per_subset_log.emplace_back(trials[i], scores[i]);
      }
    }
    taken[candidates[best]] = true;
    chosen = trials[best];
    result.score = scores[best];
  }
  result.chosen = chosen;
  return result;
}

}  // namespace

SelectionResult select_features(const FeatureMatrix& matrix, const SelectionSpec& spec,
                                const SvmHyperparams& hp) {
  const std::size_t n = candidate_count(matrix, spec.granularity);
  if (spec.k == 0 || spec.k > n) {
    throw Error(ErrorCode::KOutOfRange,
                "k = " + std::to_string(spec.k) + " with " + std::to_string(n) + " candidates");
  }
  SvmHyperparams cv_hp = hp;
  cv_hp.seed = spec.seed;

  const std::uint64_t combos = combination_count(n, spec.k);
  switch (spec.strategy) {
    case SearchStrategy::Exhaustive:
      if (combos > spec.budget) {
        throw Error(ErrorCode::BudgetExceeded, std::to_string(combos) + " subsets exceed budget " +
                                                   std::to_string(spec.budget));
      }
      return exhaustive(matrix, spec, cv_hp, n);
    case SearchStrategy::GreedyForward:
      return greedy_forward(matrix, spec, cv_hp, n);
    case SearchStrategy::Auto:
      return combos <= spec.budget ? exhaustive(matrix, spec, cv_hp, n)
                                   : greedy_forward(matrix, spec, cv_hp, n);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown search strategy");
}

std::vector<std::pair<std::size_t, SelectionResult>> sweep_k(
    const FeatureMatrix& matrix, std::span<const std::size_t> ks, const SelectionSpec& spec,
    const SvmHyperparams& hp) {
  std::vector<std::pair<std::size_t, SelectionResult>> out;
  out.reserve(ks.size());
  for (std::size_t k : ks) {
    SelectionSpec s = spec;
    s.k = k;
    out.emplace_back(k, select_features(matrix, s, hp));
  }
  return out;
}

}  // namespace emg

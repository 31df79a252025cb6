#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "emg_affect/features.hpp"
#include "emg_affect/svm.hpp"

namespace emg {

/// What a selected index refers to: one of the eight feature kinds (all of
/// its slot columns) or a single matrix column.
enum class Granularity { FeatureType, Column };
enum class SearchStrategy { Exhaustive, GreedyForward, Auto };

struct SelectionSpec {
  Granularity granularity = Granularity::FeatureType;
  std::size_t k = 5;
  SearchStrategy strategy = SearchStrategy::Auto;
  std::uint64_t budget = 100000;  // max subsets an exhaustive search may score
  std::uint64_t seed = 0;         // CV fold seed used while scoring subsets
  bool keep_log = false;
  std::size_t jobs = 1;
};

struct SelectionResult {
  std::vector<std::size_t> chosen;  // sorted
  double score = 0.0;               // mean CV accuracy of `chosen`
  std::size_t evaluated_count = 0;
  SearchStrategy strategy_used = SearchStrategy::Exhaustive;
  std::vector<std::pair<std::vector<std::size_t>, double>> per_subset_log;
};

/// Number of selectable units (8 kinds, or every column).
std::size_t candidate_count(const FeatureMatrix& matrix, Granularity granularity);

/// Binomial coefficient, saturating at UINT64_MAX.
std::uint64_t combination_count(std::uint64_t n, std::uint64_t k);

/// Expands chosen units into sorted matrix columns.
std::vector<std::size_t> columns_for(const FeatureMatrix& matrix, Granularity granularity,
                                     std::span<const std::size_t> chosen);

/// Wrapper search scored by cross_validate with fold seed spec.seed.
/// Exhaustive: every k-subset, ties to the lexicographically smallest set.
/// GreedyForward: k rounds adding the best single unit, ties to the
/// smallest index. Auto picks exhaustive when C(n, k) <= budget.
/// Throws KOutOfRange and BudgetExceeded.
SelectionResult select_features(const FeatureMatrix& matrix, const SelectionSpec& spec,
                                const SvmHyperparams& hp);

/// One selection per k, in the order given.
std::vector<std::pair<std::size_t, SelectionResult>> sweep_k(
    const FeatureMatrix& matrix, std::span<const std::size_t> ks, const SelectionSpec& spec,
    const SvmHyperparams& hp);

}  // namespace emg

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kbench/validity.hpp"

namespace kbench {

enum class Strategy { all_avg, valid_avg, closest };

std::string to_string(Strategy s);

/// A method pick plus the evidence behind it. For the averaging strategies,
/// `method_means` holds each method's mean accuracy over the subset and
/// `skipped_methods` lists methods with no cell there. For the closest
/// strategy, `matched_benchmark`/`k_distance` identify the match.
struct Recommendation {
  Strategy strategy = Strategy::all_avg;
  std::string chosen_method;
  std::map<std::string, double> method_means;
  std::vector<std::string> skipped_methods;
  std::string matched_benchmark;
  double k_distance = 0;
};

/// Best method by mean worst-group accuracy over a benchmark subset.
/// Missing cells are excluded from that method's mean; methods with no
/// cell at all are skipped and flagged. Ties go to the lexicographically
/// smaller method name.
Recommendation best_by_average(const ResultsTable& results,
                               const std::set<std::string>& subset,
                               Strategy which = Strategy::all_avg);

struct KTableEntry {
  double k = 0;
  ModelFamily family = ModelFamily::other;
};

/// Benchmark whose K is nearest to k_test among matching-family candidates
/// outside `exclude`. Callers pass a k_table restricted to valid
/// benchmarks. No candidate -> QueryError.
std::string closest_benchmark(double k_test, ModelFamily family,
                              const std::map<std::string, KTableEntry>& k_table,
                              const std::set<std::string>& exclude = {});

/// Best method on one benchmark column (lexicographic tie-break).
std::string best_method_on(const ResultsTable& results, const std::string& benchmark);

struct LooRow {
  std::string test_dataset;
  std::string all_method;
  std::optional<double> all_acc;
  std::string valid_method;
  std::optional<double> valid_acc;
  std::string closest_bench;
  std::string closest_method;
  std::optional<double> closest_acc;
  std::string closest_error;  // e.g. no same-family valid benchmark
  Strategy winner = Strategy::all_avg;
};

/// Leave-One-Out evaluation of the three strategies. Rows are every dataset
/// in the results table not classified invalid (datasets absent from the
/// validity report count as external test datasets). For each row the
/// strategies only see the remaining benchmarks; the winner is the highest
/// accuracy with ties to the simpler strategy (all < valid < closest).
std::vector<LooRow> leave_one_out(const ResultsTable& results,
                                  const std::map<std::string, KTableEntry>& k_table,
                                  const ValidityReport& validity);

struct MethodProfile {
  std::string method;
  double median_wg = 0;
  double iqr_wg = 0;
  std::optional<double> r2_vs_k;  // absent when flagged
  std::size_t n_cells = 0;
  bool flagged = false;  // fewer than 3 cells with K, excluded from R^2
};

/// Median/IQR of each method's worst-group accuracies over benchmarks and
/// the share of its variance explained by benchmark K (OLS R^2).
std::vector<MethodProfile> method_profiles(
    const ResultsTable& results, const std::map<std::string, KTableEntry>& k_table);

}  // namespace kbench

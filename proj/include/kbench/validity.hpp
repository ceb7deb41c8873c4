#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kbench/common.hpp"

namespace kbench {

enum class ModelFamily { vision, language, other };

std::string to_string(ModelFamily f);
ModelFamily parse_family(const std::string& s);

/// Worst-group test accuracies (percent) per (benchmark, method). Missing
/// cells are permitted; correlations use pairwise-complete deletion.
struct ResultsTable {
  std::vector<std::string> benchmarks;  // insertion order
  std::vector<std::string> methods;     // insertion order
  std::map<std::string, ModelFamily> family;
  std::map<std::pair<std::string, std::string>, double> cells;  // (benchmark, method)

  bool has(const std::string& benchmark, const std::string& method) const;
  double at(const std::string& benchmark, const std::string& method) const;
  void set(const std::string& benchmark, ModelFamily fam, const std::string& method,
           double wg_acc);
};

/// Per-benchmark per-group ERM test accuracies (percent).
struct GroupAccuracyTable {
  std::map<std::string, std::map<std::string, double>> acc;  // benchmark -> group -> %
};

/// Sample SD of the per-group ERM accuracies of a benchmark (needs >= 2 groups).
double erm_failure_sd(const GroupAccuracyTable& groups, const std::string& benchmark);

/// Sample SD of a benchmark's worst-group accuracies over methods
/// (needs >= 2 non-missing cells).
double disc_power_sd(const ResultsTable& results, const std::string& benchmark);

/// Pairwise Pearson correlations of method accuracies between benchmarks,
/// pairwise-complete over shared methods. Cells that cannot be computed
/// (< 3 shared methods, zero variance) are flagged undefined with a reason.
struct AgreementMatrix {
  std::vector<std::string> benchmarks;
  std::vector<std::vector<std::optional<double>>> r;
  std::map<std::pair<std::string, std::string>, std::string> undefined;  // reason per pair

  std::optional<double> at(const std::string& a, const std::string& b) const;
};

AgreementMatrix agreement_matrix(const ResultsTable& results);

struct ConvergentValidity {
  double coeff = 0;      // negative OLS slope of agreement vs |dK|
  double r_squared = 0;  // goodness of fit of that line
  int n_partners = 0;
};

/// OLS fit over (|dK|, agreement) points. `points` holds pairs
/// (|K_b - K_b'|, r_{b,b'}); requires >= 2 points.
ConvergentValidity convergent_validity_fit(
    std::span<const std::pair<double, double>> points);

/// Convergent validity of one benchmark against its same-family partners in
/// the prefilter set. Throws if fewer than 2 partner points exist.
ConvergentValidity convergent_validity_for(const AgreementMatrix& agreement,
                                           const std::map<std::string, double>& k_values,
                                           const std::map<std::string, ModelFamily>& families,
                                           const std::set<std::string>& prefilter,
                                           const std::string& benchmark);

struct ConvOutcome {
  std::optional<ConvergentValidity> value;
  std::string error;  // set when the coefficient is undefined for this row
};

/// Convergent validity for every benchmark in the results table that has a
/// K value. Per-benchmark failures are recorded in-row, not thrown.
std::map<std::string, ConvOutcome> convergent_validity(
    const ResultsTable& results, const std::map<std::string, double>& k_values,
    const std::set<std::string>& prefilter);

struct Thresholds {
  double erm_failure = 2.0;
  double disc_power = 2.5;
  double conv_validity = 0.10;
};

struct ValidityFlags {
  bool pass_erm_failure = false;
  bool pass_disc_power = false;
  bool pass_conv_validity = false;
  bool valid = false;  // conjunction of the three
};

ValidityFlags classify_validity(double erm_sd, double disc_sd,
                                std::optional<double> conv_coeff,
                                const Thresholds& t = {});

/// One row of the validity report.
struct ValidityRow {
  std::string benchmark;
  ModelFamily family = ModelFamily::other;
  std::optional<double> k;
  double erm_failure_sd = 0;
  double disc_power_sd = 0;
  std::optional<double> conv_coeff;
  std::optional<double> conv_r2;
  std::string conv_error;
  ValidityFlags flags;
};

struct ValidityReport {
  Thresholds thresholds;
  std::vector<ValidityRow> rows;  // sorted by benchmark name

  std::set<std::string> valid_set() const;
  std::set<std::string> invalid_set() const;
};

/// Ranks by descending accuracy, competition style: tied methods share the
/// smaller rank and the next method resumes at its 1-based position.
std::map<std::string, int> method_ranks(const ResultsTable& results,
                                        const std::string& benchmark);

}  // namespace kbench

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbench/kstat.hpp"
#include "kbench/recommend.hpp"
#include "kbench/validity.hpp"

namespace kbench {

/// Raw CSV rows with their 1-based physical line numbers. Blank lines and
/// '#' comment lines are skipped, so emitted files (which carry a manifest
/// comment) round-trip through here.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

std::vector<CsvRow> read_csv(std::istream& is);
std::vector<CsvRow> read_csv_file(const std::filesystem::path& path);

// schema: benchmark,model_family,method,wg_test_acc
ResultsTable read_results_csv(const std::filesystem::path& path);
void write_results_csv(std::ostream& os, const ResultsTable& t);

// schema: benchmark,group_id,erm_test_acc
GroupAccuracyTable read_groups_csv(const std::filesystem::path& path);

// schema: benchmark,model_family,k
std::map<std::string, KTableEntry> read_k_csv(const std::filesystem::path& path);
void write_k_csv(std::ostream& os, const std::map<std::string, KTableEntry>& k);

// schema: knob,value,seed,k,ll_rw,ll_erm,worst_group,n_worst
void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells);
std::vector<SweepCell> read_sweep_csv(const std::filesystem::path& path);

// schema: hyper,setting,pearson_r
void write_robustness_csv(std::ostream& os, Hyper hyper,
                          const std::vector<RobustnessRow>& rows);

// square matrix; undefined cells are empty fields
void write_agreement_csv(std::ostream& os, const AgreementMatrix& m);

// tidy per-pair convergent-validity points: benchmark,partner,dk,pearson_r
void write_conv_points_csv(std::ostream& os, const AgreementMatrix& agreement,
                           const std::map<std::string, double>& k_values,
                           const std::map<std::string, ModelFamily>& families,
                           const std::set<std::string>& prefilter);

// Table-1-shaped validity report
void write_validity_csv(std::ostream& os, const ValidityReport& report);
nlohmann::json validity_to_json(const ValidityReport& report);
ValidityReport validity_from_json(const nlohmann::json& j);

// Table-2-shaped LOO output:
// test_dataset,all_method,all_acc,valid_method,valid_acc,
// closest_benchmark,closest_method,closest_acc
void write_loo_csv(std::ostream& os, const std::vector<LooRow>& rows);
nlohmann::json loo_to_json(const std::vector<LooRow>& rows);

void write_profiles_csv(std::ostream& os, const std::vector<MethodProfile>& profiles);
nlohmann::json profiles_to_json(const std::vector<MethodProfile>& profiles);

DataConfig dataconfig_from_json(const nlohmann::json& j);
nlohmann::json dataconfig_to_json(const DataConfig& c);

nlohmann::json model_to_json(const TrainedModel& m);
TrainedModel model_from_json(const nlohmann::json& j);

nlohmann::json kestimate_to_json(const KEstimate& k);

/// Record of one CLI run. The id hashes every field except wall_clock_ms,
/// so reruns with equal inputs produce byte-identical data files; only the
/// manifest's wall-clock differs.
struct RunManifest {
  std::string command;
  std::string tool_version = kVersion;
  std::string config_hash;  // hex of the canonical config JSON, or "-"
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;  // path -> fnv1a hex
  std::vector<std::string> outputs;
  double wall_clock_ms = 0;

  std::string id() const;
};

nlohmann::json manifest_to_json(const RunManifest& m);
std::string file_digest(const std::filesystem::path& path);

}  // namespace kbench

#pragma once

#include <map>
#include <string>
#include <vector>

#include "kbench/train.hpp"

namespace kbench {

/// The task-difficulty-due-to-spurious-correlation statistic: the
/// difference in per-sample mean log-likelihood of the worst test group
/// between the penalized reference model and the ERM model. K > 0 means
/// the penalized model explains the worst group better, i.e. the task is
/// made harder by the spurious correlation.
struct KEstimate {
  double k = 0;       // ll_rw - ll_erm, exactly
  double ll_rw = 0;   // worst-group mean log-likelihood under the reference
  double ll_erm = 0;  // same under the ERM model
  GroupId worst_group;
  std::size_t n_worst = 0;
  Objective reference = Objective::reweight;
  std::uint64_t seed = 0;
};

/// Group with the lowest accuracy; ties broken by lexicographic group id.
GroupId worst_group_of(const std::map<GroupId, GroupEval>& evals);

/// The ERM model's worst test group.
GroupId worst_group(const TrainedModel& model_erm, const GroupedDataset& ds,
                    SplitTag split = SplitTag::test);

/// K over the worst test group as determined by the ERM model. Both models
/// must have been trained on the same dataset (fingerprints are checked).
KEstimate bayes_factor_k(const TrainedModel& m_rw, const TrainedModel& m_erm,
                         const GroupedDataset& ds);

/// Plug-in mutual information I(Y;A) in nats over the empirical
/// (label, recorded attribute) table of a split; 0*log 0 := 0.
double mutual_information(const GroupedDataset& ds, SplitTag split);

enum class Knob { confounder, bg_noise, fg_noise, attr_noise };

std::string to_string(Knob k);
Knob parse_knob(const std::string& s);

struct SweepOptions {
  Objective reference = Objective::reweight;
  Arch arch = Arch::linear;
  TrainConfig train;  // objective field is ignored; both models derive from it
  int threads = 1;
};

/// One full K pipeline (generate, train ERM, train reference, K).
KEstimate estimate_k(const DataConfig& config, std::uint64_t seed,
                     const SweepOptions& opts = {});

/// Same pipeline, keeping both trained models (for reports that include
/// convergence traces and parameters).
struct KRun {
  KEstimate estimate;
  TrainedModel erm;
  TrainedModel reference;
};

KRun estimate_k_run(const DataConfig& config, std::uint64_t seed,
                    const SweepOptions& opts = {});

struct SweepCell {
  Knob knob = Knob::confounder;
  double value = 0;
  std::uint64_t seed = 0;
  KEstimate estimate;
};

/// K for every (value, seed) pair with the knob applied to the base config.
/// Cells run independently (opts.threads workers); output order is always
/// values-major then seeds, regardless of thread count.
std::vector<SweepCell> k_sweep(const DataConfig& base, Knob knob,
                               const std::vector<double>& values,
                               const std::vector<std::uint64_t>& seeds,
                               const SweepOptions& opts = {});

enum class Hyper { learning_rate, batch_size };

std::string to_string(Hyper h);
Hyper parse_hyper(const std::string& s);

struct RobustnessRow {
  double setting = 0;
  double pearson_r = 0;
};

/// Hyperparameter-robustness check: K is computed over the probe configs at
/// each setting (the hyperparameter is varied in lockstep for both models)
/// and correlated against the K vector at the reference setting (the
/// TrainConfig default: learning rate 1e-3, full batch = 0). The settings
/// list must contain the reference. If `probes` is empty, six probes are
/// derived from `base` by varying the confounder strength over
/// {0.5, 0.6, 0.7, 0.8, 0.9, 0.95}.
std::vector<RobustnessRow> k_robustness(const DataConfig& base, Hyper hyper,
                                        const std::vector<double>& settings,
                                        std::vector<DataConfig> probes = {},
                                        const SweepOptions& opts = {});

}  // namespace kbench

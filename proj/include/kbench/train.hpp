#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <span>
#include <vector>

#include "kbench/dataset.hpp"
#include "kbench/model.hpp"

namespace kbench {

enum class Objective { erm, reweight, groupdro };

std::string to_string(Objective o);
Objective parse_objective(const std::string& s);

struct TrainConfig {
  Objective objective = Objective::erm;
  double learning_rate = 1e-3;
  int batch_size = 0;  // 0 = full batch
  int max_epochs = 500;
  int patience = 10;
  double min_delta = 1e-4;
  double groupdro_step = 0.01;  // eta_q
  int hidden_width = 16;        // mlp1 only
  std::uint64_t seed = 0;

  void validate() const;
};

/// A trained classifier plus its training record. `val_loss_trace` is the
/// per-epoch validation loss (the convergence record); parameters are the
/// ones from the best-validation-loss epoch.
struct TrainedModel {
  ModelParams params;
  Objective objective = Objective::erm;
  std::vector<double> val_loss_trace;
  std::vector<double> train_loss_trace;
  int best_epoch = 0;
  std::uint64_t seed = 0;
  std::uint64_t data_fingerprint = 0;
  // groupdro only: per-epoch group weights, for simplex diagnostics
  std::vector<std::array<double, 4>> group_weight_trace;
};

/// Inverse-group-frequency weights over the train split:
/// w_i = N_train / N_train_{a_i, y_i}. Every group then contributes the
/// same total weight N_train. Empty train group -> ConfigError.
std::vector<double> sample_weights(const GroupedDataset& ds);

/// (sum_i w_i * -log p_i[y_i]) / (sum_i w_i), probabilities clipped to
/// [1e-12, 1-1e-12] before the log.
double weighted_nll(const Eigen::MatrixXd& probs, std::span<const int> labels,
                    std::span<const double> weights);

/// Exact analytic gradient of weighted_nll(forward(params, batch), ...)
/// with respect to the packed parameter vector.
Eigen::VectorXd gradient(const ModelParams& params, const Eigen::MatrixXd& batch,
                         std::span<const int> labels, std::span<const double> weights);

/// Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8).
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
};

/// Full training loop: Adam until the validation loss flattens (per-epoch
/// improvement < min_delta for `patience` consecutive epochs) or max_epochs.
/// Weight init is N(0, 0.01^2) from a substream of cfg.seed, so two
/// objectives trained with the same seed share their initialization.
TrainedModel train(const GroupedDataset& ds, Arch arch, const TrainConfig& cfg);

struct GroupEval {
  double accuracy = 0;
  double mean_log_likelihood = 0;
  std::size_t count = 0;
};

/// Per-group accuracy (argmax, ties to the lower class index) and mean
/// log-likelihood over a split. Every group must be present in the split.
std::map<GroupId, GroupEval> evaluate_groups(const TrainedModel& model,
                                             const GroupedDataset& ds, SplitTag split);

}  // namespace kbench

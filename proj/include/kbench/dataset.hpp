#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "kbench/common.hpp"

namespace kbench {

enum class SplitTag { train, val, test };

std::string to_string(SplitTag s);
SplitTag parse_split(const std::string& s);

/// Knobs of the synthetic grouped-classification generator. Labels are
/// uniform in {0,1}; the attribute matches the label with probability
/// `confounder_strength`. Features are two Gaussian blocks: a core block
/// whose per-coordinate mean is (2y-1)*core_separation with variance
/// 1 + fg_noise^2, and a spurious block tied to the attribute the same way
/// with bg_noise. `attr_noise` flips each recorded annotation independently
/// (generation always uses the true attribute).
struct DataConfig {
  int n_train = 5000;
  int n_val = 1000;
  int n_test = 2000;
  int core_dim = 10;
  int spurious_dim = 10;
  double confounder_strength = 0.9;  // rho in [0.5, 1]
  double core_separation = 1.0;      // mu_y > 0
  double spurious_separation = 1.0;  // mu_a > 0
  double fg_noise = 0.0;             // sigma_fg >= 0
  double bg_noise = 0.0;             // sigma_bg >= 0
  double attr_noise = 0.0;           // eta in [0, 0.5]
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct GroupedDataset {
  Eigen::MatrixXd features;     // n x (core_dim + spurious_dim)
  std::vector<int> labels;      // 0/1
  std::vector<int> attributes;  // recorded annotations (attr_noise applied)
  std::vector<SplitTag> split;
  int core_dim = 0;
  int spurious_dim = 0;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
  GroupId group_of(std::size_t i) const { return {attributes[i], labels[i]}; }
  std::vector<std::size_t> indices_of(SplitTag s) const;

  /// Content hash over features, labels, attributes and split tags.
  std::uint64_t fingerprint() const;
};

/// Deterministic in (config, seed). Train/val draw (y, a) from the
/// confounded joint; the test split is regenerated group-balanced (counts
/// per group differ by at most one when n_test % 4 != 0). Label, attribute,
/// feature and annotation-flip draws come from independent substreams of
/// the seed, so changing one knob never perturbs the other streams.
GroupedDataset generate(const DataConfig& config);

struct GroupCount {
  std::size_t count = 0;
  double frequency = 0;
};

/// Counts and frequencies of all four groups in a split (zero counts
/// included). Empty split -> ConfigError.
std::map<GroupId, GroupCount> empirical_group_distribution(const GroupedDataset& ds,
                                                           SplitTag split);

/// Header: split,y,a,x_0,...,x_{d-1}. Feature values round-trip exactly.
void write_dataset_csv(std::ostream& os, const GroupedDataset& ds);
GroupedDataset read_dataset_csv(std::istream& is);

}  // namespace kbench

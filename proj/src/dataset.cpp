#include "kbench/dataset.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace kbench {

std::string to_string(SplitTag s) {
  switch (s) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  throw ConfigError("unknown split tag");
}

SplitTag parse_split(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "val") return SplitTag::val;
  if (s == "test") return SplitTag::test;
  throw ConfigError("unknown split: " + s);
}

void DataConfig::validate() const {
  if (n_train <= 0) throw ConfigError("invalid config: n_train must be > 0");
  if (n_val <= 0) throw ConfigError("invalid config: n_val must be > 0");
  if (n_test <= 0) throw ConfigError("invalid config: n_test must be > 0");
  if (core_dim <= 0) throw ConfigError("invalid config: core_dim must be > 0");
  if (spurious_dim <= 0) throw ConfigError("invalid config: spurious_dim must be > 0");
  if (!(confounder_strength >= 0.5 && confounder_strength <= 1.0))
    throw ConfigError("invalid config: confounder_strength must be in [0.5, 1]");
  if (!(core_separation > 0)) throw ConfigError("invalid config: core_separation must be > 0");
  if (!(spurious_separation >= 0))
    throw ConfigError("invalid config: spurious_separation must be >= 0");
  if (!(fg_noise >= 0)) throw ConfigError("invalid config: fg_noise must be >= 0");
  if (!(bg_noise >= 0)) throw ConfigError("invalid config: bg_noise must be >= 0");
  if (!(attr_noise >= 0 && attr_noise <= 0.5))
    throw ConfigError("invalid config: attr_noise must be in [0, 0.5]");
}

std::vector<std::size_t> GroupedDataset::indices_of(SplitTag s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) idx.push_back(i);
  return idx;
}

std::uint64_t GroupedDataset::fingerprint() const {
  std::uint64_t h = fnv1a(&core_dim, sizeof core_dim);
  h = fnv1a(&spurious_dim, sizeof spurious_dim, h);
  for (std::size_t i = 0; i < size(); ++i) {
    const int y = labels[i];
    const int a = attributes[i];
    const int s = static_cast<int>(split[i]);
    h = fnv1a(&y, sizeof y, h);
    h = fnv1a(&a, sizeof a, h);
    h = fnv1a(&s, sizeof s, h);
    for (int j = 0; j < features.cols(); ++j) {
      const double x = features(static_cast<Eigen::Index>(i), j);
      h = fnv1a(&x, sizeof x, h);
    }
  }
  return h;
}

namespace {

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

}  // namespace

GroupedDataset generate(const DataConfig& config) {
  config.validate();

  auto rng_label = substream(config.seed, 1);
  auto rng_attr = substream(config.seed, 2);
  auto rng_feat = substream(config.seed, 3);
  auto rng_flip = substream(config.seed, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n_sampled = config.n_train + config.n_val;
  const int n = n_sampled + config.n_test;
  const int d = config.core_dim + config.spurious_dim;

  GroupedDataset ds;
  ds.core_dim = config.core_dim;
  ds.spurious_dim = config.spurious_dim;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  ds.attributes.resize(n);
  ds.split.resize(n);

  std::vector<int> true_attr(n);

  // train/val: (y, a) from the confounded joint
  for (int i = 0; i < n_sampled; ++i) {
    const int y = unit(rng_label) < 0.5 ? 0 : 1;
    const int a = unit(rng_attr) < config.confounder_strength ? y : 1 - y;
    ds.labels[i] = y;
    true_attr[i] = a;
    ds.split[i] = i < config.n_train ? SplitTag::train : SplitTag::val;
  }

  // test: group-balanced by construction, groups in GroupId order
  {
    const int base = config.n_test / 4;
    const int rem = config.n_test % 4;
    int i = n_sampled;
    int gi = 0;
    for (int a = 0; a <= 1; ++a) {
      for (int y = 0; y <= 1; ++y, ++gi) {
        const int cnt = base + (gi < rem ? 1 : 0);
        for (int k = 0; k < cnt; ++k, ++i) {
          ds.labels[i] = y;
          true_attr[i] = a;
          ds.split[i] = SplitTag::test;
        }
      }
    }
  }

  // features: draw N(0,1) then shift/scale, so the stream consumption is
  // identical for every knob setting
  std::normal_distribution<double> n01(0.0, 1.0);
  const double fg_sd = std::sqrt(1.0 + config.fg_noise * config.fg_noise);
  const double bg_sd = std::sqrt(1.0 + config.bg_noise * config.bg_noise);
  for (int i = 0; i < n; ++i) {
    const double my = (2 * ds.labels[i] - 1) * config.core_separation;
    const double ma = (2 * true_attr[i] - 1) * config.spurious_separation;
    for (int j = 0; j < config.core_dim; ++j)
      ds.features(i, j) = my + fg_sd * n01(rng_feat);
    for (int j = 0; j < config.spurious_dim; ++j)
      ds.features(i, config.core_dim + j) = ma + bg_sd * n01(rng_feat);
  }

  // annotations carry the noise; generation above used the true attribute
  for (int i = 0; i < n; ++i) {
    const bool flip = unit(rng_flip) < config.attr_noise;
    ds.attributes[i] = flip ? 1 - true_attr[i] : true_attr[i];
  }

  return ds;
}

std::map<GroupId, GroupCount> empirical_group_distribution(const GroupedDataset& ds,
                                                           SplitTag split) {
  std::map<GroupId, GroupCount> out;
  for (int a = 0; a <= 1; ++a)
    for (int y = 0; y <= 1; ++y) out[{a, y}] = {};
  std::size_t total = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.split[i] != split) continue;
    ++out[ds.group_of(i)].count;
    ++total;
  }
  if (total == 0) throw ConfigError("empirical_group_distribution: empty split");
  for (auto& [g, c] : out)
    c.frequency = static_cast<double>(c.count) / static_cast<double>(total);
  return out;
}

void write_dataset_csv(std::ostream& os, const GroupedDataset& ds) {
  os << "split,y,a";
  for (int j = 0; j < ds.dim(); ++j) os << ",x_" << j;
  os << "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << to_string(ds.split[i]) << ',' << ds.labels[i] << ',' << ds.attributes[i];
    for (int j = 0; j < ds.dim(); ++j)
      os << ',' << format_double(ds.features(static_cast<Eigen::Index>(i), j));
    os << "\n";
  }
}

GroupedDataset read_dataset_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  int d = -1;
  std::vector<std::vector<double>> rows;
  GroupedDataset ds;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (d < 0) {
      if (cells.size() < 4 || cells[0] != "split" || cells[1] != "y" || cells[2] != "a")
        throw ConfigError("dataset csv row " + std::to_string(lineno) +
                          ": expected header split,y,a,x_0,...");
      d = static_cast<int>(cells.size()) - 3;
      continue;
    }
    if (cells.size() != static_cast<std::size_t>(d) + 3)
      throw ConfigError("dataset csv row " + std::to_string(lineno) + ": wrong column count");
    ds.split.push_back(parse_split(cells[0]));
    ds.labels.push_back(std::stoi(cells[1]));
    ds.attributes.push_back(std::stoi(cells[2]));
    std::vector<double> x(d);
    for (int j = 0; j < d; ++j) x[j] = std::stod(cells[3 + j]);
    rows.push_back(std::move(x));
  }
  if (d < 0) throw ConfigError("dataset csv: missing header");
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < d; ++j) ds.features(static_cast<Eigen::Index>(i), j) = rows[i][j];
  // the CSV schema does not carry the core/spurious boundary
  ds.core_dim = d;
  ds.spurious_dim = 0;
  return ds;
}

}  // namespace kbench

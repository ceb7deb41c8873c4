#include "kbench/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace kbench {

namespace {

constexpr double kProbClip = 1e-12;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

int group_index(GroupId g) { return g.attribute * 2 + g.label; }

}  // namespace

std::string to_string(Objective o) {
  switch (o) {
    case Objective::erm: return "erm";
    case Objective::reweight: return "reweight";
    case Objective::groupdro: return "groupdro";
  }
  throw ConfigError("unknown objective");
}

Objective parse_objective(const std::string& s) {
  if (s == "erm") return Objective::erm;
  if (s == "reweight") return Objective::reweight;
  if (s == "groupdro") return Objective::groupdro;
  throw ConfigError("unknown objective: " + s);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("train config: learning_rate must be > 0");
  if (patience < 1) throw ConfigError("train config: patience must be >= 1");
  if (!(min_delta >= 0)) throw ConfigError("train config: min_delta must be >= 0");
  if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
  if (batch_size < 0) throw ConfigError("train config: batch_size must be >= 0");
  if (!(groupdro_step > 0)) throw ConfigError("train config: groupdro_step must be > 0");
  if (hidden_width < 1) throw ConfigError("train config: hidden_width must be >= 1");
}

std::vector<double> sample_weights(const GroupedDataset& ds) {
  const auto idx = ds.indices_of(SplitTag::train);
  if (idx.empty()) throw ConfigError("sample_weights: empty train split");
  std::array<std::size_t, 4> counts{};
  for (auto i : idx) ++counts[static_cast<std::size_t>(group_index(ds.group_of(i)))];
  for (int g = 0; g < 4; ++g)
    if (counts[static_cast<std::size_t>(g)] == 0)
      throw ConfigError("sample_weights: empty train group " +
                        to_string(GroupId{g / 2, g % 2}) + ", reweighting undefined");
  std::vector<double> w(idx.size());
  const double n = static_cast<double>(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k)
    w[k] = n / static_cast<double>(counts[static_cast<std::size_t>(group_index(ds.group_of(idx[k])))]);
  return w;
}

double weighted_nll(const Eigen::MatrixXd& probs, std::span<const int> labels,
                    std::span<const double> weights) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size() ||
      labels.size() != weights.size())
    throw ConfigError("weighted_nll: length mismatch");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probs(static_cast<Eigen::Index>(i), labels[i]),
                                kProbClip, 1.0 - kProbClip);
    num += weights[i] * -std::log(p);
    den += weights[i];
  }
  if (den == 0.0) throw ConfigError("weighted_nll: zero total weight");
  return num / den;
}

Eigen::VectorXd gradient(const ModelParams& params, const Eigen::MatrixXd& batch,
                         std::span<const int> labels, std::span<const double> weights) {
  const auto& s = params.shape;
  if (static_cast<std::size_t>(batch.rows()) != labels.size() ||
      labels.size() != weights.size())
    throw ConfigError("gradient: length mismatch");
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (wsum == 0.0) throw ConfigError("gradient: zero total weight");

  // dL/dlogits = (w_i / sum w) * (p_i - onehot(y_i))
  Eigen::MatrixXd dz = forward(params, batch);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    dz(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
    dz.row(static_cast<Eigen::Index>(i)) *= weights[i] / wsum;
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(s.param_count());
  double* g = grad.data();
  const double* t = params.theta.data();
  if (s.arch == Arch::linear) {
    Eigen::Map<RowMat> gw(g, s.classes, s.input_dim);
    Eigen::Map<Eigen::VectorXd> gb(g + s.classes * s.input_dim, s.classes);
    gw = dz.transpose() * batch;
    gb = dz.colwise().sum();
    return grad;
  }
  Eigen::Map<const RowMat> w1(t, s.hidden, s.input_dim);
  Eigen::Map<const Eigen::VectorXd> b1(t + s.hidden * s.input_dim, s.hidden);
  Eigen::Map<const RowMat> w2(t + s.hidden * s.input_dim + s.hidden, s.classes, s.hidden);
  Eigen::MatrixXd h = batch * w1.transpose();
  h.rowwise() += b1.transpose();
  h = h.array().tanh();
  // backprop through logits = h * W2^T + b2, h = tanh(x * W1^T + b1)
  Eigen::MatrixXd dh = dz * w2;
  Eigen::MatrixXd da = dh.array() * (1.0 - h.array().square());
  const int o1 = s.hidden * s.input_dim;
  const int o2 = o1 + s.hidden;
  const int o3 = o2 + s.classes * s.hidden;
  Eigen::Map<RowMat> gw1(g, s.hidden, s.input_dim);
  Eigen::Map<Eigen::VectorXd> gb1(g + o1, s.hidden);
  Eigen::Map<RowMat> gw2(g + o2, s.classes, s.hidden);
  Eigen::Map<Eigen::VectorXd> gb2(g + o3, s.classes);
  gw1 = da.transpose() * batch;
  gb1 = da.colwise().sum();
  gw2 = dz.transpose() * h;
  gb2 = dz.colwise().sum();
  return grad;
}

void AdamState::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t;
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  theta -= lr * ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
}

namespace {

struct TrainData {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<int> group;  // group_index per row
  std::array<std::size_t, 4> counts{};
};

TrainData gather(const GroupedDataset& ds, SplitTag tag) {
  TrainData d;
  const auto idx = ds.indices_of(tag);
  d.x = rows_of(ds.features, idx);
  d.y.reserve(idx.size());
  d.group.reserve(idx.size());
  for (auto i : idx) {
    d.y.push_back(ds.labels[i]);
    const int g = group_index(ds.group_of(i));
    d.group.push_back(g);
    ++d.counts[static_cast<std::size_t>(g)];
  }
  return d;
}

double val_nll(const ModelParams& p, const TrainData& val) {
  const Eigen::MatrixXd probs = forward(p, val.x);
  double s = 0;
  for (std::size_t i = 0; i < val.y.size(); ++i) {
    const double pr = std::clamp(probs(static_cast<Eigen::Index>(i), val.y[i]),
                                 kProbClip, 1.0 - kProbClip);
    s += -std::log(pr);
  }
  return s / static_cast<double>(val.y.size());
}

}  // namespace

TrainedModel train(const GroupedDataset& ds, Arch arch, const TrainConfig& cfg) {
  cfg.validate();
  TrainData tr = gather(ds, SplitTag::train);
  TrainData va = gather(ds, SplitTag::val);
  if (tr.y.empty()) throw ConfigError("train: empty train split");
  if (va.y.empty()) throw ConfigError("train: empty val split");
  const auto n = tr.y.size();

  std::vector<double> base_weights(n, 1.0);
  if (cfg.objective != Objective::erm) {
    for (int g = 0; g < 4; ++g)
      if (tr.counts[static_cast<std::size_t>(g)] == 0)
        throw ConfigError("train: empty train group " + to_string(GroupId{g / 2, g % 2}) +
                          " for objective " + to_string(cfg.objective));
    if (cfg.objective == Objective::reweight) base_weights = sample_weights(ds);
  }

  ModelShape shape{arch, static_cast<int>(tr.x.cols()),
                   arch == Arch::mlp1 ? cfg.hidden_width : 0, 2};
  ModelParams params = ModelParams::zeros(shape);
  {
    auto rng = substream(cfg.seed, 99);
    std::normal_distribution<double> init(0.0, 0.01);
    // weight matrices get small random values, biases stay zero
    auto fill = [&](int offset, int count) {
      for (int i = 0; i < count; ++i) params.theta[offset + i] = init(rng);
    };
    if (arch == Arch::linear) {
      fill(0, shape.classes * shape.input_dim);
    } else {
      const int o1 = shape.hidden * shape.input_dim;
      const int o2 = o1 + shape.hidden;
      fill(0, o1);
      fill(o2, shape.classes * shape.hidden);
    }
  }

  AdamState adam(params.theta.size());
  std::array<double, 4> q{0.25, 0.25, 0.25, 0.25};

  TrainedModel out;
  out.objective = cfg.objective;
  out.seed = cfg.seed;
  out.data_fingerprint = ds.fingerprint();

  Eigen::VectorXd best_theta = params.theta;
  double best_val = std::numeric_limits<double>::infinity();
  double prev_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  auto rng_shuffle = substream(cfg.seed, 7);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> weights = base_weights;
  const bool minibatch = cfg.batch_size > 0 && static_cast<std::size_t>(cfg.batch_size) < n;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (cfg.objective == Objective::groupdro) {
      // exponentiated-gradient update of the group weights from the current
      // per-group mean losses, then loss = sum_g q_g * L_g, which equals
      // weighted_nll with w_i = q_{g(i)} / N_{g(i)} (total weight 1)
      const Eigen::MatrixXd probs = forward(params, tr.x);
      std::array<double, 4> loss_g{};
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(probs(static_cast<Eigen::Index>(i), tr.y[i]),
                                    kProbClip, 1.0 - kProbClip);
        loss_g[static_cast<std::size_t>(tr.group[i])] += -std::log(p);
      }
      double qsum = 0;
      for (int g = 0; g < 4; ++g) {
        loss_g[static_cast<std::size_t>(g)] /=
            static_cast<double>(tr.counts[static_cast<std::size_t>(g)]);
        q[static_cast<std::size_t>(g)] *=
            std::exp(cfg.groupdro_step * loss_g[static_cast<std::size_t>(g)]);
        qsum += q[static_cast<std::size_t>(g)];
      }
      for (auto& qg : q) qg /= qsum;
      out.group_weight_trace.push_back(q);
      for (std::size_t i = 0; i < n; ++i)
        weights[i] = q[static_cast<std::size_t>(tr.group[i])] /
                     static_cast<double>(tr.counts[static_cast<std::size_t>(tr.group[i])]);
    }

    double epoch_loss;
    if (!minibatch) {
      const Eigen::MatrixXd probs = forward(params, tr.x);
      epoch_loss = weighted_nll(probs, tr.y, weights);
      if (!std::isfinite(epoch_loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      adam.step(params.theta, gradient(params, tr.x, tr.y, weights), cfg.learning_rate);
    } else {
      std::shuffle(order.begin(), order.end(), rng_shuffle);
      double acc_num = 0, acc_den = 0;
      const auto bs = static_cast<std::size_t>(cfg.batch_size);
      for (std::size_t start = 0, batch_no = 0; start < n; start += bs, ++batch_no) {
        const std::size_t len = std::min(bs, n - start);
        Eigen::MatrixXd bx(static_cast<Eigen::Index>(len), tr.x.cols());
        std::vector<int> by(len);
        std::vector<double> bw(len);
        for (std::size_t k = 0; k < len; ++k) {
          const auto src = order[start + k];
          bx.row(static_cast<Eigen::Index>(k)) = tr.x.row(static_cast<Eigen::Index>(src));
          by[k] = tr.y[src];
          bw[k] = weights[src];
        }
        const Eigen::MatrixXd probs = forward(params, bx);
        const double bl = weighted_nll(probs, by, bw);
        if (!std::isfinite(bl))
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             " batch " + std::to_string(batch_no));
        const double wsum = std::accumulate(bw.begin(), bw.end(), 0.0);
        acc_num += bl * wsum;
        acc_den += wsum;
        adam.step(params.theta, gradient(params, bx, by, bw), cfg.learning_rate);
      }
      epoch_loss = acc_num / acc_den;
    }
    out.train_loss_trace.push_back(epoch_loss);

    const double vloss = val_nll(params, va);
    if (!std::isfinite(vloss))
      throw NumericError("train: non-finite validation loss at epoch " +
                         std::to_string(epoch));
    out.val_loss_trace.push_back(vloss);
    if (vloss < best_val) {
      best_val = vloss;
      best_theta = params.theta;
      out.best_epoch = epoch;
    }
    // convergence: the validation curve flattened for `patience` epochs
    if (prev_val - vloss < cfg.min_delta) {
      if (++stale >= cfg.patience) break;
    } else {
      stale = 0;
    }
    prev_val = vloss;
  }

  params.theta = std::move(best_theta);
  out.params = std::move(params);
  return out;
}

std::map<GroupId, GroupEval> evaluate_groups(const TrainedModel& model,
                                             const GroupedDataset& ds, SplitTag split) {
  const auto idx = ds.indices_of(split);
  if (idx.empty()) throw ConfigError("evaluate_groups: empty split");
  const Eigen::MatrixXd x = rows_of(ds.features, idx);
  const Eigen::MatrixXd probs = forward(model.params, x);
  std::map<GroupId, GroupEval> out;
  std::map<GroupId, std::size_t> correct;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto i = idx[k];
    const GroupId g = ds.group_of(i);
    auto& ev = out[g];
    ++ev.count;
    // argmax with ties toward the lower class index
    int pred = 0;
    double bestp = probs(static_cast<Eigen::Index>(k), 0);
    for (int c = 1; c < probs.cols(); ++c)
      if (probs(static_cast<Eigen::Index>(k), c) > bestp) {
        bestp = probs(static_cast<Eigen::Index>(k), c);
        pred = c;
      }
    if (pred == ds.labels[i]) ++correct[g];
    const double p = std::clamp(probs(static_cast<Eigen::Index>(k), ds.labels[i]),
                                kProbClip, 1.0 - kProbClip);
    ev.mean_log_likelihood += std::log(p);
  }
  for (int a = 0; a <= 1; ++a)
    for (int y = 0; y <= 1; ++y)
      if (!out.count({a, y}))
        throw ConfigError("evaluate_groups: group " + to_string(GroupId{a, y}) +
                          " empty in split " + to_string(split));
  for (auto& [g, ev] : out) {
    ev.accuracy = static_cast<double>(correct[g]) / static_cast<double>(ev.count);
    ev.mean_log_likelihood /= static_cast<double>(ev.count);
  }
  return out;
}

}  // namespace kbench

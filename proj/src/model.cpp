#include "kbench/model.hpp"

namespace kbench {

std::string to_string(Arch a) {
  return a == Arch::linear ? "linear" : "mlp1";
}

Arch parse_arch(const std::string& s) {
  if (s == "linear") return Arch::linear;
  if (s == "mlp1") return Arch::mlp1;
  throw ConfigError("unknown architecture: " + s);
}

int ModelShape::param_count() const {
  if (input_dim <= 0 || classes < 2) throw ConfigError("model shape: bad dimensions");
  if (arch == Arch::linear) return classes * input_dim + classes;
  if (hidden <= 0) throw ConfigError("model shape: mlp1 needs hidden > 0");
  return hidden * input_dim + hidden + classes * hidden + classes;
}

ModelParams ModelParams::zeros(const ModelShape& shape) {
  ModelParams p;
  p.shape = shape;
  p.theta = Eigen::VectorXd::Zero(shape.param_count());
  return p;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<const Eigen::VectorXd>;

Eigen::MatrixXd softmax_rows(Eigen::MatrixXd logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

}  // namespace

Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& features) {
  const auto& s = params.shape;
  if (features.cols() != s.input_dim)
    throw ConfigError("forward: feature width " + std::to_string(features.cols()) +
                      " does not match model input dim " + std::to_string(s.input_dim));
  if (params.theta.size() != s.param_count())
    throw ConfigError("forward: parameter vector size mismatch");
  const double* t = params.theta.data();
  if (s.arch == Arch::linear) {
    MapMat w(t, s.classes, s.input_dim);
    MapVec b(t + s.classes * s.input_dim, s.classes);
    Eigen::MatrixXd logits = features * w.transpose();
    logits.rowwise() += b.transpose();
    return softmax_rows(std::move(logits));
  }
  MapMat w1(t, s.hidden, s.input_dim);
  MapVec b1(t + s.hidden * s.input_dim, s.hidden);
  MapMat w2(t + s.hidden * s.input_dim + s.hidden, s.classes, s.hidden);
  MapVec b2(t + s.hidden * s.input_dim + s.hidden + s.classes * s.hidden, s.classes);
  Eigen::MatrixXd h = features * w1.transpose();
  h.rowwise() += b1.transpose();
  h = h.array().tanh();
  Eigen::MatrixXd logits = h * w2.transpose();
  logits.rowwise() += b2.transpose();
  return softmax_rows(std::move(logits));
}

}  // namespace kbench

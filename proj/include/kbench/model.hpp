#pragma once

#include <Eigen/Dense>
#include <string>

#include "kbench/common.hpp"

namespace kbench {

enum class Arch { linear, mlp1 };

std::string to_string(Arch a);
Arch parse_arch(const std::string& s);

/// Parameter layout metadata. Parameters live in one packed vector:
///   linear: W (classes x d, row-major), b (classes)
///   mlp1:   W1 (hidden x d), b1 (hidden), W2 (classes x hidden), b2 (classes)
/// The single tanh hidden layer is only present for mlp1.
struct ModelShape {
  Arch arch = Arch::linear;
  int input_dim = 0;
  int hidden = 0;  // ignored for linear
  int classes = 2;

  int param_count() const;
};

struct ModelParams {
  ModelShape shape;
  Eigen::VectorXd theta;

  static ModelParams zeros(const ModelShape& shape);
};

/// Row-wise class probabilities (softmax over logits). Every row sums to 1
/// within 1e-12; values are clipped to [1e-12, 1-1e-12] at the log call
/// sites downstream, not here.
Eigen::MatrixXd forward(const ModelParams& params, const Eigen::MatrixXd& features);

}  // namespace kbench

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "teprompt/rng.hpp"

namespace teprompt {

/// Row-major so that row i of a hidden-state table is token i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A learnable tensor with its accumulated gradient. Vectors (biases, layer
/// norm gains) are stored as 1 x n matrices.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  /// Excluded from decoupled weight decay when false (biases, norms).
  bool decay = true;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols, bool decays = true)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)), decay(decays) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }

  void init_normal(Rng& rng, double stddev) {
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = rng.normal(0.0, stddev);
  }
};

using ParameterList = std::vector<Parameter*>;

inline void zero_grads(const ParameterList& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace teprompt

#pragma once

#include <cstdint>
#include <span>

#include "teprompt/tensor.hpp"

namespace teprompt {

/// The four bias-free gate matrices (d_h x d_h):
///   g_c = sigmoid(W_c h_ssc_cls + U_c h_acp_cls)    auxiliary gate
///   g_m = sigmoid(W_m h_drr_mask + U_m h~_c)        main gate
struct FusionParameters {
  Parameter w_c;
  Parameter u_c;
  Parameter w_m;
  Parameter u_m;

  FusionParameters() = default;
  /// N(0, init_std^2) initialisation from `seed`.
  FusionParameters(std::size_t d_h, std::uint64_t seed, double init_std = 0.02);

  std::size_t dim() const { return static_cast<std::size_t>(w_c.value.rows()); }
  ParameterList parameters() { return {&w_c, &u_c, &w_m, &u_m}; }
  /// Throws std::invalid_argument unless all four are the same square shape.
  void validate() const;
};

/// Gate activation and the fused vector  g * a + (1 - g) * b.
struct GateResult {
  Vector gate;
  Vector fused;
};

/// g = sigmoid(W a + U b); fused = g * a + (1 - g) * b (element-wise).
/// Throws std::invalid_argument on dimension mismatch.
GateResult gate_forward(const Matrix& w, const Matrix& u, const Vector& a, const Vector& b);

/// Gradients of one gate given dLoss/dfused. Accumulates into dw, du and
/// returns dLoss/da, dLoss/db.
struct GateInputGrads {
  Vector da;
  Vector db;
};
GateInputGrads gate_backward(const Matrix& w, const Matrix& u, const Vector& a, const Vector& b,
                             const GateResult& forward, const Vector& d_fused, Matrix& dw, Matrix& du);

/// Fuses the two auxiliary [CLS] states into h~_c.
GateResult fuse_auxiliary(const Vector& h_ssc_cls, const Vector& h_acp_cls, const FusionParameters& params);

/// Fuses h~_c into the DRR [MASK] state, giving h~_m.
GateResult fuse_main(const Vector& h_drr_mask, const Vector& h_aux, const FusionParameters& params);

double sigmoid(double x);

/// Numerically stable softmax.
Vector softmax(const Vector& scores);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const Vector& values);

}  // namespace teprompt

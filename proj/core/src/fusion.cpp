#include "teprompt/fusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace teprompt {

FusionParameters::FusionParameters(std::size_t d_h, std::uint64_t seed, double init_std) {
  const auto d = static_cast<Eigen::Index>(d_h);
  w_c = Parameter("fusion.W_c", d, d);
  u_c = Parameter("fusion.U_c", d, d);
  w_m = Parameter("fusion.W_m", d, d);
  u_m = Parameter("fusion.U_m", d, d);
  Rng rng(seed);
  for (auto* p : parameters()) p->init_normal(rng, init_std);
}

void FusionParameters::validate() const {
  const auto d = w_c.value.rows();
  for (const auto* p : {&w_c, &u_c, &w_m, &u_m}) {
    if (p->value.rows() != d || p->value.cols() != d) {
      throw std::invalid_argument("fusion matrix " + p->name + " is not " + std::to_string(d) + "x" +
                                  std::to_string(d));
    }
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GateResult gate_forward(const Matrix& w, const Matrix& u, const Vector& a, const Vector& b) {
  if (a.size() != b.size() || w.rows() != a.size() || w.cols() != a.size() || u.rows() != a.size() ||
      u.cols() != b.size()) {
    throw std::invalid_argument("fusion gate dimension mismatch: inputs " + std::to_string(a.size()) + "/" +
                                std::to_string(b.size()) + ", matrices " + std::to_string(w.rows()) + "x" +
                                std::to_string(w.cols()));
  }
  GateResult r;
  const Vector z = w * a + u * b;
  r.gate = z.unaryExpr([](double v) { return sigmoid(v); });
  r.fused = r.gate.cwiseProduct(a) + (Vector::Ones(a.size()) - r.gate).cwiseProduct(b);
  return r;
}

GateInputGrads gate_backward(const Matrix& w, const Matrix& u, const Vector& a, const Vector& b,
                             const GateResult& forward, const Vector& d_fused, Matrix& dw, Matrix& du) {
  const Vector& g = forward.gate;
  const Vector d_gate = d_fused.cwiseProduct(a - b);
  const Vector dz = d_gate.cwiseProduct(g).cwiseProduct(Vector::Ones(g.size()) - g);
  dw.noalias() += dz * a.transpose();
  du.noalias() += dz * b.transpose();
  GateInputGrads out;
  out.da = g.cwiseProduct(d_fused) + w.transpose() * dz;
  out.db = (Vector::Ones(g.size()) - g).cwiseProduct(d_fused) + u.transpose() * dz;
  return out;
}

GateResult fuse_auxiliary(const Vector& h_ssc_cls, const Vector& h_acp_cls, const FusionParameters& params) {
  return gate_forward(params.w_c.value, params.u_c.value, h_ssc_cls, h_acp_cls);
}

GateResult fuse_main(const Vector& h_drr_mask, const Vector& h_aux, const FusionParameters& params) {
  return gate_forward(params.w_m.value, params.u_m.value, h_drr_mask, h_aux);
}

Vector softmax(const Vector& scores) {
  if (scores.size() == 0) return scores;
  const double mx = scores.maxCoeff();
  Vector e = (scores.array() - mx).exp();
  return e / e.sum();
}

std::size_t argmax(const Vector& values) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

}  // namespace teprompt

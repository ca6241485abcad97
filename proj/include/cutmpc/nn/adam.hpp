#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace cutmpc {

// Adam with the classic additive L2 term (grad + wd * theta).
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double lr = 1e-4;
  double wd = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(Eigen::Index n = 0)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  st.step += 1;
  Eigen::ArrayXd g = grads.array() + st.wd * params.array();
  st.m.array() = st.beta1 * st.m.array() + (1.0 - st.beta1) * g;
  st.v.array() = st.beta2 * st.v.array() + (1.0 - st.beta2) * g.square();
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  params.array() -= st.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + st.eps);
}

}  // namespace cutmpc

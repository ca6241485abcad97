#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <stdexcept>

#include "cutmpc/types.hpp"

namespace cutmpc {

namespace detail {
template <class A>
inline auto sigmoid(const A& a) {
  return (1.0 / (1.0 + (-a).exp()));
}
}  // namespace detail

// Input projection (90 -> 90, tanh), two stacked LSTM layers of hidden size 9,
// linear readout to 30.
class LstmModel {
 public:
  static constexpr const char* kArchTag = "lstm";
  static constexpr int kIn = kInputDim;
  static constexpr int kH = 9;
  static constexpr int kOut = kOutputDim;

  using V9 = Eigen::Matrix<double, kH, 1>;
  using V30 = Eigen::Matrix<double, kOut, 1>;
  using V36 = Eigen::Matrix<double, 4 * kH, 1>;
  using V90 = Eigen::Matrix<double, kIn, 1>;

  struct Hidden {
    V9 h1 = V9::Zero(), c1 = V9::Zero(), h2 = V9::Zero(), c2 = V9::Zero();
  };

  struct Cache {
    V90 x, z0;
    V9 i1, f1, g1, o1, c1, tc1, h1, h1_prev, c1_prev;
    V9 i2, f2, g2, o2, c2, tc2, h2, h2_prev, c2_prev;
  };

  // Flat layout: W0, b0, Wx1, Wh1, b1, Wx2, Wh2, b2, Wo, bo.
  static constexpr int kOffW0 = 0;
  static constexpr int kOffB0 = kOffW0 + kIn * kIn;
  static constexpr int kOffWx1 = kOffB0 + kIn;
  static constexpr int kOffWh1 = kOffWx1 + 4 * kH * kIn;
  static constexpr int kOffB1 = kOffWh1 + 4 * kH * kH;
  static constexpr int kOffWx2 = kOffB1 + 4 * kH;
  static constexpr int kOffWh2 = kOffWx2 + 4 * kH * kH;
  static constexpr int kOffB2 = kOffWh2 + 4 * kH * kH;
  static constexpr int kOffWo = kOffB2 + 4 * kH;
  static constexpr int kOffBo = kOffWo + kOut * kH;
  static constexpr int kNumParams = kOffBo + kOut;

  LstmModel() : theta_(Eigen::VectorXd::Zero(kNumParams)) {}

  static LstmModel random_init(std::uint64_t seed) {
    LstmModel m;
    Rng rng(seed);
    auto fill = [&](int off, int rows, int cols, int fan_in) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt((double)fan_in),
                                               1.0 / std::sqrt((double)fan_in));
      for (int i = 0; i < rows * cols; ++i) m.theta_(off + i) = u(rng);
    };
    fill(kOffW0, kIn, kIn, kIn);
    fill(kOffB0, kIn, 1, kIn);
    fill(kOffWx1, 4 * kH, kIn, kIn);
    fill(kOffWh1, 4 * kH, kH, kH);
    fill(kOffB1, 4 * kH, 1, kIn);
    fill(kOffWx2, 4 * kH, kH, kH);
    fill(kOffWh2, 4 * kH, kH, kH);
    fill(kOffB2, 4 * kH, 1, kH);
    fill(kOffWo, kOut, kH, kH);
    fill(kOffBo, kOut, 1, kH);
    return m;
  }

  Eigen::VectorXd& params() { return theta_; }
  const Eigen::VectorXd& params() const { return theta_; }
  static int param_count() { return kNumParams; }
  Hidden zero_hidden() const { return Hidden{}; }

  void forward(const Eigen::VectorXd& x, const Hidden& h, Eigen::VectorXd& y, Hidden& h_out) const {
    Cache c;
    forward_cached(x, h, y, h_out, c);
  }

  void forward_cached(const Eigen::VectorXd& x, const Hidden& h, Eigen::VectorXd& y,
                      Hidden& h_out, Cache& cc) const {
    if (x.size() != kIn) throw std::invalid_argument("LstmModel::forward: input must be 90-d");
    const double* t = theta_.data();
    Eigen::Map<const Eigen::Matrix<double, kIn, kIn>> W0(t + kOffW0);
    Eigen::Map<const V90> b0(t + kOffB0);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kIn>> Wx1(t + kOffWx1);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kH>> Wh1(t + kOffWh1);
    Eigen::Map<const V36> b1(t + kOffB1);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kH>> Wx2(t + kOffWx2);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kH>> Wh2(t + kOffWh2);
    Eigen::Map<const V36> b2(t + kOffB2);
    Eigen::Map<const Eigen::Matrix<double, kOut, kH>> Wo(t + kOffWo);
    Eigen::Map<const V30> bo(t + kOffBo);

    cc.x = x;
    cc.z0 = (W0 * cc.x + b0).array().tanh();

    auto cell = [](const auto& Wx, const auto& Wh, const auto& b, const auto& xin,
                   const V9& h_prev, const V9& c_prev, V9& i, V9& f, V9& g, V9& o, V9& c,
                   V9& tc, V9& hn) {
      V36 a = Wx * xin + Wh * h_prev + b;
      i = detail::sigmoid(a.template segment<kH>(0).array());
      f = detail::sigmoid(a.template segment<kH>(kH).array());
      g = a.template segment<kH>(2 * kH).array().tanh();
      o = detail::sigmoid(a.template segment<kH>(3 * kH).array());
      c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
      tc = c.array().tanh();
      hn = o.cwiseProduct(tc);
    };

    cc.h1_prev = h.h1;
    cc.c1_prev = h.c1;
    cell(Wx1, Wh1, b1, cc.z0, h.h1, h.c1, cc.i1, cc.f1, cc.g1, cc.o1, cc.c1, cc.tc1, cc.h1);
    cc.h2_prev = h.h2;
    cc.c2_prev = h.c2;
    cell(Wx2, Wh2, b2, cc.h1, h.h2, h.c2, cc.i2, cc.f2, cc.g2, cc.o2, cc.c2, cc.tc2, cc.h2);

    y = Wo * cc.h2 + bo;
    h_out.h1 = cc.h1;
    h_out.c1 = cc.c1;
    h_out.h2 = cc.h2;
    h_out.c2 = cc.c2;
  }

  // Backward through one step. dh_out is the gradient arriving at this step's
  // output hidden state from the future; dh_in receives the gradient for the
  // incoming hidden state. Parameter gradients accumulate into grad.
  void backward(const Cache& cc, const Eigen::VectorXd& dy, const Hidden& dh_out,
                Eigen::VectorXd& dx, Hidden& dh_in, Eigen::VectorXd& grad) const {
    const double* t = theta_.data();
    Eigen::Map<const Eigen::Matrix<double, kIn, kIn>> W0(t + kOffW0);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kIn>> Wx1(t + kOffWx1);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kH>> Wh1(t + kOffWh1);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kH>> Wx2(t + kOffWx2);
    Eigen::Map<const Eigen::Matrix<double, 4 * kH, kH>> Wh2(t + kOffWh2);
    Eigen::Map<const Eigen::Matrix<double, kOut, kH>> Wo(t + kOffWo);

    double* g = grad.data();
    Eigen::Map<Eigen::Matrix<double, kIn, kIn>> dW0(g + kOffW0);
    Eigen::Map<V90> db0(g + kOffB0);
    Eigen::Map<Eigen::Matrix<double, 4 * kH, kIn>> dWx1(g + kOffWx1);
    Eigen::Map<Eigen::Matrix<double, 4 * kH, kH>> dWh1(g + kOffWh1);
    Eigen::Map<V36> db1(g + kOffB1);
    Eigen::Map<Eigen::Matrix<double, 4 * kH, kH>> dWx2(g + kOffWx2);
    Eigen::Map<Eigen::Matrix<double, 4 * kH, kH>> dWh2(g + kOffWh2);
    Eigen::Map<V36> db2(g + kOffB2);
    Eigen::Map<Eigen::Matrix<double, kOut, kH>> dWo(g + kOffWo);
    Eigen::Map<V30> dbo(g + kOffBo);

    dWo.noalias() += dy * cc.h2.transpose();
    dbo += dy;

    auto cell_bwd = [](const V9& dh, const V9& dc_in, const V9& i, const V9& f, const V9& g_,
                       const V9& o, const V9& tc, const V9& c_prev, V36& da, V9& dc_prev) {
      V9 do_ = dh.cwiseProduct(tc);
      V9 dc = dc_in + dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
      V9 di = dc.cwiseProduct(g_);
      V9 df = dc.cwiseProduct(c_prev);
      V9 dg = dc.cwiseProduct(i);
      dc_prev = dc.cwiseProduct(f);
      da.segment<kH>(0) = di.array() * i.array() * (1.0 - i.array());
      da.segment<kH>(kH) = df.array() * f.array() * (1.0 - f.array());
      da.segment<kH>(2 * kH) = dg.array() * (1.0 - g_.array().square());
      da.segment<kH>(3 * kH) = do_.array() * o.array() * (1.0 - o.array());
    };

    // Layer 2.
    V9 dh2 = Wo.transpose() * dy + dh_out.h2;
    V36 da2;
    V9 dc2_prev;
    cell_bwd(dh2, dh_out.c2, cc.i2, cc.f2, cc.g2, cc.o2, cc.tc2, cc.c2_prev, da2, dc2_prev);
    dWx2.noalias() += da2 * cc.h1.transpose();
    dWh2.noalias() += da2 * cc.h2_prev.transpose();
    db2 += da2;
    dh_in.h2 = Wh2.transpose() * da2;
    dh_in.c2 = dc2_prev;

    // Layer 1.
    V9 dh1 = Wx2.transpose() * da2 + dh_out.h1;
    V36 da1;
    V9 dc1_prev;
    cell_bwd(dh1, dh_out.c1, cc.i1, cc.f1, cc.g1, cc.o1, cc.tc1, cc.c1_prev, da1, dc1_prev);
    dWx1.noalias() += da1 * cc.z0.transpose();
    dWh1.noalias() += da1 * cc.h1_prev.transpose();
    db1 += da1;
    dh_in.h1 = Wh1.transpose() * da1;
    dh_in.c1 = dc1_prev;

    // Input projection.
    V90 dz0 = Wx1.transpose() * da1;
    V90 da0 = dz0.array() * (1.0 - cc.z0.array().square());
    dW0.noalias() += da0 * cc.x.transpose();
    db0 += da0;
    dx = W0.transpose() * da0;
  }

 private:
  Eigen::VectorXd theta_;
};

}  // namespace cutmpc

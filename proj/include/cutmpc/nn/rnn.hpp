#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <stdexcept>

#include "cutmpc/types.hpp"

namespace cutmpc {

// Six tanh fully connected layers (90 -> 30, then 30 -> 30) followed by two
// Elman recurrent layers of 30 units and a linear readout to 30.
class RnnModel {
 public:
  static constexpr const char* kArchTag = "rnn";
  static constexpr int kIn = kInputDim;
  static constexpr int kW = 30;   // hidden width everywhere past the first layer
  static constexpr int kOut = kOutputDim;
  static constexpr int kFcLayers = 6;

  using VW = Eigen::Matrix<double, kW, 1>;
  using V90 = Eigen::Matrix<double, kIn, 1>;

  struct Hidden {
    VW h1 = VW::Zero(), h2 = VW::Zero();
  };

  struct Cache {
    V90 x;
    VW z[kFcLayers];  // post-tanh FC activations
    VW r1, r2;        // post-tanh recurrent activations
    VW h1_prev, h2_prev;
  };

  // Flat layout: Wf0 (30x90), bf0, Wf1..Wf5 (30x30), bf1..bf5,
  // Wx_r1, Wh_r1, b_r1, Wx_r2, Wh_r2, b_r2, Wo, bo.
  static constexpr int kOffWf0 = 0;
  static constexpr int kOffBf0 = kOffWf0 + kW * kIn;
  static constexpr int kOffFcRest = kOffBf0 + kW;          // 5 x (30x30 + 30)
  static constexpr int kFcRestStride = kW * kW + kW;
  static constexpr int kOffWxR1 = kOffFcRest + 5 * kFcRestStride;
  static constexpr int kOffWhR1 = kOffWxR1 + kW * kW;
  static constexpr int kOffBR1 = kOffWhR1 + kW * kW;
  static constexpr int kOffWxR2 = kOffBR1 + kW;
  static constexpr int kOffWhR2 = kOffWxR2 + kW * kW;
  static constexpr int kOffBR2 = kOffWhR2 + kW * kW;
  static constexpr int kOffWo = kOffBR2 + kW;
  static constexpr int kOffBo = kOffWo + kOut * kW;
  static constexpr int kNumParams = kOffBo + kOut;

  RnnModel() : theta_(Eigen::VectorXd::Zero(kNumParams)) {}

  static RnnModel random_init(std::uint64_t seed) {
    RnnModel m;
    Rng rng(seed);
    auto fill = [&](int off, int count, int fan_in) {
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt((double)fan_in),
                                               1.0 / std::sqrt((double)fan_in));
      for (int i = 0; i < count; ++i) m.theta_(off + i) = u(rng);
    };
    fill(kOffWf0, kW * kIn + kW, kIn);
    for (int l = 0; l < 5; ++l) fill(kOffFcRest + l * kFcRestStride, kFcRestStride, kW);
    fill(kOffWxR1, 2 * kW * kW + kW, kW);
    fill(kOffWxR2, 2 * kW * kW + kW, kW);
    fill(kOffWo, kOut * kW + kOut, kW);
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
    if (x.size() != kIn) throw std::invalid_argument("RnnModel::forward: input must be 90-d");
    const double* t = theta_.data();
    Eigen::Map<const Eigen::Matrix<double, kW, kIn>> Wf0(t + kOffWf0);
    Eigen::Map<const VW> bf0(t + kOffBf0);

    cc.x = x;
    cc.z[0] = (Wf0 * cc.x + bf0).array().tanh();
    for (int l = 1; l < kFcLayers; ++l) {
      const double* base = t + kOffFcRest + (l - 1) * kFcRestStride;
      Eigen::Map<const Eigen::Matrix<double, kW, kW>> W(base);
      Eigen::Map<const VW> b(base + kW * kW);
      cc.z[l] = (W * cc.z[l - 1] + b).array().tanh();
    }

    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WxR1(t + kOffWxR1);
    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WhR1(t + kOffWhR1);
    Eigen::Map<const VW> bR1(t + kOffBR1);
    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WxR2(t + kOffWxR2);
    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WhR2(t + kOffWhR2);
    Eigen::Map<const VW> bR2(t + kOffBR2);
    Eigen::Map<const Eigen::Matrix<double, kOut, kW>> Wo(t + kOffWo);
    Eigen::Map<const Eigen::Matrix<double, kOut, 1>> bo(t + kOffBo);

    cc.h1_prev = h.h1;
    cc.h2_prev = h.h2;
    cc.r1 = (WxR1 * cc.z[kFcLayers - 1] + WhR1 * h.h1 + bR1).array().tanh();
    cc.r2 = (WxR2 * cc.r1 + WhR2 * h.h2 + bR2).array().tanh();

    y = Wo * cc.r2 + bo;
    h_out.h1 = cc.r1;
    h_out.h2 = cc.r2;
  }

  void backward(const Cache& cc, const Eigen::VectorXd& dy, const Hidden& dh_out,
                Eigen::VectorXd& dx, Hidden& dh_in, Eigen::VectorXd& grad) const {
    const double* t = theta_.data();
    double* g = grad.data();

    Eigen::Map<const Eigen::Matrix<double, kOut, kW>> Wo(t + kOffWo);
    Eigen::Map<Eigen::Matrix<double, kOut, kW>> dWo(g + kOffWo);
    Eigen::Map<Eigen::Matrix<double, kOut, 1>> dbo(g + kOffBo);
    dWo.noalias() += dy * cc.r2.transpose();
    dbo += dy;

    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WxR2(t + kOffWxR2);
    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WhR2(t + kOffWhR2);
    Eigen::Map<Eigen::Matrix<double, kW, kW>> dWxR2(g + kOffWxR2);
    Eigen::Map<Eigen::Matrix<double, kW, kW>> dWhR2(g + kOffWhR2);
    Eigen::Map<VW> dbR2(g + kOffBR2);

    VW dr2 = Wo.transpose() * dy + dh_out.h2;
    VW da2 = dr2.array() * (1.0 - cc.r2.array().square());
    dWxR2.noalias() += da2 * cc.r1.transpose();
    dWhR2.noalias() += da2 * cc.h2_prev.transpose();
    dbR2 += da2;
    dh_in.h2 = WhR2.transpose() * da2;

    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WxR1(t + kOffWxR1);
    Eigen::Map<const Eigen::Matrix<double, kW, kW>> WhR1(t + kOffWhR1);
    Eigen::Map<Eigen::Matrix<double, kW, kW>> dWxR1(g + kOffWxR1);
    Eigen::Map<Eigen::Matrix<double, kW, kW>> dWhR1(g + kOffWhR1);
    Eigen::Map<VW> dbR1(g + kOffBR1);

    VW dr1 = WxR2.transpose() * da2 + dh_out.h1;
    VW da1 = dr1.array() * (1.0 - cc.r1.array().square());
    dWxR1.noalias() += da1 * cc.z[kFcLayers - 1].transpose();
    dWhR1.noalias() += da1 * cc.h1_prev.transpose();
    dbR1 += da1;
    dh_in.h1 = WhR1.transpose() * da1;

    VW dz = WxR1.transpose() * da1;
    for (int l = kFcLayers - 1; l >= 1; --l) {
      const double* base = t + kOffFcRest + (l - 1) * kFcRestStride;
      double* gbase = g + kOffFcRest + (l - 1) * kFcRestStride;
      Eigen::Map<const Eigen::Matrix<double, kW, kW>> W(base);
      Eigen::Map<Eigen::Matrix<double, kW, kW>> dW(gbase);
      Eigen::Map<VW> db(gbase + kW * kW);
      VW da = dz.array() * (1.0 - cc.z[l].array().square());
      dW.noalias() += da * cc.z[l - 1].transpose();
      db += da;
      dz = W.transpose() * da;
    }

    Eigen::Map<const Eigen::Matrix<double, kW, kIn>> Wf0(t + kOffWf0);
    Eigen::Map<Eigen::Matrix<double, kW, kIn>> dWf0(g + kOffWf0);
    Eigen::Map<VW> dbf0(g + kOffBf0);
    VW da0 = dz.array() * (1.0 - cc.z[0].array().square());
    dWf0.noalias() += da0 * cc.x.transpose();
    dbf0 += da0;
    dx = Wf0.transpose() * da0;
  }

 private:
  Eigen::VectorXd theta_;
};

}  // namespace cutmpc

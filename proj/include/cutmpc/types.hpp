#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace cutmpc {

using Vec3 = Eigen::Vector3d;

// 200 Hz sample clock used everywhere (plant, controller, blocks).
inline constexpr double kDt = 1.0 / 200.0;
// Samples per block.
inline constexpr int kBlockLen = 10;
// Features per time-step: delta_p (3), f_s (3), f_r (3).
inline constexpr int kFeatDim = 9;
// Flattened block feature vector fed to the network.
inline constexpr int kInputDim = kBlockLen * kFeatDim;   // 90
// Flattened displacement predictions emitted per step.
inline constexpr int kOutputDim = kBlockLen * 3;         // 30

using Rng = std::mt19937_64;

// One 200 Hz tick of the recorded state stream.
struct StateSample {
  double t = 0.0;  // s
  Vec3 p = Vec3::Zero();    // m
  Vec3 f_s = Vec3::Zero();  // N, measured
  Vec3 f_r = Vec3::Zero();  // N, reference
};

}  // namespace cutmpc

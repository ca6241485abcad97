#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cutmpc/types.hpp"

namespace cutmpc {

// Diagonal compliance / stiffness gains of the damping controller.
struct Gains {
  Vec3 K_a = Vec3::Constant(0.003);  // (m/s)/N
  Vec3 K_p = Vec3::Constant(1.0);    // 1/s

  Gains() = default;
  Gains(const Vec3& ka, const Vec3& kp) : K_a(ka), K_p(kp) { validate(); }

  void validate() const {
    if ((K_a.array() <= 0.0).any() || (K_p.array() <= 0.0).any())
      throw std::invalid_argument("Gains: diagonal entries must be strictly positive");
  }
};

// u = K_a (f_s - f_r)
inline Vec3 damping_control(const Vec3& f_s, const Vec3& f_r, const Vec3& K_a) {
  if (!f_s.allFinite() || !f_r.allFinite())
    throw std::invalid_argument("damping_control: non-finite force input");
  return K_a.cwiseProduct(f_s - f_r);
}

// f_r = K_a^-1 (K_p e - pdot_d)
inline Vec3 reference_force(const Vec3& e, const Vec3& pdot_d, const Gains& g) {
  if (!e.allFinite() || !pdot_d.allFinite())
    throw std::invalid_argument("reference_force: non-finite input");
  return (g.K_p.cwiseProduct(e) - pdot_d).cwiseQuotient(g.K_a);
}

// Sampled desired trajectory at 200 Hz.
struct DesiredTrajectory {
  std::vector<Vec3> p_d;
  std::vector<Vec3> pdot_d;
  double saw_amplitude = 0.0;  // m
  double saw_rate = 0.0;       // Hz
  double descent_speed = 0.0;  // m/s
};

// Sinusoidal sawing on Y, linear descent on Z, X held at the start point.
inline DesiredTrajectory make_sawing_trajectory(const Vec3& start, double saw_amplitude,
                                                double saw_rate, double descent_speed,
                                                double duration) {
  if (!(duration > 0.0)) throw std::invalid_argument("make_sawing_trajectory: duration must be positive");
  DesiredTrajectory traj;
  traj.saw_amplitude = saw_amplitude;
  traj.saw_rate = saw_rate;
  traj.descent_speed = descent_speed;
  const double w = 2.0 * std::numbers::pi * saw_rate;
  const int n = static_cast<int>(std::llround(duration / kDt)) + 1;
  traj.p_d.reserve(n);
  traj.pdot_d.reserve(n);
  for (int k = 0; k < n; ++k) {
    double t = k * kDt;
    Vec3 p(start.x(), start.y() + saw_amplitude * std::sin(w * t), start.z() - descent_speed * t);
    Vec3 v(0.0, saw_amplitude * w * std::cos(w * t), -descent_speed);
    traj.p_d.push_back(p);
    traj.pdot_d.push_back(v);
  }
  return traj;
}

}  // namespace cutmpc

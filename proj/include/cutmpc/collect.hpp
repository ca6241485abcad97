#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutmpc/controller.hpp"
#include "cutmpc/dataset.hpp"
#include "cutmpc/sim_env.hpp"
#include "cutmpc/types.hpp"

namespace cutmpc {

// One trajectory-tracked cutting trial on the synthetic plant. The desired
// trajectory starts above the object so the record includes free-space motion.
inline Trial run_tracking_trial(const ObjectClass& cls, const Gains& gains,
                                double saw_amplitude, double saw_rate, double descent_speed,
                                double duration, std::uint64_t seed) {
  Vec3 start(0.0, 0.0, cls.surface_z + 0.005);
  DesiredTrajectory traj = make_sawing_trajectory(start, saw_amplitude, saw_rate, descent_speed,
                                                  duration);
  Rng rng(seed);
  PlantState state = initial_state(cls, start);
  Vec3 f_meas = Vec3::Zero();

  Trial trial;
  trial.class_name = cls.name;
  trial.seen = cls.seen;
  trial.K_a = gains.K_a;
  trial.K_p = gains.K_p;
  trial.seed = seed;
  trial.samples.reserve(traj.p_d.size());

  for (size_t k = 0; k + 1 < traj.p_d.size(); ++k) {
    Vec3 e = state.p - traj.p_d[k];
    Vec3 f_r = reference_force(e, traj.pdot_d[k], gains);
    Vec3 u = damping_control(f_meas, f_r, gains.K_a);
    auto [next, f] = step_plant(state, u, cls, kDt, rng);
    state = next;
    f_meas = f;
    StateSample s;
    s.t = static_cast<double>(k + 1) * kDt;
    s.p = state.p;
    s.f_s = f_meas;
    s.f_r = f_r;
    trial.samples.push_back(s);
    if (!state.p.allFinite()) throw std::runtime_error("run_tracking_trial: simulation diverged");
    if (state.p.z() <= cls.table_z) break;  // reached the board, stop early
  }
  if (trial.samples.size() < 2 * kBlockLen + 1)
    throw std::runtime_error("run_tracking_trial: trial too short");
  return trial;
}

struct CollectionPlan {
  int trials_per_class = 10;
  double duration = 4.0;         // s
  double base_kp = 1.5;          // 1/s
  double base_saw_amplitude = 0.003;  // m
  double base_descent = 0.020;   // m/s
  Vec3 K_a = Vec3::Constant(0.003);
};

// Saw rate suited to a class: stiffer materials need faster sawing.
inline double class_saw_rate(const ObjectClass& cls) {
  return 1.0 + 2.0 * std::min(1.0, cls.k0 / 4000.0);
}

// Gain / rate tiers per class: optimal, class-appropriate, one-size-fits-all.
inline std::vector<Trial> collect_trials(const std::vector<ObjectClass>& classes,
                                         const CollectionPlan& plan, std::uint64_t base_seed) {
  const double kp_tiers[3] = {1.0, 0.6, 1.8};
  const double rate_tiers[3] = {1.0, 0.7, 1.4};
  const double amp_tiers[3] = {1.0, 1.3, 0.7};
  std::vector<Trial> trials;
  for (size_t ci = 0; ci < classes.size(); ++ci) {
    const ObjectClass& cls = classes[ci];
    double rate0 = class_saw_rate(cls);
    for (int i = 0; i < plan.trials_per_class; ++i) {
      int tier = i % 3;
      int var = (i / 3) % 3;
      Gains g(plan.K_a, Vec3::Constant(plan.base_kp * kp_tiers[tier]));
      std::uint64_t seed = base_seed + 1000 * ci + i;
      int attempts = 0;
      for (;;) {
        try {
          trials.push_back(run_tracking_trial(cls, g, plan.base_saw_amplitude * amp_tiers[var],
                                              rate0 * rate_tiers[var], plan.base_descent,
                                              plan.duration, seed));
          break;
        } catch (const std::runtime_error&) {
          // Diverged or degenerate trial: rerun with a fresh seed.
          seed += 7919;
          if (++attempts > 5) throw;
        }
      }
    }
  }
  return trials;
}

}  // namespace cutmpc

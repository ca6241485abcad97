#pragma once

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutmpc/controller.hpp"
#include "cutmpc/dataset.hpp"
#include "cutmpc/nn/rollout.hpp"
#include "cutmpc/sim_env.hpp"
#include "cutmpc/types.hpp"

namespace cutmpc {

struct MpcConfig {
  int H_b = 5;
  int n_candidates = 25;
  double c_cut = 1.0;
  double c_saw = 1.0;
  double c_v = 1e-8;
  double d = 0.015;        // m, sawing half-range
  double epsilon = 0.003;  // m, margin
  double p_table = 0.0;    // m
  double p_center = 0.0;   // m
  Vec3 f_min = Vec3(0.0, -25.0, 0.0);   // N
  Vec3 f_max = Vec3(0.0, 25.0, 15.0);   // N
  double sample_sigma = 3.0;  // N
  double success_tol = 1e-3;  // m
  std::uint64_t seed = 0;

  void validate() const {
    if (c_cut < 0.0 || c_saw < 0.0 || c_v < 0.0)
      throw std::invalid_argument("MpcConfig: cost weights must be >= 0");
    if (!(d > epsilon && epsilon > 0.0))
      throw std::invalid_argument("MpcConfig: need d > epsilon > 0");
    if (n_candidates < 1 || H_b < 1)
      throw std::invalid_argument("MpcConfig: n_candidates and H_b must be >= 1");
  }
};

// C = c_cut * sum (p_z - p_table)^2
//   + c_saw * sum (max{0, |p_y - p_center| - d + eps})^2
//   + c_v   * sum ||f_r||^2
// Position terms run over every predicted sample; the input term over the
// per-block reference forces of the plan.
inline double cost(const std::vector<Block>& predicted, const std::vector<Vec3>& fr_plan,
                   const MpcConfig& cfg) {
  double c = 0.0;
  for (const auto& blk : predicted) {
    BlockMat pos = reconstruct_positions(blk);
    for (int j = 0; j < kBlockLen; ++j) {
      double dz = pos(j, 2) - cfg.p_table;
      c += cfg.c_cut * dz * dz;
      double band = std::abs(pos(j, 1) - cfg.p_center) - cfg.d + cfg.epsilon;
      if (band > 0.0) c += cfg.c_saw * band * band;
    }
  }
  for (const auto& f : fr_plan) c += cfg.c_v * f.squaredNorm();
  return c;
}

// Convenience overload for raw position lists (one row per predicted sample).
inline double cost(const std::vector<Vec3>& positions, const std::vector<Vec3>& fr_plan,
                   const MpcConfig& cfg) {
  double c = 0.0;
  for (const auto& p : positions) {
    double dz = p.z() - cfg.p_table;
    c += cfg.c_cut * dz * dz;
    double band = std::abs(p.y() - cfg.p_center) - cfg.d + cfg.epsilon;
    if (band > 0.0) c += cfg.c_saw * band * band;
  }
  for (const auto& f : fr_plan) c += cfg.c_v * f.squaredNorm();
  return c;
}

// 25 constant-over-horizon reference forces. Candidate 0 is the warm start
// when available; the rest are Gaussian perturbations of it, clipped to the
// force bounds. Without a warm start the draw is uniform within bounds.
// The X component is always zero.
inline std::vector<Vec3> sample_candidates(const std::optional<Vec3>& prev_best,
                                           const MpcConfig& cfg, Rng& rng) {
  std::vector<Vec3> cands;
  cands.reserve(cfg.n_candidates);
  if (prev_best) {
    std::normal_distribution<double> n(0.0, cfg.sample_sigma);
    cands.push_back(*prev_best);
    while (static_cast<int>(cands.size()) < cfg.n_candidates) {
      Vec3 f = *prev_best;
      f.y() = std::clamp(f.y() + n(rng), cfg.f_min.y(), cfg.f_max.y());
      f.z() = std::clamp(f.z() + n(rng), cfg.f_min.z(), cfg.f_max.z());
      f.x() = 0.0;
      cands.push_back(f);
    }
  } else {
    std::uniform_real_distribution<double> uy(cfg.f_min.y(), cfg.f_max.y());
    std::uniform_real_distribution<double> uz(cfg.f_min.z(), cfg.f_max.z());
    while (static_cast<int>(cands.size()) < cfg.n_candidates)
      cands.push_back(Vec3(0.0, uy(rng), uz(rng)));
  }
  return cands;
}

struct PlanResult {
  Vec3 fr_star = Vec3::Zero();
  double predicted_cost = 0.0;
  int candidate_index = -1;
};

// Shooting method: roll every candidate through the model, score with the
// cost, return the argmin (ties by lowest candidate index).
template <class Model>
PlanResult plan(const Model& model, const Block& current, const std::optional<Vec3>& prev_best,
                const MpcConfig& cfg, const Normalizer& nz, const typename Model::Hidden& h0,
                Rng& rng) {
  auto cands = sample_candidates(prev_best, cfg, rng);
  PlanResult best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<BlockMat> fr_plan(cfg.H_b);
  std::vector<Vec3> fr_vec(cfg.H_b);
  for (int ci = 0; ci < static_cast<int>(cands.size()); ++ci) {
    for (int i = 0; i < cfg.H_b; ++i) {
      fr_plan[i] = cands[ci].transpose().replicate<kBlockLen, 1>();
      fr_vec[i] = cands[ci];
    }
    auto pred = rollout(model, current, fr_plan, cfg.H_b, nz, h0);
    bool finite = true;
    for (const auto& b : pred)
      if (!b.delta_p.allFinite()) finite = false;
    if (!finite) continue;
    double c = cost(pred, fr_vec, cfg);
    if (c < best_cost) {
      best_cost = c;
      best.fr_star = cands[ci];
      best.predicted_cost = c;
      best.candidate_index = ci;
    }
  }
  if (best.candidate_index < 0) throw std::runtime_error("plan: all candidates non-finite");
  return best;
}

struct BlockRecord {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 f_s = Vec3::Zero();
  Vec3 f_r = Vec3::Zero();
  double predicted_cost = 0.0;
  double realized_cost = 0.0;
  double cut_term = 0.0, saw_term = 0.0, input_term = 0.0;
};

struct TrialLog {
  std::vector<StateSample> samples;
  std::vector<BlockRecord> blocks;
  bool success = false;
  double duration = 0.0;
  std::string class_name;
  std::string model_tag;

  double mean_block_cost() const {
    if (blocks.empty()) return 0.0;
    double s = 0.0;
    for (const auto& b : blocks) s += b.realized_cost;
    return s / static_cast<double>(blocks.size());
  }
};

// Closed loop at block cadence: plan every 0.05 s, hold fr_star while the
// damping controller runs at 200 Hz, terminate on table contact or at the
// time limit.
template <class Model>
TrialLog run_closed_loop(const ObjectClass& cls, const Model& model, const Normalizer& nz,
                         const MpcConfig& cfg, const Vec3& K_a, double max_duration = 60.0,
                         std::uint64_t seed = 0) {
  cfg.validate();
  TrialLog log;
  log.class_name = cls.name;
  log.model_tag = Model::kArchTag;

  Rng plant_rng(seed);
  Rng plan_rng(seed ^ 0x9e3779b97f4a7c15ull);

  Vec3 start(0.0, cfg.p_center, cls.surface_z + 0.005);
  PlantState state = initial_state(cls, start);
  Vec3 f_meas = Vec3::Zero();

  typename Model::Hidden h_run = model.zero_hidden();
  std::optional<Vec3> prev_best;
  std::deque<StateSample> window;  // last 2M samples

  // Gentle descent reference until enough history exists for the first plan.
  const Vec3 f_boot(0.0, 0.0, 4.0);

  const long max_ticks = static_cast<long>(std::llround(max_duration / kDt));
  long tick = 0;
  bool planning_failed = false;

  auto run_block = [&](const Vec3& f_r) {
    for (int j = 0; j < kBlockLen; ++j) {
      Vec3 u = damping_control(f_meas, f_r, K_a);
      auto [next, f] = step_plant(state, u, cls, kDt, plant_rng);
      state = next;
      f_meas = f;
      StateSample s;
      s.t = state.t;
      s.p = state.p;
      s.f_s = f_meas;
      s.f_r = f_r;
      log.samples.push_back(s);
      window.push_back(s);
      while (window.size() > 2 * kBlockLen) window.pop_front();
      ++tick;
      if (is_success(state, cls, cfg.success_tol) || tick >= max_ticks) return false;
    }
    return true;
  };

  // Bootstrap: two blocks of history before the first planning round.
  bool running = run_block(f_boot) && run_block(f_boot);

  while (running) {
    // Assemble the current block from the last 2M samples.
    Block cur;
    cur.block_index = static_cast<int>(tick / kBlockLen) - 1;
    cur.anchor_p = window[kBlockLen - 1].p;
    for (int j = 0; j < kBlockLen; ++j) {
      const StateSample& s = window[kBlockLen + j];
      cur.delta_p.row(j) = (s.p - cur.anchor_p).transpose();
      cur.f_s.row(j) = s.f_s.transpose();
      cur.f_r.row(j) = s.f_r.transpose();
    }

    PlanResult pr;
    try {
      pr = plan(model, cur, prev_best, cfg, nz, h_run, plan_rng);
    } catch (const std::runtime_error&) {
      planning_failed = true;
      break;
    }
    prev_best = pr.fr_star;

    // Advance the teacher-forced hidden state over the block just consumed.
    {
      Eigen::VectorXd y;
      typename Model::Hidden hn;
      model.forward(block_features(cur, nz), h_run, y, hn);
      h_run = hn;
    }

    size_t first = log.samples.size();
    running = run_block(pr.fr_star);
    size_t last = log.samples.size();

    BlockRecord rec;
    rec.t = log.samples[last - 1].t;
    rec.p = log.samples[last - 1].p;
    rec.f_s = log.samples[last - 1].f_s;
    rec.f_r = pr.fr_star;
    rec.predicted_cost = pr.predicted_cost;
    for (size_t k = first; k < last; ++k) {
      const Vec3& p = log.samples[k].p;
      double dz = p.z() - cfg.p_table;
      rec.cut_term += cfg.c_cut * dz * dz;
      double band = std::abs(p.y() - cfg.p_center) - cfg.d + cfg.epsilon;
      if (band > 0.0) rec.saw_term += cfg.c_saw * band * band;
    }
    rec.input_term = cfg.c_v * pr.fr_star.squaredNorm();
    rec.realized_cost = rec.cut_term + rec.saw_term + rec.input_term;
    log.blocks.push_back(rec);
  }

  log.duration = state.t;
  log.success = !planning_failed && is_success(state, cls, cfg.success_tol);
  if (state.t >= max_duration - 0.5 * kDt && !is_success(state, cls, cfg.success_tol))
    log.success = false;
  return log;
}

// One row per 5 ms sample; block rows additionally carry the plan annotation.
inline void save_trial_log(const TrialLog& log, const std::string& path,
                           const std::string& artifact_header = "") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trial_log: cannot open " + path);
  out.precision(17);
  if (!artifact_header.empty()) out << artifact_header << "\n";
  out << "# class=" << log.class_name << " model=" << log.model_tag
      << " success=" << (log.success ? 1 : 0) << " duration=" << log.duration
      << " mean_block_cost=" << log.mean_block_cost() << "\n";
  out << "t,px,py,pz,fsx,fsy,fsz,frx,fry,frz,block_end,predicted_cost,realized_cost\n";
  size_t bi = 0;
  for (const auto& s : log.samples) {
    out << s.t << "," << s.p.x() << "," << s.p.y() << "," << s.p.z() << ","
        << s.f_s.x() << "," << s.f_s.y() << "," << s.f_s.z() << ","
        << s.f_r.x() << "," << s.f_r.y() << "," << s.f_r.z();
    if (bi < log.blocks.size() && std::abs(log.blocks[bi].t - s.t) < 1e-9) {
      out << ",1," << log.blocks[bi].predicted_cost << "," << log.blocks[bi].realized_cost;
      ++bi;
    } else {
      out << ",0,,";
    }
    out << "\n";
  }
}

// Total lateral travel of the executed trajectory, a sawing-intensity proxy.
inline double lateral_path_length(const TrialLog& log) {
  double s = 0.0;
  for (size_t i = 1; i < log.samples.size(); ++i)
    s += std::abs(log.samples[i].p.y() - log.samples[i - 1].p.y());
  return s;
}

}  // namespace cutmpc

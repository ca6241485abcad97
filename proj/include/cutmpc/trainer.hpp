#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutmpc/dataset.hpp"
#include "cutmpc/nn/adam.hpp"
#include "cutmpc/nn/rollout.hpp"
#include "cutmpc/types.hpp"

namespace cutmpc {

enum class Variant { rnn, lstm, lstm_c, lstm_lr_c };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::rnn: return "rnn";
    case Variant::lstm: return "lstm";
    case Variant::lstm_c: return "lstm-c";
    case Variant::lstm_lr_c: return "lstm-lr-c";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "rnn") return Variant::rnn;
  if (s == "lstm") return Variant::lstm;
  if (s == "lstm-c") return Variant::lstm_c;
  if (s == "lstm-lr-c") return Variant::lstm_lr_c;
  throw std::invalid_argument("unknown variant: " + s);
}

struct TrainConfig {
  Variant variant = Variant::lstm_lr_c;
  double lr = 1e-4;
  double wd = 3e-4;
  double gamma = 0.5;  // lr decay at each horizon transition (curriculum only)
  int H_target = 5;
  int epochs_per_stage = 10;
  int final_stage_epochs = 20;
  int batch_size = 16;
  int window_stride = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (wd < 0.0) throw std::invalid_argument("TrainConfig: wd must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("TrainConfig: gamma in (0,1]");
    if (H_target < 1) throw std::invalid_argument("TrainConfig: H_target must be >= 1");
    if (batch_size < 1 || window_stride < 1)
      throw std::invalid_argument("TrainConfig: batch_size and window_stride must be >= 1");
  }

  int total_epochs() const { return epochs_per_stage * (H_target - 1) + final_stage_epochs; }
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<int> epoch_horizon;
  std::vector<double> epoch_lr;
  double wall_time_s = 0.0;
  std::vector<double> val_mse_per_horizon;  // mm^2, filled by the caller
};

// Trial pre-processed into normalized per-block feature vectors.
struct PreparedTrial {
  std::string class_name;
  bool seen = true;
  std::vector<Block> blocks;
  std::vector<Eigen::VectorXd> x;    // 90-d inputs
  std::vector<Eigen::VectorXd> dpn;  // 30-d normalized displacements
  std::vector<Eigen::VectorXd> fsn;  // 30-d normalized measured forces
  std::vector<Eigen::VectorXd> frn;  // 30-d normalized reference forces
};

struct PreparedData {
  std::vector<PreparedTrial> trials;
  Normalizer nz;
};

inline PreparedData prepare_data(const std::vector<Trial>& trials, const Normalizer& nz) {
  PreparedData data;
  data.nz = nz;
  data.trials.reserve(trials.size());
  for (const auto& t : trials) {
    PreparedTrial pt;
    pt.class_name = t.class_name;
    pt.seen = t.seen;
    pt.blocks = form_blocks(t);
    for (const auto& b : pt.blocks) {
      pt.x.push_back(block_features(b, nz));
      pt.dpn.push_back(block_delta_target(b, nz));
      pt.fsn.push_back(block_fs_features(b, nz));
      pt.frn.push_back(block_fr_features(b.f_r, nz));
    }
    data.trials.push_back(std::move(pt));
  }
  return data;
}

// Fits the normalizer on the given trials and prepares them in one go.
inline PreparedData prepare_training_data(const std::vector<Trial>& trials) {
  std::vector<Block> all;
  for (const auto& t : trials) {
    auto bs = form_blocks(t);
    all.insert(all.end(), bs.begin(), bs.end());
  }
  return prepare_data(trials, fit_normalizer(all));
}

namespace detail {

struct Stage {
  int horizon;
  int epochs;
  double lr;
};

template <class Model>
TrainReport run_stages(Model& model, const PreparedData& data, const TrainConfig& cfg,
                       const std::vector<Stage>& stages) {
  auto t_start = std::chrono::steady_clock::now();
  TrainReport report;
  Rng rng(cfg.seed);
  AdamState opt(model.params().size());
  opt.wd = cfg.wd;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.params().size());

  struct WindowRef {
    int trial;
    int start;
  };

  for (const auto& stage : stages) {
    opt.lr = stage.lr;
    const int h = stage.horizon;
    for (int epoch = 0; epoch < stage.epochs; ++epoch) {
      std::vector<int> order(data.trials.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);

      double loss_sum = 0.0;
      long n_windows = 0;
      for (int ti : order) {
        const PreparedTrial& tr = data.trials[ti];
        const int B = static_cast<int>(tr.blocks.size());
        if (B < h + 1) continue;

        // Teacher-forced sweep gives each window its warm hidden state.
        std::vector<typename Model::Hidden> h_before(B);
        h_before[0] = model.zero_hidden();
        Eigen::VectorXd y;
        for (int b = 0; b + 1 < B; ++b) {
          typename Model::Hidden hn;
          model.forward(tr.x[b], h_before[b], y, hn);
          h_before[b + 1] = hn;
        }

        std::vector<WindowRef> windows;
        for (int s = 0; s + h < B; s += cfg.window_stride) windows.push_back({ti, s});
        std::shuffle(windows.begin(), windows.end(), rng);

        std::vector<Eigen::VectorXd> fr_plan(h), targets(h);
        size_t done = 0;
        while (done < windows.size()) {
          size_t batch = std::min<size_t>(cfg.batch_size, windows.size() - done);
          grad.setZero();
          double batch_loss = 0.0;
          for (size_t k = 0; k < batch; ++k) {
            const WindowRef& w = windows[done + k];
            for (int i = 0; i < h; ++i) {
              fr_plan[i] = tr.frn[w.start + i];
              targets[i] = tr.dpn[w.start + 1 + i];
            }
            batch_loss += rollout_loss_grad(model, tr.dpn[w.start], tr.fsn[w.start], fr_plan,
                                            targets, h, h_before[w.start], &grad);
          }
          grad /= static_cast<double>(batch);
          adam_step(model.params(), grad, opt);
          loss_sum += batch_loss;
          n_windows += batch;
          done += batch;
        }
      }
      double epoch_loss = n_windows > 0 ? loss_sum / n_windows : 0.0;
      if (!std::isfinite(epoch_loss)) throw std::runtime_error("training diverged: non-finite loss");
      report.epoch_loss.push_back(epoch_loss);
      report.epoch_horizon.push_back(h);
      report.epoch_lr.push_back(stage.lr);
    }
  }
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace detail

// Fixed-horizon training for the rnn / lstm baselines. The epoch budget
// matches the curriculum total so comparisons measure the schedule.
template <class Model>
TrainReport train_direct(Model& model, const PreparedData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.variant != Variant::rnn && cfg.variant != Variant::lstm)
    throw std::invalid_argument("train_direct: variant must be rnn or lstm");
  std::vector<detail::Stage> stages{{cfg.H_target, cfg.total_epochs(), cfg.lr}};
  return detail::run_stages(model, data, cfg, stages);
}

// Horizon curriculum 1..H_target: 10 epochs per stage, 20 in the final one,
// lr scaled by gamma at every horizon transition (lstm-c keeps gamma = 1).
template <class Model>
TrainReport train_curriculum(Model& model, const PreparedData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.variant != Variant::lstm_c && cfg.variant != Variant::lstm_lr_c)
    throw std::invalid_argument("train_curriculum: variant must be lstm-c or lstm-lr-c");
  const double gamma = cfg.variant == Variant::lstm_lr_c ? cfg.gamma : 1.0;
  std::vector<detail::Stage> stages;
  double lr = cfg.lr;
  for (int h = 1; h <= cfg.H_target; ++h) {
    bool final_stage = h == cfg.H_target;
    stages.push_back({h, final_stage ? cfg.final_stage_epochs : cfg.epochs_per_stage, lr});
    if (!final_stage) lr *= gamma;
  }
  return detail::run_stages(model, data, cfg, stages);
}

template <class Model>
TrainReport train(Model& model, const PreparedData& data, const TrainConfig& cfg) {
  if (cfg.variant == Variant::rnn || cfg.variant == Variant::lstm)
    return train_direct(model, data, cfg);
  return train_curriculum(model, data, cfg);
}

// Mean squared prediction error at each lookahead 1..H_max, in mm^2 of
// physical displacement, averaged over every valid window of the data.
template <class Model>
std::vector<double> evaluate_mse_vs_horizon(const Model& model, const PreparedData& data,
                                            int H_max) {
  if (H_max < 1) throw std::invalid_argument("evaluate_mse_vs_horizon: H_max must be >= 1");
  std::vector<double> err_sum(H_max, 0.0);
  long count = 0;
  Eigen::VectorXd scale_mm(kOutputDim);
  for (int j = 0; j < kBlockLen; ++j)
    for (int a = 0; a < 3; ++a) scale_mm(j * 3 + a) = data.nz.std(a) * 1000.0;

  std::vector<Eigen::VectorXd> fr_plan(H_max);
  for (const auto& tr : data.trials) {
    const int B = static_cast<int>(tr.blocks.size());
    if (B < H_max + 1) continue;
    std::vector<typename Model::Hidden> h_before(B);
    h_before[0] = model.zero_hidden();
    Eigen::VectorXd y;
    for (int b = 0; b + 1 < B; ++b) {
      typename Model::Hidden hn;
      model.forward(tr.x[b], h_before[b], y, hn);
      h_before[b + 1] = hn;
    }
    for (int s = 0; s + H_max < B; ++s) {
      for (int i = 0; i < H_max; ++i) fr_plan[i] = tr.frn[s + i];
      auto ys = rollout_normalized(model, tr.dpn[s], tr.fsn[s], fr_plan, H_max, h_before[s]);
      for (int i = 0; i < H_max; ++i)
        err_sum[i] += ((ys[i] - tr.dpn[s + 1 + i]).cwiseProduct(scale_mm)).squaredNorm();
      ++count;
    }
  }
  std::vector<double> curve(H_max, 0.0);
  for (int i = 0; i < H_max; ++i)
    curve[i] = count > 0 ? err_sum[i] / (static_cast<double>(count) * kOutputDim) : 0.0;
  return curve;
}

}  // namespace cutmpc

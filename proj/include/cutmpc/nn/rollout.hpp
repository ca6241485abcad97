#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "cutmpc/dataset.hpp"
#include "cutmpc/types.hpp"

namespace cutmpc {

// Interleave normalized per-time-step parts [dp fs fr] into the 90-d input.
inline Eigen::VectorXd assemble_input(const Eigen::VectorXd& dp, const Eigen::VectorXd& fs,
                                      const Eigen::VectorXd& fr) {
  Eigen::VectorXd x(kInputDim);
  for (int j = 0; j < kBlockLen; ++j) {
    x.segment<3>(j * kFeatDim) = dp.segment<3>(j * 3);
    x.segment<3>(j * kFeatDim + 3) = fs.segment<3>(j * 3);
    x.segment<3>(j * kFeatDim + 6) = fr.segment<3>(j * 3);
  }
  return x;
}

// Normalized f_s part of a block's features (30-vector).
inline Eigen::VectorXd block_fs_features(const Block& b, const Normalizer& nz) {
  Eigen::VectorXd v(kOutputDim);
  for (int j = 0; j < kBlockLen; ++j)
    for (int a = 0; a < 3; ++a)
      v(j * 3 + a) = (b.f_s(j, a) - nz.mean(3 + a)) / nz.std(3 + a);
  return v;
}

// Recursive multi-step prediction in normalized space. Step 0 consumes the
// seed displacements; later steps feed the previous prediction back as the
// displacement features. The measured-force features are held at the seed
// block's values throughout; fr_plan supplies the reference-force features
// of every consumed block (seed included).
//
// Model concept: Hidden, Cache, zero_hidden(), forward/forward_cached/backward,
// params(); see LstmModel.
template <class Model>
std::vector<Eigen::VectorXd> rollout_normalized(const Model& model, const Eigen::VectorXd& dp_seed,
                                                const Eigen::VectorXd& fs_held,
                                                const std::vector<Eigen::VectorXd>& fr_plan,
                                                int H_b, const typename Model::Hidden& h0,
                                                typename Model::Hidden* h_end = nullptr) {
  if (H_b < 1) throw std::invalid_argument("rollout: H_b must be >= 1");
  if (static_cast<int>(fr_plan.size()) != H_b)
    throw std::invalid_argument("rollout: fr_plan length must equal H_b");
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(H_b);
  typename Model::Hidden h = h0;
  Eigen::VectorXd y;
  for (int i = 0; i < H_b; ++i) {
    const Eigen::VectorXd& dp = (i == 0) ? dp_seed : ys.back();
    Eigen::VectorXd x = assemble_input(dp, fs_held, fr_plan[i]);
    typename Model::Hidden h_next;
    model.forward(x, h, y, h_next);
    ys.push_back(y);
    h = h_next;
  }
  if (h_end) *h_end = h;
  return ys;
}

// Physical-units rollout: returns H_b predicted blocks with chained anchors.
template <class Model>
std::vector<Block> rollout(const Model& model, const Block& seed,
                           const std::vector<BlockMat>& fr_plan, int H_b, const Normalizer& nz,
                           const typename Model::Hidden& h0) {
  std::vector<Eigen::VectorXd> frs;
  frs.reserve(fr_plan.size());
  for (const auto& f : fr_plan) frs.push_back(block_fr_features(f, nz));
  auto ys = rollout_normalized(model, block_delta_target(seed, nz), block_fs_features(seed, nz),
                               frs, H_b, h0);
  std::vector<Block> out;
  out.reserve(H_b);
  Vec3 anchor = seed.anchor_p + seed.delta_p.row(kBlockLen - 1).transpose();
  for (int i = 0; i < H_b; ++i) {
    Block b;
    b.block_index = seed.block_index + 1 + i;
    b.anchor_p = anchor;
    b.delta_p = denormalize_delta(ys[i], nz);
    b.f_s = seed.f_s;  // held
    b.f_r = fr_plan[i];
    anchor += b.delta_p.row(kBlockLen - 1).transpose();
    out.push_back(b);
  }
  return out;
}

// MSE over all 30*H_b normalized displacement entries, with exact gradients
// through the recursive rollout (BPTT across blocks and through the feedback
// of predictions into later inputs). grad may be null for loss-only calls;
// when given it must be preallocated and is accumulated into.
template <class Model>
double rollout_loss_grad(const Model& model, const Eigen::VectorXd& dp_seed,
                         const Eigen::VectorXd& fs_held,
                         const std::vector<Eigen::VectorXd>& fr_plan,
                         const std::vector<Eigen::VectorXd>& targets, int H_b,
                         const typename Model::Hidden& h0, Eigen::VectorXd* grad) {
  if (static_cast<int>(targets.size()) != H_b)
    throw std::invalid_argument("rollout_loss_grad: targets length must equal H_b");
  if (static_cast<int>(fr_plan.size()) != H_b)
    throw std::invalid_argument("rollout_loss_grad: fr_plan length must equal H_b");

  std::vector<typename Model::Cache> caches(H_b);
  std::vector<Eigen::VectorXd> ys(H_b);
  typename Model::Hidden h = h0;
  for (int i = 0; i < H_b; ++i) {
    const Eigen::VectorXd& dp = (i == 0) ? dp_seed : ys[i - 1];
    Eigen::VectorXd x = assemble_input(dp, fs_held, fr_plan[i]);
    typename Model::Hidden h_next;
    model.forward_cached(x, h, ys[i], h_next, caches[i]);
    h = h_next;
  }

  const double scale = 1.0 / (kOutputDim * H_b);
  double loss = 0.0;
  for (int i = 0; i < H_b; ++i) loss += (ys[i] - targets[i]).squaredNorm();
  loss *= scale;
  if (!grad) return loss;

  typename Model::Hidden dh = model.zero_hidden();  // no gradient from beyond the horizon
  Eigen::VectorXd dy_feedback = Eigen::VectorXd::Zero(kOutputDim);
  Eigen::VectorXd dx(kInputDim);
  for (int i = H_b - 1; i >= 0; --i) {
    Eigen::VectorXd dy = 2.0 * scale * (ys[i] - targets[i]);
    if (i < H_b - 1) dy += dy_feedback;
    typename Model::Hidden dh_in;
    model.backward(caches[i], dy, dh, dx, dh_in, *grad);
    dh = dh_in;
    if (i > 0) {
      // Displacement features of input i came from prediction i-1.
      for (int j = 0; j < kBlockLen; ++j)
        dy_feedback.segment<3>(j * 3) = dx.segment<3>(j * kFeatDim);
    }
  }
  return loss;
}

// Block-level wrapper matching the dataset types.
template <class Model>
double loss_and_gradients(const Model& model, const Block& seed,
                          const std::vector<BlockMat>& fr_plan,
                          const std::vector<Block>& target_blocks, int H_b, const Normalizer& nz,
                          const typename Model::Hidden& h0, Eigen::VectorXd* grad) {
  std::vector<Eigen::VectorXd> frs, tgts;
  for (const auto& f : fr_plan) frs.push_back(block_fr_features(f, nz));
  for (const auto& b : target_blocks) tgts.push_back(block_delta_target(b, nz));
  return rollout_loss_grad(model, block_delta_target(seed, nz), block_fs_features(seed, nz), frs,
                           tgts, H_b, h0, grad);
}

}  // namespace cutmpc

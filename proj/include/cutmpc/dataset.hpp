#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutmpc/types.hpp"

namespace cutmpc {

// One recorded cutting trial.
struct Trial {
  std::vector<StateSample> samples;
  std::string class_name;
  bool seen = true;
  Vec3 K_a = Vec3::Constant(0.003);
  Vec3 K_p = Vec3::Constant(1.0);
  std::uint64_t seed = 0;

  void validate() const {
    for (size_t i = 1; i < samples.size(); ++i) {
      if (std::abs((samples[i].t - samples[i - 1].t) - kDt) > 1e-9)
        throw std::runtime_error("Trial: non-uniform sample spacing at index " + std::to_string(i));
    }
  }
};

using BlockMat = Eigen::Matrix<double, kBlockLen, 3>;

// M consecutive samples with positions expressed relative to the previous
// block's last position.
struct Block {
  BlockMat delta_p = BlockMat::Zero();  // m
  BlockMat f_s = BlockMat::Zero();      // N
  BlockMat f_r = BlockMat::Zero();      // N
  Vec3 anchor_p = Vec3::Zero();         // m, last absolute position of the previous block
  int block_index = 0;
};

// Splits a trial into non-overlapping blocks starting at sample M; the first
// M samples only supply the anchor of block 1.
inline std::vector<Block> form_blocks(const Trial& trial, int M = kBlockLen) {
  const int n = static_cast<int>(trial.samples.size());
  if (n < 2 * M + 1)
    throw std::invalid_argument("form_blocks: trial needs at least 2M+1 samples");
  const int count = (n - M) / M;
  std::vector<Block> blocks;
  blocks.reserve(count);
  for (int b = 1; b <= count; ++b) {
    Block blk;
    blk.block_index = b;
    blk.anchor_p = trial.samples[b * M - 1].p;
    for (int j = 0; j < M; ++j) {
      const StateSample& s = trial.samples[b * M + j];
      blk.delta_p.row(j) = (s.p - blk.anchor_p).transpose();
      blk.f_s.row(j) = s.f_s.transpose();
      blk.f_r.row(j) = s.f_r.transpose();
    }
    blocks.push_back(blk);
  }
  return blocks;
}

inline BlockMat reconstruct_positions(const Block& block) {
  return block.delta_p.rowwise() + block.anchor_p.transpose();
}

// Per-feature standardization statistics fitted on the training split.
struct Normalizer {
  Eigen::Matrix<double, kFeatDim, 1> mean = Eigen::Matrix<double, kFeatDim, 1>::Zero();
  Eigen::Matrix<double, kFeatDim, 1> std = Eigen::Matrix<double, kFeatDim, 1>::Ones();
};

// Row of the 9 per-time-step features of a block.
inline Eigen::Matrix<double, kFeatDim, 1> feature_row(const Block& b, int j) {
  Eigen::Matrix<double, kFeatDim, 1> r;
  r << b.delta_p(j, 0), b.delta_p(j, 1), b.delta_p(j, 2),
       b.f_s(j, 0), b.f_s(j, 1), b.f_s(j, 2),
       b.f_r(j, 0), b.f_r(j, 1), b.f_r(j, 2);
  return r;
}

// Population convention (divide by N).
inline Normalizer fit_normalizer(const std::vector<Block>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("fit_normalizer: empty training set");
  const double n = static_cast<double>(blocks.size() * kBlockLen);
  Normalizer nz;
  nz.mean.setZero();
  for (const auto& b : blocks)
    for (int j = 0; j < kBlockLen; ++j) nz.mean += feature_row(b, j);
  nz.mean /= n;
  Eigen::Matrix<double, kFeatDim, 1> var = Eigen::Matrix<double, kFeatDim, 1>::Zero();
  for (const auto& b : blocks)
    for (int j = 0; j < kBlockLen; ++j) {
      auto d = (feature_row(b, j) - nz.mean).eval();
      var += d.cwiseProduct(d);
    }
  var /= n;
  nz.std = var.cwiseSqrt();
  for (int i = 0; i < kFeatDim; ++i)
    if (!(nz.std(i) > 1e-12))
      throw std::runtime_error("fit_normalizer: feature " + std::to_string(i) + " has zero variance");
  return nz;
}

inline Block apply_normalizer(const Block& b, const Normalizer& nz) {
  Block out = b;
  for (int j = 0; j < kBlockLen; ++j) {
    for (int a = 0; a < 3; ++a) {
      out.delta_p(j, a) = (b.delta_p(j, a) - nz.mean(a)) / nz.std(a);
      out.f_s(j, a) = (b.f_s(j, a) - nz.mean(3 + a)) / nz.std(3 + a);
      out.f_r(j, a) = (b.f_r(j, a) - nz.mean(6 + a)) / nz.std(6 + a);
    }
  }
  return out;
}

inline std::vector<Block> apply_normalizer(const std::vector<Block>& blocks, const Normalizer& nz) {
  std::vector<Block> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(apply_normalizer(b, nz));
  return out;
}

// --- feature packing for the networks ---

// Flattened 90-vector [dp(3) fs(3) fr(3)] x M, normalized.
inline Eigen::VectorXd block_features(const Block& b, const Normalizer& nz) {
  Eigen::VectorXd x(kInputDim);
  for (int j = 0; j < kBlockLen; ++j)
    for (int a = 0; a < 3; ++a) {
      x(j * kFeatDim + a) = (b.delta_p(j, a) - nz.mean(a)) / nz.std(a);
      x(j * kFeatDim + 3 + a) = (b.f_s(j, a) - nz.mean(3 + a)) / nz.std(3 + a);
      x(j * kFeatDim + 6 + a) = (b.f_r(j, a) - nz.mean(6 + a)) / nz.std(6 + a);
    }
  return x;
}

// Normalized displacement target (30-vector) of a block.
inline Eigen::VectorXd block_delta_target(const Block& b, const Normalizer& nz) {
  Eigen::VectorXd y(kOutputDim);
  for (int j = 0; j < kBlockLen; ++j)
    for (int a = 0; a < 3; ++a)
      y(j * 3 + a) = (b.delta_p(j, a) - nz.mean(a)) / nz.std(a);
  return y;
}

// Normalized f_r features (30-vector) of a block.
inline Eigen::VectorXd block_fr_features(const BlockMat& f_r, const Normalizer& nz) {
  Eigen::VectorXd v(kOutputDim);
  for (int j = 0; j < kBlockLen; ++j)
    for (int a = 0; a < 3; ++a)
      v(j * 3 + a) = (f_r(j, a) - nz.mean(6 + a)) / nz.std(6 + a);
  return v;
}

// Inverse of block_delta_target for a flat prediction.
inline BlockMat denormalize_delta(const Eigen::VectorXd& y, const Normalizer& nz) {
  BlockMat m;
  for (int j = 0; j < kBlockLen; ++j)
    for (int a = 0; a < 3; ++a)
      m(j, a) = y(j * 3 + a) * nz.std(a) + nz.mean(a);
  return m;
}

// --- persistence: one CSV per trial plus a manifest ---

inline void save_trial(const Trial& trial, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trial: cannot open " + path);
  out.precision(17);
  out << "# class=" << trial.class_name << " seen=" << (trial.seen ? 1 : 0)
      << " seed=" << trial.seed
      << " Ka=" << trial.K_a.x() << "," << trial.K_a.y() << "," << trial.K_a.z()
      << " Kp=" << trial.K_p.x() << "," << trial.K_p.y() << "," << trial.K_p.z() << "\n";
  out << "t,px,py,pz,fsx,fsy,fsz,frx,fry,frz\n";
  for (const auto& s : trial.samples) {
    out << s.t << "," << s.p.x() << "," << s.p.y() << "," << s.p.z() << ","
        << s.f_s.x() << "," << s.f_s.y() << "," << s.f_s.z() << ","
        << s.f_r.x() << "," << s.f_r.y() << "," << s.f_r.z() << "\n";
  }
}

inline Trial load_trial(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trial: cannot open " + path);
  Trial trial;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "class") trial.class_name = val;
        else if (key == "seen") trial.seen = val != "0";
        else if (key == "seed") trial.seed = std::stoull(val);
        else if (key == "Ka" || key == "Kp") {
          Vec3 v;
          if (std::sscanf(val.c_str(), "%lf,%lf,%lf", &v.x(), &v.y(), &v.z()) != 3)
            throw std::runtime_error("load_trial: bad gain triple at line " + std::to_string(lineno));
          (key == "Ka" ? trial.K_a : trial.K_p) = v;
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line.rfind("t,px", 0) != 0)
        throw std::runtime_error("load_trial: missing header at line " + std::to_string(lineno));
      header_seen = true;
      continue;
    }
    StateSample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf",
                    &s.t, &s.p.x(), &s.p.y(), &s.p.z(),
                    &s.f_s.x(), &s.f_s.y(), &s.f_s.z(),
                    &s.f_r.x(), &s.f_r.y(), &s.f_r.z()) != 10)
      throw std::runtime_error("load_trial: parse error at line " + std::to_string(lineno));
    trial.samples.push_back(s);
  }
  if (!header_seen) throw std::runtime_error("load_trial: empty or headerless file " + path);
  trial.validate();
  return trial;
}

inline void save_trials(const std::vector<Trial>& trials, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream mf(fs::path(dir) / "manifest.csv");
  if (!mf) throw std::runtime_error("save_trials: cannot open manifest in " + dir);
  mf << "file,class,seen,seed\n";
  for (size_t i = 0; i < trials.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%04zu.csv", i);
    save_trial(trials[i], (fs::path(dir) / name).string());
    mf << name << "," << trials[i].class_name << "," << (trials[i].seen ? 1 : 0) << ","
       << trials[i].seed << "\n";
  }
}

inline std::vector<Trial> load_trials(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.csv");
  if (!mf) throw std::runtime_error("load_trials: cannot open manifest in " + dir);
  std::string line;
  if (!std::getline(mf, line) || line.rfind("file,", 0) != 0)
    throw std::runtime_error("load_trials: malformed manifest header");
  std::vector<Trial> trials;
  int lineno = 1;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("load_trials: malformed manifest at line " + std::to_string(lineno));
    trials.push_back(load_trial((fs::path(dir) / line.substr(0, comma)).string()));
  }
  return trials;
}

}  // namespace cutmpc

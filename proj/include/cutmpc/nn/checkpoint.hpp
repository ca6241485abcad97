#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include "cutmpc/dataset.hpp"

namespace cutmpc {

// Versioned text checkpoint: architecture tag, normalizer statistics, and all
// weights printed with round-trip precision.
template <class Model>
void save_checkpoint(const Model& model, const Normalizer& nz, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.precision(17);
  out << "cutmpc-checkpoint v1\n";
  out << "arch " << Model::kArchTag << "\n";
  out << "params " << model.param_count() << "\n";
  out << "norm_mean";
  for (int i = 0; i < kFeatDim; ++i) out << " " << nz.mean(i);
  out << "\nnorm_std";
  for (int i = 0; i < kFeatDim; ++i) out << " " << nz.std(i);
  out << "\n";
  const auto& t = model.params();
  for (Eigen::Index i = 0; i < t.size(); ++i) out << t(i) << "\n";
}

inline std::string checkpoint_arch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint_arch: cannot open " + path);
  std::string magic, version, key, arch;
  in >> magic >> version >> key >> arch;
  if (magic != "cutmpc-checkpoint" || version != "v1" || key != "arch")
    throw std::runtime_error("checkpoint_arch: not a cutmpc checkpoint: " + path);
  return arch;
}

template <class Model>
Model load_checkpoint(const std::string& path, Normalizer& nz) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string magic, version, key, arch;
  in >> magic >> version >> key >> arch;
  if (magic != "cutmpc-checkpoint" || version != "v1")
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  if (arch != Model::kArchTag)
    throw std::runtime_error("load_checkpoint: architecture mismatch, file has '" + arch +
                             "' but '" + std::string(Model::kArchTag) + "' was requested");
  long n = 0;
  in >> key >> n;
  if (key != "params" || n != Model::param_count())
    throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path);
  in >> key;
  if (key != "norm_mean") throw std::runtime_error("load_checkpoint: missing norm_mean");
  for (int i = 0; i < kFeatDim; ++i) in >> nz.mean(i);
  in >> key;
  if (key != "norm_std") throw std::runtime_error("load_checkpoint: missing norm_std");
  for (int i = 0; i < kFeatDim; ++i) in >> nz.std(i);
  Model model;
  for (Eigen::Index i = 0; i < model.params().size(); ++i) {
    if (!(in >> model.params()(i)))
      throw std::runtime_error("load_checkpoint: truncated weights in " + path);
  }
  return model;
}

}  // namespace cutmpc

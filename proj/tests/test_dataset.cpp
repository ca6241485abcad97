#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "cutmpc/dataset.hpp"

using namespace cutmpc;

namespace {

Trial make_trial(int n, const std::function<Vec3(int)>& pos) {
  Trial t;
  t.class_name = "test";
  for (int k = 0; k < n; ++k) {
    StateSample s;
    s.t = k * kDt;
    s.p = pos(k);
    s.f_s = Vec3(0.1 * k, -0.2, 0.3);
    s.f_r = Vec3(0.0, 0.5, 1.0 + 0.01 * k);
    t.samples.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("form_blocks counting contract") {
  auto t = make_trial(3 * kBlockLen, [](int k) { return Vec3(0.0, 0.0, 0.001 * k); });
  auto blocks = form_blocks(t);
  CHECK(blocks.size() == 2);  // floor((len - M) / M)

  auto t2 = make_trial(2 * kBlockLen + 5, [](int k) { return Vec3(0.0, 0.0, 0.001 * k); });
  CHECK(form_blocks(t2).size() == 1);

  auto too_short = make_trial(2 * kBlockLen, [](int) { return Vec3::Zero(); });
  CHECK_THROWS_AS(form_blocks(too_short), std::invalid_argument);
}

TEST_CASE("constant positions give zero displacements") {
  auto t = make_trial(5 * kBlockLen, [](int) { return Vec3(1.0, 2.0, 3.0); });
  for (const auto& b : form_blocks(t)) CHECK(b.delta_p.norm() == 0.0);
}

TEST_CASE("hand-evaluated displacement transform at M=2") {
  // p = 0.00, 0.01, 0.02, ... on one axis; block anchored at p=0.01 must give
  // delta_p = (0.01, 0.02).
  Trial t;
  for (int k = 0; k < 6; ++k) {
    StateSample s;
    s.t = k * kDt;
    s.p = Vec3(0.01 * k, 0.0, 0.0);
    t.samples.push_back(s);
  }
  auto blocks = form_blocks(t, 2);
  REQUIRE(blocks.size() >= 1);
  CHECK(blocks[0].anchor_p.x() == Catch::Approx(0.01));
  CHECK(blocks[0].delta_p(0, 0) == Catch::Approx(0.01));
  CHECK(blocks[0].delta_p(1, 0) == Catch::Approx(0.02));

  // Inverse: reconstruct recovers (0.02, 0.03).
  Eigen::Matrix<double, kBlockLen, 3> rec;
  auto pos = blocks[0].delta_p.rowwise() + blocks[0].anchor_p.transpose();
  CHECK(pos(0, 0) == Catch::Approx(0.02));
  CHECK(pos(1, 0) == Catch::Approx(0.03));
}

TEST_CASE("reconstruct_positions round-trips form_blocks") {
  Rng rng(11);
  std::normal_distribution<double> n(0.0, 0.01);
  auto t = make_trial(7 * kBlockLen + 3, [&](int k) {
    return Vec3(0.0, 0.002 * k + n(rng), 0.05 - 0.0005 * k);
  });
  auto blocks = form_blocks(t);
  for (const auto& b : blocks) {
    BlockMat pos = reconstruct_positions(b);
    for (int j = 0; j < kBlockLen; ++j) {
      Vec3 src = t.samples[b.block_index * kBlockLen + j].p;
      CHECK((pos.row(j).transpose() - src).norm() < 1e-15);
    }
  }

  SECTION("zero delta_p reconstructs to the anchor") {
    Block b;
    b.anchor_p = Vec3(1.0, 2.0, 3.0);
    BlockMat pos = reconstruct_positions(b);
    for (int j = 0; j < kBlockLen; ++j) CHECK(pos.row(j).transpose().isApprox(b.anchor_p));
  }
}

TEST_CASE("delta_p is invariant to a constant position offset") {
  auto t = make_trial(4 * kBlockLen, [](int k) { return Vec3(0.0, 0.001 * k, -0.0002 * k); });
  Trial shifted = t;
  for (auto& s : shifted.samples) s.p += Vec3(10.0, -5.0, 2.0);
  auto a = form_blocks(t);
  auto b = form_blocks(shifted);
  REQUIRE(a.size() == b.size());
  // The subtraction reintroduces rounding at the magnitude of the offset.
  for (size_t i = 0; i < a.size(); ++i)
    CHECK((a[i].delta_p - b[i].delta_p).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("normalizer: fitted statistics standardize the fitting set") {
  Rng rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Block> blocks;
  for (int i = 0; i < 40; ++i) {
    Block b;
    for (int j = 0; j < kBlockLen; ++j) {
      b.delta_p.row(j) = Vec3(n(rng) * 1e-4, n(rng) * 2e-4 + 1e-4, n(rng) * 1e-4).transpose();
      b.f_s.row(j) = Vec3(n(rng), 3.0 + n(rng) * 2.0, n(rng) * 0.5).transpose();
      b.f_r.row(j) = Vec3(n(rng) * 0.1, n(rng), 2.0 + n(rng)).transpose();
    }
    blocks.push_back(b);
  }
  Normalizer nz = fit_normalizer(blocks);
  auto normed = apply_normalizer(blocks, nz);
  const double cnt = blocks.size() * kBlockLen;
  for (int f = 0; f < kFeatDim; ++f) {
    double mean = 0.0, var = 0.0;
    for (const auto& b : normed)
      for (int j = 0; j < kBlockLen; ++j) mean += feature_row(b, j)(f);
    mean /= cnt;
    for (const auto& b : normed)
      for (int j = 0; j < kBlockLen; ++j) {
        double d = feature_row(b, j)(f) - mean;
        var += d * d;
      }
    var /= cnt;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }

  SECTION("refitting already-standardized data is the identity") {
    Normalizer nz2 = fit_normalizer(normed);
    CHECK(nz2.mean.cwiseAbs().maxCoeff() < 1e-9);
    CHECK((nz2.std.array() - 1.0).abs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("normalizer pins the population std convention") {
  // Feature values {1, 3}: mean 2, population std 1, normalized to {-1, +1}.
  std::vector<Block> blocks;
  for (int i = 0; i < 2; ++i) {
    Block b;
    double v = i == 0 ? 1.0 : 3.0;
    b.delta_p.setConstant(v);
    b.f_s.setConstant(v);
    b.f_r.setConstant(v);
    blocks.push_back(b);
  }
  Normalizer nz = fit_normalizer(blocks);
  for (int f = 0; f < kFeatDim; ++f) {
    CHECK(nz.mean(f) == Catch::Approx(2.0));
    CHECK(nz.std(f) == Catch::Approx(1.0));
  }
  auto normed = apply_normalizer(blocks, nz);
  CHECK(normed[0].delta_p(0, 0) == Catch::Approx(-1.0));
  CHECK(normed[1].delta_p(0, 0) == Catch::Approx(1.0));
}

TEST_CASE("normalizer rejects zero-variance features") {
  Block b;
  b.delta_p.setConstant(0.5);
  b.f_s.setConstant(1.0);
  b.f_r.setConstant(2.0);
  std::vector<Block> blocks{b, b, b};
  CHECK_THROWS_AS(fit_normalizer(blocks), std::runtime_error);
  CHECK_THROWS_AS(fit_normalizer(std::vector<Block>{}), std::invalid_argument);
}

TEST_CASE("trial persistence round-trip") {
  namespace fs = std::filesystem;
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Trial> trials;
  for (int i = 0; i < 3; ++i) {
    auto t = make_trial(2 * kBlockLen + 1 + i, [&](int k) { return Vec3(0.0, n(rng), 0.001 * k); });
    t.class_name = "cls" + std::to_string(i);
    t.seen = i % 2 == 0;
    t.seed = 100 + i;
    trials.push_back(t);
  }
  fs::path dir = fs::temp_directory_path() / "cutmpc_trials_test";
  fs::remove_all(dir);
  save_trials(trials, dir.string());
  auto loaded = load_trials(dir.string());
  REQUIRE(loaded.size() == trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    CHECK(loaded[i].class_name == trials[i].class_name);
    CHECK(loaded[i].seen == trials[i].seen);
    CHECK(loaded[i].seed == trials[i].seed);
    REQUIRE(loaded[i].samples.size() == trials[i].samples.size());
    for (size_t k = 0; k < trials[i].samples.size(); ++k) {
      CHECK(loaded[i].samples[k].t == trials[i].samples[k].t);
      CHECK(loaded[i].samples[k].p == trials[i].samples[k].p);
      CHECK(loaded[i].samples[k].f_s == trials[i].samples[k].f_s);
      CHECK(loaded[i].samples[k].f_r == trials[i].samples[k].f_r);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("trial loading rejects malformed files") {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / "cutmpc_bad_trial.csv";

  SECTION("empty file") {
    std::ofstream(p.string()) << "";
    CHECK_THROWS_AS(load_trial(p.string()), std::runtime_error);
  }
  SECTION("garbage row") {
    std::ofstream(p.string()) << "t,px,py,pz,fsx,fsy,fsz,frx,fry,frz\nnot,a,row\n";
    CHECK_THROWS_AS(load_trial(p.string()), std::runtime_error);
  }
  SECTION("non-uniform timestamps") {
    std::ofstream out(p.string());
    out << "t,px,py,pz,fsx,fsy,fsz,frx,fry,frz\n";
    out << "0.005,0,0,0,0,0,0,0,0,0\n";
    out << "0.010,0,0,0,0,0,0,0,0,0\n";
    out << "0.030,0,0,0,0,0,0,0,0,0\n";
    out.close();
    CHECK_THROWS_AS(load_trial(p.string()), std::runtime_error);
  }
  fs::remove(p);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cutmpc/nn/lstm.hpp"
#include "cutmpc/nn/rnn.hpp"
#include "cutmpc/trainer.hpp"

using namespace cutmpc;

namespace {

// Smooth deterministic trial with varying features on every axis so that the
// normalizer can be fitted.
Trial make_synthetic_trial(int n_blocks, std::uint64_t seed, double drift = 0.0004) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1e-5);
  Trial t;
  t.class_name = "synthetic";
  const int n = (n_blocks + 1) * kBlockLen + 1;
  for (int k = 0; k < n; ++k) {
    StateSample s;
    s.t = k * kDt;
    double ph = 0.05 * k;
    s.p = Vec3(1e-4 * std::sin(0.3 * ph) + noise(rng),
               0.004 * std::sin(ph) + noise(rng),
               -drift * k + noise(rng));
    s.f_s = Vec3(0.1 * std::sin(ph + 1.0), 2.0 * std::cos(ph), 3.0 + 0.5 * std::sin(0.5 * ph));
    s.f_r = Vec3(0.05 * std::cos(ph), 1.5 * std::sin(ph + 0.5), 2.5 + 0.4 * std::cos(0.7 * ph));
    t.samples.push_back(s);
  }
  return t;
}

PreparedData make_dataset(int n_trials, int n_blocks, std::uint64_t seed) {
  std::vector<Trial> trials;
  for (int i = 0; i < n_trials; ++i) trials.push_back(make_synthetic_trial(n_blocks, seed + i));
  return prepare_training_data(trials);
}

}  // namespace

TEST_CASE("curriculum schedule: horizons, epochs and lr decay") {
  auto data = make_dataset(2, 8, 1);
  TrainConfig cfg;
  cfg.variant = Variant::lstm_lr_c;
  cfg.lr = 1e-4;
  cfg.gamma = 0.5;
  cfg.H_target = 5;
  cfg.epochs_per_stage = 1;  // keep the run cheap; the trace shape is what matters
  cfg.final_stage_epochs = 2;
  cfg.seed = 3;
  auto m = LstmModel::random_init(3);
  auto rep = train(m, data, cfg);

  std::vector<int> want_h{1, 2, 3, 4, 5, 5};
  std::vector<double> want_lr{1e-4, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6, 6.25e-6};
  REQUIRE(rep.epoch_horizon.size() == want_h.size());
  for (size_t i = 0; i < want_h.size(); ++i) {
    CHECK(rep.epoch_horizon[i] == want_h[i]);
    CHECK(rep.epoch_lr[i] == Catch::Approx(want_lr[i]).epsilon(1e-15));
  }
}

TEST_CASE("default curriculum epoch counts are 10 per stage and 20 final") {
  TrainConfig cfg;
  cfg.H_target = 5;
  CHECK(cfg.epochs_per_stage == 10);
  CHECK(cfg.final_stage_epochs == 20);
  CHECK(cfg.total_epochs() == 60);

  // The lr trace of the full default lstm-lr-c schedule without running it:
  // stage lrs are lr * gamma^(h-1).
  double lr = 1e-4;
  std::vector<double> expect;
  for (int h = 1; h <= 5; ++h) {
    expect.push_back(lr);
    lr *= 0.5;
  }
  CHECK(expect == std::vector<double>{1e-4, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6});
}

TEST_CASE("lstm-c keeps the learning rate constant across stages") {
  auto data = make_dataset(2, 8, 5);
  TrainConfig cfg;
  cfg.variant = Variant::lstm_c;
  cfg.lr = 2e-4;
  cfg.gamma = 0.5;  // must be ignored for lstm-c
  cfg.H_target = 3;
  cfg.epochs_per_stage = 1;
  cfg.final_stage_epochs = 1;
  auto m = LstmModel::random_init(5);
  auto rep = train(m, data, cfg);
  REQUIRE(rep.epoch_lr.size() == 3);
  for (double lr : rep.epoch_lr) CHECK(lr == 2e-4);
  CHECK(rep.epoch_horizon == std::vector<int>{1, 2, 3});
}

TEST_CASE("direct training stays at the target horizon with matched budget") {
  auto data = make_dataset(2, 8, 7);
  TrainConfig cfg;
  cfg.variant = Variant::lstm;
  cfg.lr = 2e-4;
  cfg.H_target = 3;
  cfg.epochs_per_stage = 2;
  cfg.final_stage_epochs = 3;
  auto m = LstmModel::random_init(7);
  auto rep = train(m, data, cfg);
  REQUIRE(static_cast<int>(rep.epoch_horizon.size()) == cfg.total_epochs());
  for (int h : rep.epoch_horizon) CHECK(h == cfg.H_target);
  for (double lr : rep.epoch_lr) CHECK(lr == 2e-4);

  // Same budget as the curriculum variants by construction.
  TrainConfig cur = cfg;
  cur.variant = Variant::lstm_lr_c;
  CHECK(cur.total_epochs() == cfg.total_epochs());
}

TEST_CASE("training is deterministic in the seed") {
  auto data = make_dataset(2, 10, 11);
  TrainConfig cfg;
  cfg.variant = Variant::lstm_lr_c;
  cfg.H_target = 2;
  cfg.epochs_per_stage = 2;
  cfg.final_stage_epochs = 2;
  cfg.seed = 42;

  auto m1 = LstmModel::random_init(9);
  auto m2 = LstmModel::random_init(9);
  auto r1 = train(m1, data, cfg);
  auto r2 = train(m2, data, cfg);
  CHECK(m1.params() == m2.params());
  CHECK(r1.epoch_loss == r2.epoch_loss);

  auto m3 = LstmModel::random_init(9);
  TrainConfig cfg3 = cfg;
  cfg3.seed = 43;
  train(m3, data, cfg3);
  CHECK(m1.params() != m3.params());
}

TEST_CASE("training reduces the loss on a learnable synthetic task") {
  auto data = make_dataset(3, 14, 21);
  TrainConfig cfg;
  cfg.variant = Variant::lstm_lr_c;
  cfg.lr = 3e-3;
  cfg.wd = 0.0;
  cfg.H_target = 2;
  cfg.epochs_per_stage = 4;
  cfg.final_stage_epochs = 6;
  cfg.seed = 1;
  auto m = LstmModel::random_init(1);
  auto rep = train(m, data, cfg);
  REQUIRE(rep.epoch_loss.size() >= 2);
  // Compare within the final stage so the horizon is the same.
  double first_final = rep.epoch_loss[cfg.epochs_per_stage];
  double last = rep.epoch_loss.back();
  CHECK(last < first_final);
  CHECK(rep.wall_time_s > 0.0);

  SECTION("rnn direct variant also learns") {
    TrainConfig rc = cfg;
    rc.variant = Variant::rnn;
    rc.epochs_per_stage = 2;
    rc.final_stage_epochs = 4;
    auto r = RnnModel::random_init(2);
    auto rrep = train(r, data, rc);
    CHECK(rrep.epoch_loss.back() < rrep.epoch_loss.front());
  }
}

TEST_CASE("variant dispatch rejects mismatched training modes") {
  auto data = make_dataset(1, 8, 31);
  TrainConfig cfg;
  auto m = LstmModel::random_init(4);
  cfg.variant = Variant::lstm_lr_c;
  CHECK_THROWS_AS(train_direct(m, data, cfg), std::invalid_argument);
  cfg.variant = Variant::lstm;
  CHECK_THROWS_AS(train_curriculum(m, data, cfg), std::invalid_argument);

  SECTION("variant names round-trip") {
    for (auto v : {Variant::rnn, Variant::lstm, Variant::lstm_c, Variant::lstm_lr_c})
      CHECK(variant_from_string(variant_name(v)) == v);
    CHECK_THROWS_AS(variant_from_string("gru"), std::invalid_argument);
  }
}

TEST_CASE("evaluation curve of a zero model equals the target second moment") {
  auto data = make_dataset(2, 12, 41);
  LstmModel zero;  // predicts 0 in normalized space regardless of input
  const int H = 4;
  auto curve = evaluate_mse_vs_horizon(zero, data, H);
  REQUIRE(static_cast<int>(curve.size()) == H);

  // Independent computation: mean over all windows of the scaled squared
  // targets at each lookahead.
  Eigen::VectorXd scale(kOutputDim);
  for (int j = 0; j < kBlockLen; ++j)
    for (int a = 0; a < 3; ++a) scale(j * 3 + a) = data.nz.std(a) * 1000.0;
  std::vector<double> expect(H, 0.0);
  long count = 0;
  for (const auto& tr : data.trials) {
    const int B = static_cast<int>(tr.blocks.size());
    for (int s = 0; s + H < B; ++s) {
      for (int i = 0; i < H; ++i)
        expect[i] += tr.dpn[s + 1 + i].cwiseProduct(scale).squaredNorm();
      ++count;
    }
  }
  REQUIRE(count > 0);
  for (int i = 0; i < H; ++i) {
    expect[i] /= static_cast<double>(count) * kOutputDim;
    CHECK(curve[i] == Catch::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("evaluation curve is zero for a perfect model on constant motion") {
  // Constant positions give identically zero displacements; with an identity
  // normalizer the zero-weight model is exactly right at every horizon.
  Trial t;
  for (int k = 0; k < 8 * kBlockLen; ++k) {
    StateSample s;
    s.t = k * kDt;
    s.p = Vec3(0.1, 0.2, 0.3);
    s.f_s = Vec3(0.0, 1.0, 2.0);
    s.f_r = Vec3(0.0, 1.0, 2.0);
    t.samples.push_back(s);
  }
  auto data = prepare_data({t}, Normalizer{});  // mean 0, std 1
  LstmModel zero;
  for (double v : evaluate_mse_vs_horizon(zero, data, 3)) CHECK(v == 0.0);
}

TEST_CASE("config validation catches bad settings") {
  TrainConfig cfg;
  auto bad = [&](auto mut) {
    TrainConfig c = cfg;
    mut(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  bad([](TrainConfig& c) { c.lr = 0.0; });
  bad([](TrainConfig& c) { c.wd = -1e-4; });
  bad([](TrainConfig& c) { c.gamma = 0.0; });
  bad([](TrainConfig& c) { c.gamma = 1.5; });
  bad([](TrainConfig& c) { c.H_target = 0; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.window_stride = 0; });
  cfg.validate();  // defaults are fine
}

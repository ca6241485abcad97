// Experiment driver: data collection, model training, offline evaluation,
// closed-loop MPC runs, and report generation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cutmpc/collect.hpp"
#include "cutmpc/config.hpp"
#include "cutmpc/mpc.hpp"
#include "cutmpc/nn/checkpoint.hpp"
#include "cutmpc/nn/lstm.hpp"
#include "cutmpc/nn/rnn.hpp"
#include "cutmpc/trainer.hpp"

namespace fs = std::filesystem;
using namespace cutmpc;

namespace {

constexpr const char* kVersion = "cutmpc 0.1.0";

struct Context {
  Config cfg;
  fs::path data_dir, model_dir, report_dir;
  std::uint64_t global_seed = 0;
  bool overwrite = false;

  std::string artifact_header() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# config_hash=%016llx global_seed=%llu version=%s",
                  static_cast<unsigned long long>(cfg.hash()),
                  static_cast<unsigned long long>(global_seed), kVersion);
    return buf;
  }
};

Context make_context(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
                     bool overwrite) {
  Context ctx;
  ctx.cfg = config_path.empty() ? Config{} : Config::from_file(config_path);
  ctx.data_dir = ctx.cfg.get_str("paths.data_dir", "data");
  ctx.model_dir = ctx.cfg.get_str("paths.model_dir", "models");
  ctx.report_dir = ctx.cfg.get_str("paths.report_dir", "reports");
  ctx.global_seed = has_seed ? seed_override : ctx.cfg.get_u64("global.seed", 0);
  ctx.overwrite = overwrite;
  return ctx;
}

bool skip_existing(const Context& ctx, const fs::path& target) {
  if (fs::exists(target) && !ctx.overwrite) {
    std::cout << target.string() << " exists, skipping (pass --overwrite to redo)\n";
    return true;
  }
  return false;
}

std::vector<ObjectClass> library(const Context& ctx) {
  return make_class_library(ctx.cfg.get_u64("sim.class_seed", ctx.global_seed));
}

CollectionPlan collection_plan(const Context& ctx, int trials_per_class) {
  CollectionPlan plan;
  plan.trials_per_class = trials_per_class;
  plan.duration = ctx.cfg.get_double("collect.duration", 4.0);
  plan.base_kp = ctx.cfg.get_double("collect.kp", 1.5);
  plan.base_saw_amplitude = ctx.cfg.get_double("collect.saw_amplitude", 0.003);
  plan.base_descent = ctx.cfg.get_double("collect.descent_speed", 0.020);
  plan.K_a = Vec3::Constant(ctx.cfg.get_double("collect.ka", 0.003));
  return plan;
}

int cmd_collect(const Context& ctx) {
  if (skip_existing(ctx, ctx.data_dir / "train" / "manifest.csv")) return 0;
  auto classes = library(ctx);
  std::vector<ObjectClass> seen;
  for (const auto& c : classes)
    if (c.seen) seen.push_back(c);

  fs::create_directories(ctx.data_dir);
  save_class_library(classes, (ctx.data_dir / "classes.cfg").string());

  int n_train = ctx.cfg.get_int("collect.trials_per_class", 10);
  int n_val = ctx.cfg.get_int("collect.val_per_class", 4);
  int n_test_seen = ctx.cfg.get_int("collect.test_seen_per_class", 2);
  int n_test_unseen = ctx.cfg.get_int("collect.test_unseen_per_class", 2);
  std::uint64_t s = ctx.cfg.get_u64("collect.seed", ctx.global_seed);

  auto train = collect_trials(seen, collection_plan(ctx, n_train), s);
  auto val = collect_trials(seen, collection_plan(ctx, n_val), s + 500000);
  auto test = collect_trials(classes, collection_plan(ctx, n_test_seen), s + 900000);
  if (n_test_unseen > n_test_seen) {
    std::vector<ObjectClass> unseen;
    for (const auto& c : classes)
      if (!c.seen) unseen.push_back(c);
    auto extra = collect_trials(unseen, collection_plan(ctx, n_test_unseen - n_test_seen),
                                s + 1300000);
    test.insert(test.end(), extra.begin(), extra.end());
  }

  save_trials(train, (ctx.data_dir / "train").string());
  save_trials(val, (ctx.data_dir / "val").string());
  save_trials(test, (ctx.data_dir / "test").string());
  std::cout << "collected " << train.size() << " train / " << val.size() << " val / "
            << test.size() << " test trials\n";
  return 0;
}

TrainConfig train_config(const Context& ctx, Variant v) {
  TrainConfig tc;
  tc.variant = v;
  std::string sec = "train." + variant_name(v);
  // Per-variant defaults. Curriculum variants tolerate a higher base lr
  // (short horizons early on), and the lr-decayed curriculum tolerates the
  // highest because the later long-horizon stages run at a reduced rate.
  double def_lr = 1e-4, def_wd = 5e-4;
  if (v == Variant::lstm) { def_lr = 2e-4; def_wd = 3e-4; }
  if (v == Variant::lstm_c) { def_lr = 1e-3; def_wd = 2e-4; }
  if (v == Variant::lstm_lr_c) { def_lr = 2e-3; def_wd = 3e-4; }
  tc.lr = ctx.cfg.get_double(sec + ".lr", def_lr);
  tc.wd = ctx.cfg.get_double(sec + ".wd", def_wd);
  tc.gamma = ctx.cfg.get_double(sec + ".gamma", 0.5);
  tc.H_target = ctx.cfg.get_int("train.H_target", 5);
  tc.epochs_per_stage = ctx.cfg.get_int("train.epochs_per_stage", 10);
  tc.final_stage_epochs = ctx.cfg.get_int("train.final_stage_epochs", 20);
  tc.batch_size = ctx.cfg.get_int("train.batch_size", 16);
  tc.window_stride = ctx.cfg.get_int("train.window_stride", 2);
  tc.seed = ctx.cfg.get_u64("train.seed", ctx.global_seed);
  tc.validate();
  return tc;
}

void write_train_report(const Context& ctx, const TrainReport& rep, const fs::path& path) {
  std::ofstream out(path);
  out.precision(17);
  out << ctx.artifact_header() << "\n";
  out << "epoch,stage_horizon,lr,train_loss\n";
  for (size_t i = 0; i < rep.epoch_loss.size(); ++i)
    out << i + 1 << "," << rep.epoch_horizon[i] << "," << rep.epoch_lr[i] << ","
        << rep.epoch_loss[i] << "\n";
}

void write_val_curve(const Context& ctx, const std::vector<double>& curve, const fs::path& path) {
  std::ofstream out(path);
  out.precision(17);
  out << ctx.artifact_header() << "\n";
  out << "horizon,val_mse\n";
  for (size_t h = 0; h < curve.size(); ++h) out << h + 1 << "," << curve[h] << "\n";
}

template <class Model>
int train_variant(const Context& ctx, Variant v) {
  std::string name = variant_name(v);
  fs::path ckpt = ctx.model_dir / (name + ".ckpt");
  if (skip_existing(ctx, ckpt)) return 0;

  auto trials = load_trials((ctx.data_dir / "train").string());
  if (trials.empty()) {
    std::cerr << "error: no training trials in " << (ctx.data_dir / "train")
              << " (run `cutmpc collect` first)\n";
    return 1;
  }
  PreparedData data = prepare_training_data(trials);
  TrainConfig tc = train_config(ctx, v);
  Model model = Model::random_init(tc.seed);
  TrainReport rep = train(model, data, tc);

  PreparedData val = prepare_data(load_trials((ctx.data_dir / "val").string()), data.nz);
  rep.val_mse_per_horizon = evaluate_mse_vs_horizon(model, val, tc.H_target);

  fs::create_directories(ctx.model_dir);
  save_checkpoint(model, data.nz, ckpt.string());
  write_train_report(ctx, rep, ctx.model_dir / (name + "_train.csv"));
  write_val_curve(ctx, rep.val_mse_per_horizon, ctx.model_dir / (name + "_val_curve.csv"));
  std::cout << "trained " << name << ": " << rep.epoch_loss.size() << " epochs, final loss "
            << rep.epoch_loss.back() << ", wall " << rep.wall_time_s << " s\n";
  return 0;
}

int cmd_train(const Context& ctx, const std::string& variant) {
  Variant v = variant_from_string(variant);
  if (v == Variant::rnn) return train_variant<RnnModel>(ctx, v);
  return train_variant<LstmModel>(ctx, v);
}

struct EvalRow {
  std::string model;
  std::vector<double> curve;
  double seen_mse = 0.0, unseen_mse = 0.0, total_mse = 0.0;
};

// MSE (mm^2) averaged over prediction steps 1..H on the given trials.
template <class Model>
double avg_mse(const Model& model, const PreparedData& data, int H) {
  auto curve = evaluate_mse_vs_horizon(model, data, H);
  double s = 0.0;
  for (double v : curve) s += v;
  return s / curve.size();
}

template <class Model>
EvalRow eval_model(const std::string& ckpt, const std::vector<Trial>& test, int H_curve, int H) {
  Normalizer nz;
  Model model = load_checkpoint<Model>(ckpt, nz);
  std::vector<Trial> seen, unseen;
  for (const auto& t : test) (t.seen ? seen : unseen).push_back(t);
  EvalRow row;
  PreparedData all = prepare_data(test, nz);
  PreparedData ds = prepare_data(seen, nz);
  PreparedData du = prepare_data(unseen, nz);
  row.curve = evaluate_mse_vs_horizon(model, all, H_curve);
  row.seen_mse = avg_mse(model, ds, H);
  row.unseen_mse = avg_mse(model, du, H);
  row.total_mse = avg_mse(model, all, H);
  return row;
}

int cmd_eval(const Context& ctx) {
  fs::path curves_path = ctx.report_dir / "horizon_curves.csv";
  if (skip_existing(ctx, curves_path)) return 0;
  auto test = load_trials((ctx.data_dir / "test").string());
  int H_curve = ctx.cfg.get_int("eval.H_max", 15);
  int H = ctx.cfg.get_int("train.H_target", 5);

  std::vector<EvalRow> rows;
  for (const char* name : {"rnn", "lstm", "lstm-c", "lstm-lr-c"}) {
    fs::path ckpt = ctx.model_dir / (std::string(name) + ".ckpt");
    if (!fs::exists(ckpt)) continue;
    EvalRow row = checkpoint_arch(ckpt.string()) == "rnn"
                      ? eval_model<RnnModel>(ckpt.string(), test, H_curve, H)
                      : eval_model<LstmModel>(ckpt.string(), test, H_curve, H);
    row.model = name;
    rows.push_back(row);
  }
  if (rows.empty()) {
    std::cerr << "error: no checkpoints in " << ctx.model_dir << " (run `cutmpc train` first)\n";
    return 1;
  }

  fs::create_directories(ctx.report_dir);
  {
    std::ofstream out(curves_path);
    out.precision(17);
    out << ctx.artifact_header() << "\nmodel,horizon,mse\n";
    for (const auto& r : rows)
      for (size_t h = 0; h < r.curve.size(); ++h)
        out << r.model << "," << h + 1 << "," << r.curve[h] << "\n";
  }
  {
    std::ofstream out(ctx.report_dir / "test_mse.csv");
    out.precision(17);
    out << ctx.artifact_header() << "\nmodel,seen,unseen,total\n";
    for (const auto& r : rows)
      out << r.model << "," << r.seen_mse << "," << r.unseen_mse << "," << r.total_mse << "\n";
  }
  std::cout << "evaluated " << rows.size() << " models on " << test.size() << " test trials\n";
  return 0;
}

MpcConfig mpc_config(const Context& ctx) {
  MpcConfig mc;
  mc.H_b = ctx.cfg.get_int("mpc.H_b", 5);
  mc.n_candidates = ctx.cfg.get_int("mpc.n_candidates", 25);
  mc.c_cut = ctx.cfg.get_double("mpc.c_cut", 1.0);
  mc.c_saw = ctx.cfg.get_double("mpc.c_saw", 1.0);
  mc.c_v = ctx.cfg.get_double("mpc.c_v", 1e-8);
  mc.d = ctx.cfg.get_double("mpc.d", 0.015);
  mc.epsilon = ctx.cfg.get_double("mpc.epsilon", 0.003);
  mc.p_table = ctx.cfg.get_double("mpc.p_table", 0.0);
  mc.p_center = ctx.cfg.get_double("mpc.p_center", 0.0);
  mc.f_min = Vec3(0.0, ctx.cfg.get_double("mpc.fy_min", -25.0), ctx.cfg.get_double("mpc.fz_min", 0.0));
  mc.f_max = Vec3(0.0, ctx.cfg.get_double("mpc.fy_max", 25.0), ctx.cfg.get_double("mpc.fz_max", 15.0));
  mc.sample_sigma = ctx.cfg.get_double("mpc.sample_sigma", 3.0);
  mc.success_tol = ctx.cfg.get_double("mpc.success_tol", 1e-3);
  mc.validate();
  return mc;
}

template <class Model>
int run_mpc(const Context& ctx, const std::string& variant) {
  fs::path summary_path = ctx.report_dir / ("mpc_summary_" + variant + ".csv");
  if (skip_existing(ctx, summary_path)) return 0;

  Normalizer nz;
  fs::path ckpt = ctx.model_dir / (variant + ".ckpt");
  Model model = load_checkpoint<Model>(ckpt.string(), nz);
  auto classes = library(ctx);
  MpcConfig mc = mpc_config(ctx);
  Vec3 K_a = Vec3::Constant(ctx.cfg.get_double("mpc.ka", 0.003));
  int trials_per_class = ctx.cfg.get_int("mpc.trials_per_class", 5);
  double max_duration = ctx.cfg.get_double("mpc.max_duration", 60.0);
  std::uint64_t s = ctx.cfg.get_u64("mpc.seed", ctx.global_seed);

  fs::create_directories(ctx.report_dir / "mpc_logs");
  std::map<std::string, std::pair<int, double>> agg;  // class -> (successes, cost sum)
  std::ofstream sum(summary_path);
  sum.precision(17);
  sum << ctx.artifact_header() << "\nmodel,class,trials,successes,mean_cost\n";

  std::vector<std::string> class_order;
  for (const auto& cls : classes) {
    class_order.push_back(cls.name);
    int successes = 0;
    double cost_sum = 0.0;
    for (int k = 0; k < trials_per_class; ++k) {
      TrialLog log = run_closed_loop(cls, model, nz, mc, K_a, max_duration,
                                     s + 100 * class_order.size() + k);
      char fname[128];
      std::snprintf(fname, sizeof(fname), "%s_%s_%d.csv", variant.c_str(), cls.name.c_str(), k);
      save_trial_log(log, (ctx.report_dir / "mpc_logs" / fname).string(), ctx.artifact_header());
      if (log.success) {
        ++successes;
        cost_sum += log.mean_block_cost();  // failed trials stay out of the mean
      }
    }
    double mean_cost = successes > 0 ? cost_sum / successes : std::nan("");
    agg[cls.name] = {successes, mean_cost};
    sum << variant << "," << cls.name << "," << trials_per_class << "," << successes << ","
        << mean_cost << "\n";
    std::cout << cls.name << ": " << successes << "/" << trials_per_class
              << " successes, mean cost " << mean_cost << "\n";
  }

  // Wide layout: one row, class columns plus the overall average.
  std::ofstream tab(ctx.report_dir / ("mpc_table_" + variant + ".csv"));
  tab.precision(17);
  tab << ctx.artifact_header() << "\nmodel";
  for (const auto& c : class_order) tab << "," << c;
  tab << ",average\n" << variant;
  double total = 0.0;
  int n = 0;
  for (const auto& c : class_order) {
    tab << "," << agg[c].second;
    if (agg[c].first > 0) {
      total += agg[c].second;
      ++n;
    }
  }
  tab << "," << (n > 0 ? total / n : std::nan("")) << "\n";
  return 0;
}

int cmd_mpc(const Context& ctx, const std::string& variant) {
  fs::path ckpt = ctx.model_dir / (variant + ".ckpt");
  if (!fs::exists(ckpt)) {
    std::cerr << "error: missing checkpoint " << ckpt << " (run `cutmpc train` first)\n";
    return 1;
  }
  if (checkpoint_arch(ckpt.string()) == "rnn") return run_mpc<RnnModel>(ctx, variant);
  return run_mpc<LstmModel>(ctx, variant);
}

int cmd_report(const Context& ctx) {
  fs::path out_path = ctx.report_dir / "report.txt";
  std::ofstream out(out_path);
  out << ctx.artifact_header() << "\n\n";
  auto copy_if_present = [&](const fs::path& p, const std::string& title) {
    if (!fs::exists(p)) return;
    out << "== " << title << " ==\n";
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') out << line << "\n";
    out << "\n";
  };
  copy_if_present(ctx.report_dir / "test_mse.csv", "test MSE (mm^2), seen/unseen/total");
  copy_if_present(ctx.report_dir / "horizon_curves.csv", "MSE vs horizon (mm^2)");
  for (const char* name : {"rnn", "lstm", "lstm-c", "lstm-lr-c"})
    copy_if_present(ctx.report_dir / ("mpc_table_" + std::string(name) + ".csv"),
                    std::string("MPC mean cost, model ") + name);
  std::cout << "wrote " << out_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned-dynamics MPC pipeline for simulated food cutting"};
  app.require_subcommand(1);

  std::string config_path, variant = "lstm-lr-c";
  std::uint64_t seed = 0;
  bool overwrite = false;
  app.add_option("--config", config_path, "experiment configuration file");
  app.add_option("--seed", seed, "override the global seed");
  app.add_flag("--overwrite", overwrite, "redo work even if outputs exist");

  auto* c_collect = app.add_subcommand("collect", "record cutting trials on the synthetic plant");
  auto* c_train = app.add_subcommand("train", "train a dynamics-model variant");
  c_train->add_option("--variant", variant, "rnn | lstm | lstm-c | lstm-lr-c");
  auto* c_eval = app.add_subcommand("eval", "offline prediction evaluation of all checkpoints");
  auto* c_mpc = app.add_subcommand("mpc", "closed-loop MPC trials for one checkpoint");
  c_mpc->add_option("--variant", variant, "rnn | lstm | lstm-c | lstm-lr-c");
  auto* c_report = app.add_subcommand("report", "aggregate evaluation outputs into one report");

  CLI11_PARSE(app, argc, argv);

  try {
    Context ctx = make_context(config_path, seed, app.count("--seed") > 0, overwrite);
    if (c_collect->parsed()) return cmd_collect(ctx);
    if (c_train->parsed()) return cmd_train(ctx, variant);
    if (c_eval->parsed()) return cmd_eval(ctx);
    if (c_mpc->parsed()) return cmd_mpc(ctx, variant);
    if (c_report->parsed()) return cmd_report(ctx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

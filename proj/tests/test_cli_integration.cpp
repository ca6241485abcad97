// End-to-end test of the cutmpc driver binary. The binary path arrives as the
// first command-line argument (see tests/CMakeLists.txt).

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cutmpc/nn/checkpoint.hpp"
#include "cutmpc/nn/lstm.hpp"
#include "cutmpc/nn/rnn.hpp"

namespace fs = std::filesystem;

static std::string g_cli;

int main(int argc, char* argv[]) {
  std::vector<char*> args(argv, argv + argc);
  if (args.size() > 1 && args[1][0] != '-') {
    g_cli = args[1];
    args.erase(args.begin() + 1);
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli_integration <path-to-cutmpc> [catch args]\n");
    return 2;
  }
  return Catch::Session().run(static_cast<int>(args.size()), args.data());
}

namespace {

int run(const std::string& args) {
  std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

long csv_data_rows(const fs::path& p) {
  std::ifstream in(p);
  if (!in) return -1;
  std::string line;
  long rows = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    ++rows;
  }
  return rows;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& root) {
  fs::create_directories(root);
  fs::path cfg = root / "experiment.cfg";
  std::ofstream out(cfg);
  out << "[paths]\n"
      << "data_dir=" << (root / "data").string() << "\n"
      << "model_dir=" << (root / "models").string() << "\n"
      << "report_dir=" << (root / "reports").string() << "\n"
      << "[global]\nseed=1\n"
      << "[collect]\n"
      << "trials_per_class=2\nval_per_class=1\ntest_seen_per_class=1\ntest_unseen_per_class=1\n"
      << "duration=1.2\n"
      << "[train]\n"
      << "H_target=2\nepochs_per_stage=1\nfinal_stage_epochs=1\nwindow_stride=4\n"
      << "[eval]\nH_max=3\n"
      << "[mpc]\ntrials_per_class=1\nmax_duration=1.0\n";
  return cfg;
}

}  // namespace

TEST_CASE("full pipeline on a miniature configuration") {
  fs::path root = fs::temp_directory_path() / "cutmpc_cli_test";
  fs::remove_all(root);
  fs::path cfg = write_config(root);
  std::string base = "--config " + cfg.string() + " ";

  SECTION("collect, train, eval, mpc, report") {
    // --- collect ---
    REQUIRE(run(base + "collect") == 0);
    CHECK(csv_data_rows(root / "data" / "train" / "manifest.csv") == 12);  // 6 seen x 2
    CHECK(csv_data_rows(root / "data" / "val" / "manifest.csv") == 6);
    CHECK(csv_data_rows(root / "data" / "test" / "manifest.csv") == 9);  // all classes x 1
    CHECK(fs::exists(root / "data" / "classes.cfg"));

    // Idempotent rerun: existing outputs are kept untouched.
    std::string manifest_before = read_file(root / "data" / "train" / "manifest.csv");
    REQUIRE(run(base + "collect") == 0);
    CHECK(read_file(root / "data" / "train" / "manifest.csv") == manifest_before);

    // --- train all four variants ---
    for (std::string v : {"rnn", "lstm", "lstm-c", "lstm-lr-c"}) {
      REQUIRE(run(base + "train --variant " + v) == 0);
      CHECK(fs::exists(root / "models" / (v + ".ckpt")));
      // H_target=2 with 1 epoch per stage and 1 final epoch -> 2 epochs.
      CHECK(csv_data_rows(root / "models" / (v + "_train.csv")) == 2);
      CHECK(csv_data_rows(root / "models" / (v + "_val_curve.csv")) == 2);
    }

    // Checkpoints reload with the right architecture and finite weights.
    {
      cutmpc::Normalizer nz;
      auto lstm = cutmpc::load_checkpoint<cutmpc::LstmModel>(
          (root / "models" / "lstm-lr-c.ckpt").string(), nz);
      CHECK(lstm.params().allFinite());
      CHECK(lstm.params().norm() > 0.0);
      CHECK((nz.std.array() > 0.0).all());
      auto rnn = cutmpc::load_checkpoint<cutmpc::RnnModel>(
          (root / "models" / "rnn.ckpt").string(), nz);
      CHECK(rnn.params().allFinite());
    }

    // --- eval ---
    REQUIRE(run(base + "eval") == 0);
    CHECK(csv_data_rows(root / "reports" / "horizon_curves.csv") == 4 * 3);  // 4 models x H_max
    CHECK(csv_data_rows(root / "reports" / "test_mse.csv") == 4);

    // --- mpc ---
    REQUIRE(run(base + "mpc --variant lstm-lr-c") == 0);
    CHECK(csv_data_rows(root / "reports" / "mpc_summary_lstm-lr-c.csv") == 9);  // one per class
    CHECK(fs::exists(root / "reports" / "mpc_table_lstm-lr-c.csv"));
    long logs = 0;
    for (auto& e : fs::directory_iterator(root / "reports" / "mpc_logs")) {
      (void)e;
      ++logs;
    }
    CHECK(logs == 9);

    // --- report ---
    REQUIRE(run(base + "report") == 0);
    std::string report = read_file(root / "reports" / "report.txt");
    CHECK(report.find("test MSE") != std::string::npos);
    CHECK(report.find("lstm-lr-c") != std::string::npos);

    // --- determinism: an independent rerun reproduces the checkpoint byte for byte ---
    fs::path root2 = fs::temp_directory_path() / "cutmpc_cli_test_rerun";
    fs::remove_all(root2);
    fs::path cfg2 = write_config(root2);
    std::string base2 = "--config " + cfg2.string() + " ";
    REQUIRE(run(base2 + "collect") == 0);
    REQUIRE(run(base2 + "train --variant lstm-lr-c") == 0);
    CHECK(read_file(root2 / "models" / "lstm-lr-c.ckpt") ==
          read_file(root / "models" / "lstm-lr-c.ckpt"));
    fs::remove_all(root2);
  }

  SECTION("helpful failures when stages run out of order") {
    fs::path root3 = fs::temp_directory_path() / "cutmpc_cli_test_order";
    fs::remove_all(root3);
    fs::path cfg3 = write_config(root3);
    std::string base3 = "--config " + cfg3.string() + " ";
    CHECK(run(base3 + "train --variant lstm") != 0);  // no data yet
    CHECK(run(base3 + "eval") != 0);                  // no checkpoints yet
    CHECK(run(base3 + "mpc --variant lstm") != 0);
    CHECK(run(base3 + "nonsense") != 0);
    fs::remove_all(root3);
  }

  fs::remove_all(root);
}

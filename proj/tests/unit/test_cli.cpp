#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oshot/cli/commands.h"
#include "oshot/common/errors.h"
#include "oshot/common/hash.h"
#include "oshot/synthgen/dataset_io.h"
#include "oshot/train/checkpoint.h"

using namespace oshot;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(seed = 1
data.train_count = 6
data.val_count = 2
data.target_count = 3
data.targets = 2
scene.image_size = 32
scene.min_object_size = 6
scene.max_object_size = 12
det.channels = 4,4
det.strides = 2,2
det.norm_groups = 2
det.rpn_channels = 4
det.anchor_scales = 8,12
det.anchor_ratios = 1.0
det.pool_size = 2
det.roi_hidden = 8
epochs = 2
batch_size = 3
)";

class CliTest : public ::testing::Test {
 protected:
  fs::path root;

  void SetUp() override {
    root = fs::temp_directory_path() /
           ("oshot-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
    setenv(cli::kOutputRootEnv, root.c_str(), 1);
    std::ofstream(root / "tiny.cfg") << kTinyConfig;
  }
  void TearDown() override {
    unsetenv(cli::kOutputRootEnv);
    fs::remove_all(root);
  }

  int run(std::vector<std::string> args) {
    out.str("");
    err.str("");
    return cli::run(args, out, err);
  }

  std::ostringstream out, err;
};

int count_lines(const fs::path& p) {
  std::ifstream f(p);
  int n = 0;
  std::string line;
  while (std::getline(f, line)) n += !line.empty();
  return n;
}

int manifests_in(const fs::path& dir) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().filename() == "manifest.json";
  return n;
}

}  // namespace

TEST(ParseArgs, ConfigFileAndOverrides) {
  const auto inv = cli::parse_args({"train", "--lambda", "0.5", "--variant=baseline", "--force"});
  EXPECT_EQ(inv.command, "train");
  EXPECT_TRUE(inv.force);
  EXPECT_EQ(inv.config.get_string("lambda", ""), "0.5");
  EXPECT_EQ(inv.config.get_string("variant", ""), "baseline");
  EXPECT_THROW(cli::parse_args({"train", "--lambda"}), ConfigError);
  EXPECT_THROW(cli::parse_args({"train", "stray"}), ConfigError);
  EXPECT_THROW(cli::parse_args({"launch"}), ConfigError);
  EXPECT_EQ(cli::parse_args({"adapt-eval", "--curve"}).curve, true);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"train", "--config", "missing.cfg"}), cli::kMissingInput);
  EXPECT_EQ(run({"train", "--config", "tiny.cfg", "--variant", "bogus"}), cli::kConfigError);
  EXPECT_EQ(run({"train", "--config", "tiny.cfg", "--variant", "full-oshot"}), cli::kConfigError);
  EXPECT_NE(err.str().find("warm_start"), std::string::npos);
  EXPECT_EQ(run({"train", "--config", "tiny.cfg", "--K", "0", "--lambda", "-1"}), cli::kConfigError);
  EXPECT_NE(err.str().find("K must"), std::string::npos);
  EXPECT_NE(err.str().find("lambda"), std::string::npos);
  EXPECT_EQ(run({"train", "--config", "tiny.cfg"}), cli::kMissingInput);
  EXPECT_EQ(run({"adapt-eval", "--config", "tiny.cfg", "--eval.checkpoints", "nope.oshot"}), cli::kMissingInput);
  EXPECT_EQ(run({"gen-data", "--config", "tiny.cfg", "--data.targets", "9"}), cli::kConfigError);
  EXPECT_EQ(run({"gen-data", "--help"}), cli::kOk);
}

TEST_F(CliTest, GenDataRefusesOverwriteAndIsReproducible) {
  ASSERT_EQ(run({"gen-data", "--config", "tiny.cfg"}), cli::kOk) << err.str();
  for (const char* d : {"source-train", "source-val", "target-foggy", "target-clipart"}) {
    EXPECT_TRUE(fs::exists(root / "data" / d / "annotations.jsonl")) << d;
  }
  EXPECT_EQ(manifests_in(root / "data"), 1);
  const auto hash = git_tree_hash(root / "data" / "target-foggy");
  EXPECT_EQ(run({"gen-data", "--config", "tiny.cfg"}), cli::kConfigError);
  ASSERT_EQ(run({"gen-data", "--config", "tiny.cfg", "--force"}), cli::kOk);
  EXPECT_EQ(git_tree_hash(root / "data" / "target-foggy"), hash);
}

TEST_F(CliTest, PipelineEndToEnd) {
  ASSERT_EQ(run({"gen-data", "--config", "tiny.cfg"}), cli::kOk) << err.str();
  ASSERT_EQ(run({"train", "--config", "tiny.cfg", "--variant", "baseline", "--train.out", "runs/base"}), cli::kOk) << err.str();
  ASSERT_EQ(run({"train", "--config", "tiny.cfg", "--variant", "tran-oshot", "--train.out", "runs/tran"}), cli::kOk) << err.str();
  ASSERT_EQ(run({"train", "--config", "tiny.cfg", "--variant", "full-oshot", "--K", "2", "--eta", "1",
                 "--epochs", "1", "--meta_images", "2", "--train.warm_start", "runs/tran/checkpoint.oshot",
                 "--train.out", "runs/full"}),
            cli::kOk)
      << err.str();
  EXPECT_EQ(count_lines(root / "runs/base/metrics.csv"), 1 + 2);
  EXPECT_EQ(count_lines(root / "runs/full/metrics.csv"), 1 + 1);
  EXPECT_FALSE(train::Checkpoint::load(root / "runs/base/checkpoint.oshot").trained(train::kRotationGroup));
  EXPECT_TRUE(train::Checkpoint::load(root / "runs/full/checkpoint.oshot").trained(train::kRotationGroup));
  for (const char* d : {"runs/base", "runs/tran", "runs/full"}) EXPECT_EQ(manifests_in(root / d), 1) << d;
  EXPECT_EQ(run({"train", "--config", "tiny.cfg", "--variant", "baseline", "--train.out", "runs/base"}), cli::kConfigError);

  synth::ReadAudit::clear();
  ASSERT_EQ(run({"adapt-eval", "--config", "tiny.cfg", "--curve", "--curve.gammas", "0,1,2",
                 "--eval.checkpoints", "runs/base/checkpoint.oshot,runs/full/checkpoint.oshot",
                 "--eval.gammas", "0,2", "--eval.out", "eval"}),
            cli::kOk)
      << err.str();
  // Source-free: only target data was read.
  ASSERT_FALSE(synth::ReadAudit::paths().empty());
  for (const auto& p : synth::ReadAudit::paths()) {
    EXPECT_EQ(p.string().find("source-"), std::string::npos) << p;
  }
  // baseline: gamma 0 on 2 targets; full-oshot: 2 gammas on 2 targets.
  EXPECT_EQ(count_lines(root / "eval/metrics.csv"), 1 + 2 + 4);
  EXPECT_TRUE(fs::exists(root / "eval/tide.png"));
  EXPECT_EQ(count_lines(root / "eval/curve.csv"), 1 + 2 * 3);
  EXPECT_TRUE(fs::exists(root / "eval/curve.png"));
  EXPECT_EQ(count_lines(root / "eval/predictions/full-oshot__foggy__g2.jsonl"), 3);
  EXPECT_EQ(manifests_in(root / "eval"), 1);

  ASSERT_EQ(run({"report", "--report.in", "eval"}), cli::kOk) << err.str();
  EXPECT_NE(out.str().find("full-oshot"), std::string::npos);
  EXPECT_TRUE(fs::exists(root / "report/report.md"));

  ASSERT_EQ(run({"curve", "--config", "tiny.cfg", "--eval.checkpoints", "runs/full/checkpoint.oshot",
                 "--curve.gammas", "0,1", "--eval.targets", "foggy"}),
            cli::kOk)
      << err.str();
  EXPECT_EQ(count_lines(root / "curve/curve.csv"), 1 + 2);
}

TEST_F(CliTest, AdaptEvalNamesMissingGroup) {
  ASSERT_EQ(run({"gen-data", "--config", "tiny.cfg"}), cli::kOk) << err.str();
  ASSERT_EQ(run({"train", "--config", "tiny.cfg", "--variant", "oshot", "--epochs", "1", "--train.out", "runs/o"}), cli::kOk);
  auto ck = train::Checkpoint::load(root / "runs/o/checkpoint.oshot");
  ck.params.detection = {};
  ck.save(root / "broken.oshot");
  EXPECT_EQ(run({"adapt-eval", "--config", "tiny.cfg", "--eval.checkpoints", "broken.oshot"}), cli::kMissingInput);
  EXPECT_NE(err.str().find("theta_d"), std::string::npos);
}

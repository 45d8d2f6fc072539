#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <map>

#include "twin/runstore.hpp"

using namespace twin;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result sh(const std::string& args) {
  const std::string cmd = std::string(TWIN_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    root_ = fs::temp_directory_path() / ("twin_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string dir(const std::string& name) const { return (root_ / name).string(); }

  // Small blobs task so each run takes well under a second.
  static std::string small_task() {
    return "--n-train 40 --n-val 20 --n-test 200 --input-dim 8 --hidden 16 --jobs 2";
  }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, RunProducesSelectionInsideGrid) {
  const Result r = sh("run --run-dir " + dir("a") + " --n-lr 5 --n-wd 5 --epochs 30 " + small_task());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Twin: cell ("), std::string::npos) << r.out;
  const Json sel = Json::parse(read_text(fs::path(dir("a")) / "selection.json"));
  EXPECT_LT(sel["cell"]["row"].get<int>(), 5);
  EXPECT_LT(sel["cell"]["col"].get<int>(), 5);
  EXPECT_EQ(sel["labels"].size(), 25u);
}

TEST_F(CliTest, SameSeedRunsAreByteIdenticalAndIdempotent) {
  const std::string flags = " --n-lr 4 --n-wd 4 --epochs 10 --seed 3 " + small_task();
  ASSERT_EQ(sh("run --run-dir " + dir("a") + flags).code, 0);
  std::string serial = flags;
  serial.replace(serial.find("--jobs 2"), 8, "--jobs 1");
  ASSERT_EQ(sh("run --run-dir " + dir("b") + serial).code, 0);
  for (const char* f : {"matrices.json", "selection.json", "decisions.jsonl"}) {
    EXPECT_EQ(read_text(fs::path(dir("a")) / f), read_text(fs::path(dir("b")) / f)) << f;
  }
  const auto before = fs::last_write_time(fs::path(dir("a")) / "selection.json");
  const Result again = sh("run --run-dir " + dir("a") + flags);
  EXPECT_EQ(again.code, 0) << again.out;
  EXPECT_NE(again.out.find("already complete"), std::string::npos);
  EXPECT_EQ(fs::last_write_time(fs::path(dir("a")) / "selection.json"), before);
  const Result sel = sh("select --run-dir " + dir("a"));
  EXPECT_EQ(sel.code, 0) << sel.out;
  EXPECT_EQ(fs::last_write_time(fs::path(dir("a")) / "selection.json"), before);
}

TEST_F(CliTest, ChangedConfigurationIsAUsageError) {
  ASSERT_EQ(sh("run --run-dir " + dir("a") + " --n-lr 3 --n-wd 3 --epochs 4 " + small_task()).code, 0);
  const Result r = sh("run --run-dir " + dir("a") + " --n-lr 3 --n-wd 3 --epochs 5 " + small_task());
  EXPECT_EQ(r.code, 1) << r.out;
}

TEST_F(CliTest, HyperbandDecisionLogHalves100Trials) {
  const Result r = sh("run --run-dir " + dir("hb") + " --n-lr 10 --n-wd 10 --scheduler hb --stop-fraction 0.25 " +
                      "--epochs 100 --n-train 40 --n-val 0 --n-test 0 --input-dim 8 --hidden 8");
  ASSERT_EQ(r.code, 0) << r.out;
  std::map<int, std::size_t> alive_after_rung;
  std::map<int, std::size_t> decisions_at_rung;
  std::string text = read_text(fs::path(dir("hb")) / "decisions.jsonl");
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t nl = text.find('\n', pos);
    const DecisionRecord d = decision_from_json(Json::parse(text.substr(pos, nl - pos)));
    pos = nl + 1;
    if (d.rung < 0) continue;
    ++decisions_at_rung[d.rung];
    alive_after_rung[d.rung] = d.alive;
  }
  EXPECT_EQ(decisions_at_rung, (std::map<int, std::size_t>{{0, 100}, {1, 50}}));
  EXPECT_EQ(alive_after_rung, (std::map<int, std::size_t>{{0, 50}, {1, 25}}));
}

TEST_F(CliTest, LargeQuickshiftParamsMergeRegions) {
  ASSERT_EQ(sh("run --run-dir " + dir("g") + " --n-lr 10 --n-wd 10 --epochs 20 " + small_task()).code, 0);
  const Json def = Json::parse(read_text(fs::path(dir("g")) / "selection.json"));
  const Result big = sh("select --run-dir " + dir("g") + " --kernel-size 10 --max-dist 10 --out " + dir("big.json"));
  ASSERT_EQ(big.code, 0) << big.out;
  const Json wide = Json::parse(read_text(dir("big.json")));
  EXPECT_GE(def["n_regions"].get<int>(), 2);
  EXPECT_LT(wide["n_regions"].get<int>(), def["n_regions"].get<int>());
}

TEST_F(CliTest, StridedSelectPrintsSourceCell) {
  ASSERT_EQ(sh("run --run-dir " + dir("s") + " --n-lr 5 --n-wd 5 --epochs 6 " + small_task()).code, 0);
  const Result r = sh("select --run-dir " + dir("s") + " --lr-stride 2 --wd-stride 2");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("source cell"), std::string::npos) << r.out;
}

TEST_F(CliTest, BaselinesAndEval) {
  ASSERT_EQ(sh("run --run-dir " + dir("e") + " --n-lr 4 --n-wd 4 --epochs 8 " + small_task()).code, 0);
  EXPECT_EQ(sh("baseline --run-dir " + dir("e") + " --method selts").code, 0);
  EXPECT_EQ(sh("baseline --run-dir " + dir("e") + " --method selvs").code, 0);
  EXPECT_EQ(sh("baseline --run-dir " + dir("e") + " --method oracle").code, 1);
  EXPECT_EQ(sh("baseline --run-dir " + dir("e") + " --method oracle --allow-test-metrics").code, 0);
  EXPECT_EQ(sh("eval --run-dir " + dir("e")).code, 1);
  const Result ev = sh("eval --run-dir " + dir("e") + " --allow-test-metrics");
  ASSERT_EQ(ev.code, 0) << ev.out;
  EXPECT_NE(ev.out.find("MAE"), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(dir("e")) / "eval_report.json"));
}

TEST_F(CliTest, SelVSWithoutValidationSplitFails) {
  ASSERT_EQ(sh("run --run-dir " + dir("v") + " --n-lr 3 --n-wd 3 --epochs 3 --n-val 0 --n-train 20 --n-test 20").code, 0);
  EXPECT_EQ(sh("baseline --run-dir " + dir("v") + " --method selvs").code, 2);
}

TEST_F(CliTest, PlotTargets) {
  ASSERT_EQ(sh("run --run-dir " + dir("p") + " --n-lr 5 --n-wd 5 --epochs 6 " + small_task()).code, 0);
  for (const char* target : {"psi", "theta", "labels", "norm-vs-test"}) {
    const std::string out = dir(std::string(target) + ".svg");
    const Result r = sh("plot --run-dir " + dir("p") + " --target " + target + " --out " + out);
    ASSERT_EQ(r.code, 0) << target << r.out;
    const std::string svg = read_text(out);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    ASSERT_EQ(sh("plot --run-dir " + dir("p") + " --target " + target + " --out " + out + ".2").code, 0);
    EXPECT_EQ(svg, read_text(out + ".2")) << target;
  }
  fs::remove(fs::path(dir("p")) / "selection.json");
  EXPECT_EQ(sh("plot --run-dir " + dir("p") + " --target labels --out " + dir("x.svg")).code, 2);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(sh("").code, 1);
  EXPECT_EQ(sh("frobnicate").code, 1);
  EXPECT_EQ(sh("select").code, 1);
  EXPECT_EQ(sh("select --run-dir " + dir("nothing")).code, 2);
  EXPECT_EQ(sh("run --run-dir " + dir("x") + " --scheduler lifo").code, 1);
  EXPECT_EQ(sh("run --run-dir " + dir("x") + " --n-lr 1").code, 1);
  // Store root that cannot be created.
  fs::create_directories(root_ / "file_parent");
  write_text_atomic(root_ / "file_parent" / "blocker", "x");
  EXPECT_EQ(sh("run --run-dir " + (root_ / "file_parent" / "blocker" / "run").string() + " --n-lr 2 --n-wd 2 --epochs 1").code, 3);
}

TEST_F(CliTest, IncompleteRunListsCells) {
  RunManifest m;
  m.run_id = "partial";
  m.grid = default_grid(2);
  m.policy.epoch_budget = 2;
  RunDir run = RunDir::create(dir("partial"), m);
  run.append_trial_line({{0, 0}, {0, 1.0, 1.0, {}, {}}, TrialStatus::Running});
  const Result r = sh("select --run-dir " + dir("partial"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("missing (0,1)"), std::string::npos) << r.out;
}

TEST_F(CliTest, StoreRootFromEnvironment) {
  const std::string cmd = "TWIN_STORE_ROOT=" + root_.string() + " " + TWIN_CLI +
                          " run --run-id envrun --n-lr 2 --n-wd 2 --epochs 2 --n-train 20 --n-test 20 --n-val 0 >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(root_ / "runs" / "envrun" / "selection.json"));
}

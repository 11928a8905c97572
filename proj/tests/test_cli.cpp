#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hiasa/config.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result run(const std::string& args) {
  const std::string cmd = "HIASA_LOG=0 " + std::string(HIASA_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int raw = pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<nlohmann::json> read_lines(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("hiasa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string toy() const { return std::string(HIASA_DATA_DIR) + "/toy.jsonl"; }
  std::string small() const { return "--embed-dim 8 --hidden-dim 6 --batch-size 8 --seed 5 "; }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpListsEveryConfigFlag) {
  const Result r = run("train --help");
  EXPECT_EQ(r.status, 0);
  for (const auto& f : hiasa::config_fields()) EXPECT_NE(r.out.find("--" + f.key), std::string::npos) << f.key;
  EXPECT_NE(r.out.find("--config"), std::string::npos);
  const Result top = run("--help");
  for (const char* verb : {"train", "evaluate", "decode", "gradcheck", "sweep-alpha", "ablate"})
    EXPECT_NE(top.out.find(verb), std::string::npos) << verb;
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("train --bogus-flag").status, 2);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("frobnicate").status, 2);
  EXPECT_EQ(run("train --alpha 0.9 --epochs 1").status, 2);
  EXPECT_EQ(run("train --train " + (dir_ / "missing.jsonl").string()).status, 2);
  EXPECT_EQ(run("evaluate --data " + toy()).status, 2);
  EXPECT_EQ(run("train --config " + (dir_ / "nope.cfg").string()).status, 2);
}

TEST_F(Cli, RuntimeFailureExitsOne) {
  std::ofstream(dir_ / "bad.jsonl") << "{\"tokens\":[\"a\"],\"aspects\":[{\"start\":0,\"end\":3,\"polarity\":\"positive\"}]}\n";
  const Result r = run("train --epochs 1 --out " + dir_.string() + " --train " + (dir_ / "bad.jsonl").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("beyond sentence length"), std::string::npos) << r.out;
}

TEST_F(Cli, GradcheckOnBundledCorpus) {
  const Result r = run("gradcheck");
  EXPECT_EQ(r.status, 0) << r.out;
  const auto pos = r.out.find("max relative error ");
  ASSERT_NE(pos, std::string::npos) << r.out;
  EXPECT_LT(std::stod(r.out.substr(pos + 19)), 1e-4);
}

TEST_F(Cli, TrainEvaluateDecode) {
  const fs::path cfg = dir_ / "c.cfg";
  std::ofstream(cfg) << "epochs = 2\nembed-dim = 8\nhidden-dim = 6\nbatch-size = 8\n";
  const fs::path out = dir_ / "run";
  Result r = run("train --config " + cfg.string() + " --alpha 0.1 --beta 0.1 --train " + toy() + " --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.out;
  ASSERT_TRUE(fs::exists(out / "model.ckpt"));
  const auto log = read_lines(out / "metrics.jsonl");
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[1]["epoch"], 2);
  EXPECT_NE(slurp(out / "config.cfg").find("embed-dim = 8"), std::string::npos);

  const fs::path metrics = dir_ / "metrics.json";
  r = run("evaluate --checkpoint " + (out / "model.ckpt").string() + " --data " + toy() + " --out " + metrics.string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("sc_acc"), std::string::npos);
  const auto rep = nlohmann::json::parse(slurp(metrics));
  for (const char* k : {"p", "r", "f1"}) {
    EXPECT_TRUE(rep["joint"].contains(k));
    EXPECT_TRUE(rep["ae"].contains(k));
  }
  EXPECT_TRUE(rep.contains("sc_acc"));

  const fs::path spans = dir_ / "spans.jsonl";
  r = run("decode --checkpoint " + (out / "model.ckpt").string() + " --data " + toy() + " --tau-start 0.3 --out " +
          spans.string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto recs = read_lines(spans);
  EXPECT_EQ(recs.size(), 24u);
  EXPECT_EQ(recs[0]["id"], "toy-0");
  EXPECT_TRUE(recs[0]["spans"].is_array());
}

TEST_F(Cli, IdenticalArgsGiveIdenticalLogs) {
  const std::string args = "train --epochs 2 " + small() + "--train " + toy() + " --out ";
  ASSERT_EQ(run(args + (dir_ / "a").string()).status, 0);
  ASSERT_EQ(run(args + (dir_ / "b").string()).status, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.jsonl"), slurp(dir_ / "b" / "metrics.jsonl"));
  EXPECT_FALSE(slurp(dir_ / "a" / "metrics.jsonl").empty());
}

TEST_F(Cli, SweepAlphaEmitsSixRows) {
  const Result r = run("sweep-alpha --epochs 1 " + small() + "--train " + toy() + " --out " + dir_.string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto rows = read_lines(dir_ / "sweep.jsonl");
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(double(rows[i]["alpha"]), 0.1 * double(i), 1e-12);
  EXPECT_NE(r.out.find("alpha=0.5"), std::string::npos);
}

TEST_F(Cli, AblateRunsThreeVariants) {
  const Result r = run("ablate --epochs 1 " + small() + "--train " + toy() + " --out " + dir_.string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto rows = read_lines(dir_ / "ablation.jsonl");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["label"], "full");
  EXPECT_EQ(rows[1]["label"], "w/o shallow");
  EXPECT_EQ(rows[1]["alpha"], 0.0);
  EXPECT_EQ(rows[2]["label"], "w/o deep");
  EXPECT_EQ(rows[2]["beta"], 0.0);
}

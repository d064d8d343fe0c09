#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(VDGA_CLI_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) o.output += buf;
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vdga_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.cfg") << "[ga]\npop_size = 24\nmax_generations = 60\n\n"
                                         "[session]\ng_nodes = 3\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, CompareWritesReports) {
  const Outcome o = run_cli("compare --config " + path("small.cfg") + " --reps 2 --out " + path("out"));
  ASSERT_EQ(o.code, 0) << o.output;
  const std::string csv = slurp(dir_ / "out" / "compare.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "compare_summary.csv"));
  const std::string cfg = slurp(dir_ / "out" / "effective.cfg");
  EXPECT_NE(cfg.find("repetitions = 2"), std::string::npos);  // flag overrides file
  EXPECT_NE(cfg.find("pop_size = 24"), std::string::npos);
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  const std::string base = "run-distributed --config " + path("small.cfg") + " --loss 0.1 --out ";
  ASSERT_EQ(run_cli(base + path("a")).code, 0);
  ASSERT_EQ(run_cli(base + path("b")).code, 0);
  for (const char* f : {"metrics.csv", "event_log.csv", "summary.json", "final.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(Cli, OtherSubcommands) {
  const std::string cfg = " --config " + path("small.cfg");
  EXPECT_EQ(run_cli("seed" + cfg + " --out " + path("s")).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "s" / "population.csv"));
  EXPECT_EQ(run_cli("run-centralized" + cfg + " --out " + path("c")).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "c" / "history.csv"));
  EXPECT_EQ(run_cli("mutations" + cfg + " --reps 2 --out " + path("m")).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "m" / "traces.csv"));
  const Outcome r = run_cli("render --positions " + (dir_ / "c" / "final.csv").string() + " --out " + path("r"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir_ / "r" / "deployment.svg"));
}

TEST_F(Cli, MissingConfigFile) {
  const Outcome o = run_cli("compare --config " + path("nope.cfg") + " --out " + path("o"));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.output.find(path("nope.cfg")), std::string::npos);
}

TEST_F(Cli, EmptyPositionsFile) {
  std::ofstream(dir_ / "empty.csv").close();
  const Outcome o = run_cli("render --positions " + path("empty.csv") + " --out " + path("o"));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.output.find("no positions"), std::string::npos);
}

TEST_F(Cli, BadKeyIsNamed) {
  std::ofstream(dir_ / "bad.cfg") << "[ga]\npop_size = lots\n";
  const Outcome o = run_cli("seed --config " + path("bad.cfg") + " --out " + path("o"));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.output.find("ga.pop_size"), std::string::npos);
  const Outcome flag = run_cli("seed --loss abc --out " + path("o"));
  EXPECT_EQ(flag.code, 1);
  EXPECT_NE(flag.output.find("link.loss"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommand) {
  const Outcome o = run_cli("frobnicate");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.output.find("UnknownSubcommand"), std::string::npos);
}

TEST_F(Cli, RuntimeErrorExitsTwo) {
  std::ofstream(dir_ / "big.cfg") << "[ga]\nn_objects = 61\npop_size = 4\n";
  const Outcome o = run_cli("run-distributed --config " + path("big.cfg") + " --out " + path("o"));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.output.find("ChromosomeTooLarge"), std::string::npos);
}

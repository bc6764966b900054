#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI inside `dir` so every path it records is relative.
CliRun cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" MESHMAMBA_CLI "' " + args + " > stdout.txt 2> stderr.txt";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(dir / "stdout.txt");
  r.err = slurp(dir / "stderr.txt");
  fs::remove(dir / "stdout.txt");
  fs::remove(dir / "stderr.txt");
  return r;
}

const char* kModel = "--patches 8 --length 4 --token-dim 8 --state-dim 4 --blocks 1 --width 8";

// synth -> gen-gt -> features -> train -> predict -> eval -> simplify -> flops
void pipeline(const fs::path& dir) {
  CliRun r = cli(dir, "--seed 7 synth --out-dir data --cells 6 --sessions 2 --fixations 12");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "faces=72 sessions=2\n");
  r = cli(dir, "gen-gt --mesh data/demo.obj --gaze data/gaze_0.csv --gaze data/gaze_1.csv --out gt.sal --rays 16");
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli(dir, "--seed 3 features --mesh data/demo.obj --out geo.txt --texture-out tex.txt --subgraphs sg.txt "
               "--patches 6 --length 5 --latent-dim 4 --density 3");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "faces=72 geometry_cols=14\n");
  r = cli(dir, std::string("--seed 1 train --mesh data/demo.obj --gt gt.sal --out-dir run --epochs 2 ") + kModel);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("epochs=2 ", 0), 0u) << r.out;
  r = cli(dir, "predict --checkpoint run/final.ckpt --mesh data/demo.obj --out pred.sal");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "faces=72\n");
  r = cli(dir, "eval --pred pred.sal --gt gt.sal --csv eval.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli(dir, "simplify data/demo.obj small.obj --target-faces 40 --lambda 5 --saliency gt.sal --map map.txt --log "
               "collapses.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  r = cli(dir, std::string("flops --mesh data/demo.obj --L 8,16 --M 4,8 --out flops.csv ") + kModel);
  ASSERT_EQ(r.code, 0) << r.err;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

}  // namespace

TEST(Cli, PipelineIsByteIdenticalOnRerun) {
  const fs::path a = meshmamba::testkit::scratch_dir("cli_a"), b = meshmamba::testkit::scratch_dir("cli_b");
  pipeline(a);
  pipeline(b);
  const auto ta = tree(a), tb = tree(b);
  EXPECT_GE(ta.size(), 20u);
  ASSERT_EQ(ta.size(), tb.size());
  for (const auto& [name, bytes] : ta) {
    ASSERT_TRUE(tb.count(name)) << name;
    EXPECT_TRUE(tb.at(name) == bytes) << name << " differs";
  }
}

TEST(Cli, EvalPrintsMetricRow) {
  const fs::path dir = meshmamba::testkit::scratch_dir("cli_eval");
  std::ofstream(dir / "p.sal") << "# kind=prediction\n0.4\n0.6\n";
  std::ofstream(dir / "q.sal") << "# kind=ground_truth\n0.25\n0.75\n";
  const CliRun r = cli(dir, "eval --pred p.sal --gt q.sal");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "CC=1.0000 SIM=0.8500 KLD=0.0499 SE=0.0556\n");
}

TEST(Cli, UsageErrorsExitTwo) {
  const fs::path dir = meshmamba::testkit::scratch_dir("cli_usage");
  EXPECT_EQ(cli(dir, "").code, 2);
  EXPECT_EQ(cli(dir, "eval --pred x.sal").code, 2);
  EXPECT_EQ(cli(dir, "frobnicate").code, 2);
  EXPECT_EQ(cli(dir, "--help").code, 0);
}

TEST(Cli, RuntimeErrorsExitOneWithJson) {
  const fs::path dir = meshmamba::testkit::scratch_dir("cli_runtime");
  std::ofstream(dir / "quad.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  std::ofstream(dir / "g.csv") << "t,ox,oy,oz,dx,dy,dz\n";
  const CliRun r = cli(dir, "gen-gt --mesh quad.obj --gaze g.csv --out o.sal");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("{\"error\":", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("unsupported-topology"), std::string::npos) << r.err;
  std::ofstream(dir / "a.sal") << "0.1\n0.2\n";
  std::ofstream(dir / "b.sal") << "0.1\n";
  const CliRun m = cli(dir, "eval --pred a.sal --gt b.sal");
  EXPECT_EQ(m.code, 1);
  EXPECT_NE(m.err.find("length-mismatch"), std::string::npos) << m.err;
}

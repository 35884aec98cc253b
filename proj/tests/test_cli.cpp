#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "navgym/checkpoint.hpp"
#include "navgym/fusion.hpp"
#include "navgym/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("navgym_cli_" + std::to_string(::getpid()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args) {
    const std::string o = (dir_ / "stdout.txt").string(), e = (dir_ / "stderr.txt").string();
    const std::string cmd = "cd '" NAVGYM_SOURCE_DIR "' && '" NAVGYM_CLI "' " + args + " >'" + o + "' 2>'" + e + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = navgym::read_file(o);
    r.err = navgym::read_file(e);
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // A short-episode training run keeps the smoke tests fast.
  static constexpr const char* kQuick = "--set robot.max_steps=40 --set train.num_agents=4 --set train.num_trainers=2 -q";

  fs::path dir_;
};

std::vector<navgym::EpisodeRecord> metrics(const std::string& p) {
  std::ifstream in(p);
  return navgym::read_metrics_csv(in);
}

}  // namespace

TEST_F(Cli, HelpDocumentsSubcommandsAndFlags) {
  const CliResult r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"train", "eval", "bench", "map", "fuse", "plot"}) EXPECT_NE(r.out.find(s), std::string::npos) << s;
  const CliResult e = run("eval --help");
  EXPECT_EQ(e.code, 0);
  for (const char* f : {"--checkpoint", "--map", "--episodes", "--seed", "--trajectories"})
    EXPECT_NE(e.out.find(f), std::string::npos) << f;
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("eval --map maps/simple_room.map").code, 1);
}

TEST_F(Cli, TrainSmokeRunWritesArtifacts) {
  const CliResult r = run("train --set train.total_episodes=10 --out '" + path("run") + "' " + kQuick);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"config.json", "metrics.csv", "updates.csv", "final.navg"})
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  const auto m = metrics(path("run/metrics.csv"));
  ASSERT_EQ(m.size(), 10u);
  EXPECT_EQ(m.back().episode, 10u);
  for (const auto& rec : m) EXPECT_LE(rec.steps, 40);
}

TEST_F(Cli, BadConfigKeyExitsOneNamingKey) {
  {
    std::ofstream(path("bad.json")) << R"({"train": {"num_agentz": 2}})";
  }
  const CliResult r = run("train --config '" + path("bad.json") + "' --out '" + path("run") + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.num_agentz"), std::string::npos) << r.err;
  EXPECT_EQ(run("train --set robot.wheels=3 --out '" + path("run") + "'").code, 1);
}

TEST_F(Cli, ResumeContinuesEpisodeNumbering) {
  const std::string out = "--out '" + path("run") + "' " + kQuick;
  ASSERT_EQ(run("train --set train.total_episodes=6 " + out).code, 0);
  const CliResult r = run("train --set train.total_episodes=5 --resume '" + path("run/final.navg") + "' " + out);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = metrics(path("run/metrics.csv"));
  ASSERT_EQ(m.size(), 11u);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m[i].episode, i + 1);
  const auto ck = navgym::load_checkpoint(navgym::read_file(path("run/final.navg")));
  EXPECT_EQ(ck.meta.episodes, 11u);
}

TEST_F(Cli, ZeroEpisodesWritesInitialCheckpoint) {
  ASSERT_EQ(run("train --set train.total_episodes=0 --out '" + path("run") + "' -q").code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "final.navg"));
}

TEST_F(Cli, EvalPrintsMetricsReproducibly) {
  ASSERT_EQ(run("train --set train.total_episodes=0 --out '" + path("run") + "' -q").code, 0);
  const std::string args = "eval --checkpoint '" + path("run/final.navg") + "' --map maps/simple_room.map --episodes 8 --seed 3";
  const CliResult a = run(args + " --trajectories '" + path("traj") + "'");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("success_rate"), std::string::npos);
  EXPECT_NE(a.out.find("collision_rate"), std::string::npos);
  EXPECT_EQ(run(args).out, a.out);
  EXPECT_TRUE(fs::exists(dir_ / "traj" / "episode_00000.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "traj" / "episode_00007.csv"));
  const std::string head = navgym::read_file(path("traj/episode_00000.csv")).substr(0, 36);
  EXPECT_EQ(head, "step,x,y,theta,action,reward,status\n");
}

TEST_F(Cli, EvalMissingCheckpointExitsOne) {
  const CliResult r = run("eval --checkpoint '" + path("nope.navg") + "' --map maps/simple_room.map");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("not found"), std::string::npos);
}

TEST_F(Cli, BenchPrintsKeyValues) {
  {
    std::ofstream(path("empty.map")) << "map { name: empty, bounds: [0, 0, 10, 10] }\nspawn rect 1 1 9 9\ngoal rect 1 1 9 9\n";
  }
  const CliResult r = run("bench --map '" + path("empty.map") + "' --iterations 50");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* k : {"scalar_scans_per_sec=", "batched_scans_per_sec=", "speedup=", "obstacles=0"})
    EXPECT_NE(r.out.find(k), std::string::npos) << k;
}

TEST_F(Cli, MapFromSvgRect) {
  {
    std::ofstream(path("r.svg")) << R"(<svg viewBox="0 0 200 200"><rect x="50" y="50" width="100" height="100"/>)"
                                 << R"(<g id="spawn"><rect x="10" y="10" width="20" height="20"/></g>)"
                                 << R"(<g id="goal"><rect x="170" y="170" width="20" height="20"/></g></svg>)";
  }
  const CliResult r = run("map --svg '" + path("r.svg") + "' --scale 100 -o '" + path("r.map") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = navgym::load_map(navgym::read_file(path("r.map")));
  EXPECT_EQ(m.obstacles.size(), 4u);
  EXPECT_EQ(m.name, "r");
  {
    std::ofstream(path("bad.svg")) << "<svg><path d='M0 0'/></svg>";
  }
  EXPECT_EQ(run("map --svg '" + path("bad.svg") + "' -o '" + path("b.map") + "'").code, 1);
}

TEST_F(Cli, FuseEmptyCloudIsIdentity) {
  {
    std::ofstream s(path("laser.scan"));
    for (int j = 0; j < 1081; ++j) s << 1.0 + j * 0.01 << "\n";
    std::ofstream(path("empty.xyz")) << "# nothing\n";
  }
  const CliResult r = run("fuse --scan '" + path("laser.scan") + "' --cloud '" + path("empty.xyz") + "' -o '" + path("f.scan") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream a(path("laser.scan")), b(path("f.scan"));
  const navgym::ScannerSpec spec;
  EXPECT_EQ(navgym::read_scan(a, spec), navgym::read_scan(b, spec));
  EXPECT_EQ(run("fuse --scan '" + path("missing.scan") + "' --cloud '" + path("empty.xyz") + "' -o '" + path("x") + "'").code, 1);
}

TEST_F(Cli, PlotScriptReferencesColumns) {
  {
    std::ofstream(path("m.csv")) << navgym::kMetricsHeader << "\n1,simple_room,collided,-20,3,0,0,1.9,0.5\n";
  }
  const CliResult r = run("plot --metrics '" + path("m.csv") + "' -o '" + path("curves.gp") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string script = navgym::read_file(path("curves.gp"));
  EXPECT_NE(script.find("total_reward"), std::string::npos);
  EXPECT_NE(script.find("'steps'"), std::string::npos);
  EXPECT_NE(script.find("curves.png"), std::string::npos);
  EXPECT_EQ(run("plot --metrics '" + path("nope.csv") + "' -o '" + path("x.gp") + "'").code, 1);
}

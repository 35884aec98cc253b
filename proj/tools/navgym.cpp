// navgym: train, evaluate and benchmark the mapless navigation agent.
//
// Exit codes: 0 success, 1 usage/config/input error, 2 runtime failure.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "navgym/navgym.hpp"

namespace fs = std::filesystem;
using namespace navgym;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted = true; }

// Errors the user can fix by changing arguments or inputs.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string ckpt_name(std::uint64_t episode) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "checkpoint_%08llu.navg", static_cast<unsigned long long>(episode));
  return buf;
}

/// NAVGYM_THREADS caps every worker pool.
void apply_thread_cap(TrainConfig& t) {
  const char* env = std::getenv("NAVGYM_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long cap = std::strtol(env, &end, 10);
  if (*end != '\0' || cap < 1) throw UsageError("NAVGYM_THREADS must be a positive integer");
  const int c = static_cast<int>(cap);
  if (t.num_agents > c || t.num_trainers > c || t.num_predictors > c)
    std::cerr << "navgym: NAVGYM_THREADS=" << c << " caps worker counts\n";
  t.num_agents = std::min(t.num_agents, c);
  t.num_trainers = std::min(t.num_trainers, c);
  t.num_predictors = std::min(t.num_predictors, c);
}

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config_file(path);
  if (!overrides.empty()) cfg = apply_overrides(cfg, overrides);
  return cfg;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string resume;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg;
  try {
    cfg = resolve_config(a.config, a.overrides);
    if (!a.out.empty()) cfg.output_dir = a.out;
    cfg.load_maps();
    apply_thread_cap(cfg.train);
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  write_file((out / "config.json").string(), cfg.to_json().dump(2) + "\n");

  NetParams<float> params;
  OptState opt;
  std::uint64_t start_episode = 0;
  if (!a.resume.empty()) {
    std::string bytes;
    try {
      bytes = read_file(a.resume);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    Checkpoint ck = load_checkpoint(bytes, cfg.model_hash());
    for (const auto& w : ck.warnings) std::cerr << "navgym: warning: " << w << "\n";
    if (!(ck.params.shape == cfg.net)) throw ConfigError("checkpoint network shape does not match the config");
    params = std::move(ck.params);
    opt = std::move(ck.opt);
    opt.learning_rate = cfg.optim.learning_rate;
    start_episode = ck.meta.episodes;
  } else {
    Rng rng(cfg.train.seed);
    params = init_params<float>(cfg.net, rng);
    opt = OptState(params.values.size(), cfg.optim.learning_rate);
  }

  const bool append = start_episode > 0 && fs::exists(out / "metrics.csv");
  std::ofstream metrics(out / "metrics.csv", append ? std::ios::app : std::ios::trunc);
  std::ofstream updates(out / "updates.csv", append ? std::ios::app : std::ios::trunc);
  if (!metrics || !updates) throw std::runtime_error("cannot write logs in '" + out.string() + "'");
  if (!append) {
    metrics << kMetricsHeader << "\n";
    updates << "update,batch,policy_loss,value_loss,entropy\n";
  }

  std::signal(SIGINT, on_sigint);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<EpisodeRecord> recent;
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeRecord& r) {
    metrics << format_metrics_row(r) << "\n";
    recent.push_back(r);
    if (!a.quiet && r.episode % 100 == 0) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "episode %llu  success(last 100)=%.2f  %.0fs\n", static_cast<unsigned long long>(r.episode),
                   trailing_success_rate(recent, 100), secs);
    }
  };
  hooks.on_update = [&](const UpdateRecord& u) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%llu,%zu,%.6g,%.6g,%.6g\n", static_cast<unsigned long long>(u.update), u.batch,
                  u.losses.policy, u.losses.value, u.losses.entropy);
    updates << buf;
  };
  const std::uint64_t hash = cfg.model_hash();
  hooks.on_checkpoint = [&](const NetParams<float>& p, const OptState& o, std::uint64_t episodes, bool final) {
    const auto bytes = save_checkpoint(p, o, {hash, episodes, o.steps});
    write_file((out / (final ? std::string("final.navg") : ckpt_name(episodes))).string(), bytes);
    metrics.flush();
    updates.flush();
  };
  hooks.stop_requested = [] { return g_interrupted.load(); };

  const TrainResult res =
      run_training(cfg.train, cfg.env, cfg.optim, std::move(params), std::move(opt), start_episode, hooks);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("episodes=%llu\nupdates=%llu\nsamples=%llu\nwall_s=%.1f\nsuccess_last_500=%.4f\ncheckpoint=%s\n",
              static_cast<unsigned long long>(res.episodes_completed), static_cast<unsigned long long>(res.updates),
              static_cast<unsigned long long>(res.samples_consumed), secs, trailing_success_rate(recent, 500),
              (out / "final.navg").string().c_str());
  if (res.interrupted) std::fprintf(stderr, "navgym: interrupted; final checkpoint written\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string map;
  int episodes = 200;
  std::uint64_t seed = 1;
  std::string config;
  std::vector<std::string> overrides;
  std::string trajectories;
};

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg = resolve_config(a.config, a.overrides);
  if (!fs::exists(a.checkpoint)) throw UsageError("checkpoint '" + a.checkpoint + "' not found");
  Checkpoint ck = load_checkpoint(read_file(a.checkpoint), cfg.model_hash());
  for (const auto& w : ck.warnings) std::cerr << "navgym: warning: " << w << "\n";
  if (ck.params.shape.beams != cfg.env.scanner.num_beams)
    throw ConfigError("checkpoint input width does not match scanner.num_beams");
  WorldMap map;
  try {
    map = load_map(read_file(a.map));
  } catch (const std::exception& e) {
    throw UsageError("map '" + a.map + "': " + e.what());
  }
  EvalOptions opt;
  opt.episodes = a.episodes;
  opt.seed = a.seed;
  if (!a.trajectories.empty()) {
    fs::create_directories(a.trajectories);
    opt.on_trajectory = [&](int e, const std::vector<TrajectoryRow>& rows) {
      char name[64];
      std::snprintf(name, sizeof name, "episode_%05d.csv", e);
      std::ofstream f(fs::path(a.trajectories) / name);
      write_trajectory_csv(f, rows);
    };
  }
  const EvalMetrics m = evaluate(ck.params, map, cfg.env, opt);
  std::printf("%-16s %10s\n", "metric", "value");
  std::printf("%-16s %10d\n", "episodes", m.episodes);
  std::printf("%-16s %10.4f\n", "success_rate", m.success_rate);
  std::printf("%-16s %10.4f\n", "collision_rate", m.collision_rate);
  std::printf("%-16s %10.4f\n", "timeout_rate", m.timeout_rate);
  std::printf("%-16s %10.2f\n", "mean_steps", m.mean_steps);
  std::printf("%-16s %10.3f\n", "mean_reward", m.mean_reward);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_bench(const std::string& map_path, int iterations, std::uint64_t seed) {
  WorldMap map;
  try {
    map = load_map(read_file(map_path));
  } catch (const std::exception& e) {
    throw UsageError("map '" + map_path + "': " + e.what());
  }
  if (iterations < 1) throw UsageError("--iterations must be >= 1");
  const ScannerSpec spec;
  const BeamTable beams(spec);
  Rng rng(seed);
  std::vector<Pose> poses;
  for (int i = 0; i < 64; ++i) poses.push_back(sample_free_pose(map, map.spawn_regions, 0.2, rng));

  double max_diff = 0.0;
  for (const auto& p : poses) {
    const Scan s = cast_scan_scalar(p, map.obstacles, beams);
    const Scan b = cast_scan(p, map.obstacles, beams);
    for (std::size_t j = 0; j < s.ranges.size(); ++j) max_diff = std::max(max_diff, std::abs(s.ranges[j] - b.ranges[j]));
  }

  volatile double sink = 0.0;
  auto time_path = [&](auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iterations; ++i) sink = sink + fn(poses[static_cast<std::size_t>(i) % poses.size()]).ranges[0];
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const double ts = time_path([&](const Pose& p) { return cast_scan_scalar(p, map.obstacles, beams); });
  const double tb = time_path([&](const Pose& p) { return cast_scan(p, map.obstacles, beams); });
  std::printf("map=%s\nobstacles=%zu\nbeams=%d\niterations=%d\n", map.name.c_str(), map.obstacles.size(),
              spec.num_beams, iterations);
  std::printf("scalar_scans_per_sec=%.1f\nbatched_scans_per_sec=%.1f\nspeedup=%.3f\nmax_abs_diff_m=%.3g\n",
              iterations / ts, iterations / tb, ts / tb, max_diff);
  return 0;
}

int cmd_map(const std::string& svg_path, double scale, const std::string& out, const std::string& name) {
  std::string svg;
  try {
    svg = read_file(svg_path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::string map_name = name.empty() ? fs::path(svg_path).stem().string() : name;
  for (char& c : map_name)
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '{' || c == '}') c = '_';
  WorldMap map;
  try {
    map = convert_svg(svg, scale, map_name);
  } catch (const SvgError& e) {
    throw UsageError(e.what());
  }
  write_file(out, save_map(map));
  std::printf("wrote %s: %zu obstacles, %zu spawn, %zu goal regions\n", out.c_str(), map.obstacles.size(),
              map.spawn_regions.size(), map.goal_regions.size());
  return 0;
}

int cmd_fuse(const std::string& scan_path, const std::string& cloud_path, const std::string& out,
             const VirtualScanSpec& vspec) {
  const ScannerSpec laser;
  Scan scan;
  PointCloud cloud;
  try {
    std::ifstream sf(scan_path);
    if (!sf) throw std::runtime_error("cannot open '" + scan_path + "'");
    scan = read_scan(sf, laser);
    std::ifstream cf(cloud_path);
    if (!cf) throw std::runtime_error("cannot open '" + cloud_path + "'");
    cloud = read_point_cloud(cf);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const Scan fused = fuse_scans(scan, pointcloud_to_scan(cloud, vspec, laser));
  std::ofstream o(out);
  if (!o) throw UsageError("cannot write '" + out + "'");
  write_scan(o, fused);
  return 0;
}

int cmd_plot(const std::string& metrics_path, const std::string& out, std::string image) {
  try {
    std::ifstream in(metrics_path);
    if (!in) throw std::runtime_error("cannot open '" + metrics_path + "'");
    read_metrics_csv(in);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (image.empty()) image = fs::path(out).replace_extension(".png").string();
  write_file(out, make_plot_script(metrics_path, image));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"navgym: lidar navigation simulator and GA3C trainer"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the actor-critic with parallel agents");
  train->add_option("-c,--config", ta.config, "JSON run configuration (defaults used when omitted)");
  train->add_option("-s,--set", ta.overrides, "Override a config value, e.g. --set train.num_agents=4");
  train->add_option("-o,--out", ta.out, "Output directory (overrides output_dir)");
  train->add_option("-r,--resume", ta.resume, "Continue from a checkpoint; episode numbering carries on");
  train->add_flag("-q,--quiet", ta.quiet, "No progress lines on stderr");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint on a map");
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
  eval->add_option("--map", ea.map, "Map file")->required();
  eval->add_option("-n,--episodes", ea.episodes, "Number of episodes")->capture_default_str();
  eval->add_option("--seed", ea.seed, "Random seed")->capture_default_str();
  eval->add_option("-c,--config", ea.config, "Run configuration for robot/scanner settings");
  eval->add_option("-s,--set", ea.overrides, "Override a config value");
  eval->add_option("--trajectories", ea.trajectories, "Directory for per-episode trajectory CSVs");

  std::string bench_map;
  int bench_iters = 2000;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "Time scalar vs batched ray casting");
  bench->add_option("--map", bench_map, "Map file")->required();
  bench->add_option("-i,--iterations", bench_iters, "Scans per path")->capture_default_str();
  bench->add_option("--seed", bench_seed, "Pose sampling seed")->capture_default_str();

  std::string svg_in, map_out, map_name;
  double scale = 100.0;
  auto* mapc = app.add_subcommand("map", "Convert an SVG drawing into a map file");
  mapc->add_option("--svg", svg_in, "Input SVG")->required();
  mapc->add_option("--scale", scale, "Pixels per meter")->capture_default_str();
  mapc->add_option("-o,--out", map_out, "Output map file")->required();
  mapc->add_option("--name", map_name, "Map name (defaults to the SVG file stem)");

  std::string scan_in, cloud_in, fused_out;
  VirtualScanSpec vspec;
  auto* fuse = app.add_subcommand("fuse", "Fuse a laser scan with a depth point cloud");
  fuse->add_option("--scan", scan_in, "Laser scan, one range per line")->required();
  fuse->add_option("--cloud", cloud_in, "Point cloud, one 'x y z' per line")->required();
  fuse->add_option("-o,--out", fused_out, "Fused scan output")->required();
  fuse->add_option("--fov", vspec.fov_deg, "Camera horizontal field of view, degrees")->capture_default_str();
  fuse->add_option("--z-min", vspec.z_min, "Lower height limit, meters")->capture_default_str();
  fuse->add_option("--z-max", vspec.z_max, "Upper height limit, meters")->capture_default_str();
  fuse->add_option("--min-depth", vspec.min_depth, "Minimum planar depth, meters")->capture_default_str();

  std::string plot_metrics, plot_out, plot_image;
  auto* plot = app.add_subcommand("plot", "Write a gnuplot script for training curves");
  plot->add_option("--metrics", plot_metrics, "metrics.csv from a training run")->required();
  plot->add_option("-o,--out", plot_out, "Output script (.gp)")->required();
  plot->add_option("--image", plot_image, "PNG the script renders to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
    if (*bench) return cmd_bench(bench_map, bench_iters, bench_seed);
    if (*mapc) return cmd_map(svg_in, scale, map_out, map_name);
    if (*fuse) return cmd_fuse(scan_in, cloud_in, fused_out, vspec);
    if (*plot) return cmd_plot(plot_metrics, plot_out, plot_image);
  } catch (const ConfigError& e) {
    std::cerr << "navgym: config error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "navgym: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    std::cerr << "navgym: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "navgym: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

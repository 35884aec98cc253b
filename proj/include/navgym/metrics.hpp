#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "navgym/acnet.hpp"
#include "navgym/sim_env.hpp"

namespace navgym {

struct EpisodeRecord {
  std::uint64_t episode = 0;
  std::string map;
  Status outcome = Status::Running;
  double total_reward = 0.0;
  int steps = 0;
  Losses losses;  // most recent update when the episode finished
  double wall_ms = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "episode,map,outcome,total_reward,steps,policy_loss,value_loss,entropy,wall_ms";

inline std::string format_metrics_row(const EpisodeRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%s,%s,%.6f,%d,%.6g,%.6g,%.6g,%.3f",
                static_cast<unsigned long long>(r.episode), r.map.c_str(), std::string(to_string(r.outcome)).c_str(),
                r.total_reward, r.steps, r.losses.policy, r.losses.value, r.losses.entropy, r.wall_ms);
  return buf;
}

inline Status parse_status(const std::string& s) {
  for (Status st : {Status::Running, Status::GoalReached, Status::Collided, Status::TimedOut})
    if (to_string(st) == s) return st;
  throw std::runtime_error("unknown outcome '" + s + "'");
}

/// Reads a metrics CSV written by the trainer. Throws on a wrong header.
inline std::vector<EpisodeRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error("metrics CSV: unexpected header (want '" + std::string(kMetricsHeader) + "')");
  std::vector<EpisodeRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": expected 9 columns");
    try {
      EpisodeRecord r;
      r.episode = std::stoull(f[0]);
      r.map = f[1];
      r.outcome = parse_status(f[2]);
      r.total_reward = std::stod(f[3]);
      r.steps = std::stoi(f[4]);
      r.losses.policy = std::stod(f[5]);
      r.losses.value = std::stod(f[6]);
      r.losses.entropy = std::stod(f[7]);
      r.wall_ms = std::stod(f[8]);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Fraction of goal-reached outcomes among the last `window` records.
inline double trailing_success_rate(const std::vector<EpisodeRecord>& records, std::size_t window) {
  if (records.empty()) return 0.0;
  const std::size_t n = std::min(window, records.size());
  std::size_t ok = 0;
  for (std::size_t i = records.size() - n; i < records.size(); ++i) ok += records[i].outcome == Status::GoalReached;
  return double(ok) / double(n);
}

/// gnuplot script drawing score and steps-per-episode curves from a metrics
/// CSV; the smoothed line is a Bezier fit over all episodes.
inline std::string make_plot_script(const std::string& metrics_path, const std::string& image_path) {
  std::ostringstream s;
  s << "# Training curves. Render with: gnuplot <this file>\n"
    << "set datafile separator ','\n"
    << "set key autotitle columnheader\n"
    << "set terminal pngcairo size 1200,800\n"
    << "set output '" << image_path << "'\n"
    << "set multiplot layout 2,1\n"
    << "set key top left\n"
    << "set grid\n"
    << "set xlabel 'episode'\n"
    << "set ylabel 'score'\n"
    << "plot '" << metrics_path << "' using 'episode':'total_reward' with dots title 'score', \\\n"
    << "     '' using 'episode':'total_reward' smooth bezier lw 2 title 'average score'\n"
    << "set ylabel 'steps per episode'\n"
    << "plot '" << metrics_path << "' using 'episode':'steps' with dots title 'steps', \\\n"
    << "     '' using 'episode':'steps' smooth bezier lw 2 title 'average steps'\n"
    << "unset multiplot\n";
  return s.str();
}

}  // namespace navgym

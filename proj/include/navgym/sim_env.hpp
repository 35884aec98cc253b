#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "navgym/geometry.hpp"
#include "navgym/worldmap.hpp"

namespace navgym {

inline constexpr int kScanHistory = 4;
inline constexpr int kBearingBins = 128;
inline constexpr int kNumActions = 7;

/// Turtlebot-sized disc robot driven at a fixed control rate.
struct RobotSpec {
  double radius = 0.177;
  double v_max = 0.6;
  double dt = 0.5;
  double goal_radius = 0.3;
  int collision_substeps = 5;
  int max_steps = 1000;
  double min_goal_distance = 1.0;
  // Extra clearance beyond the radius when placing spawns and goals.
  double placement_margin = 0.1;

  void validate() const {
    if (!(radius > 0 && v_max > 0 && dt > 0 && goal_radius > 0 && collision_substeps > 0 && max_steps > 0 &&
          min_goal_distance >= 0 && placement_margin >= 0))
      throw std::invalid_argument("robot spec values must be positive");
  }
  friend bool operator==(const RobotSpec&, const RobotSpec&) = default;
};

struct Action {
  double linear = 0.0;   // m/s
  double angular = 0.0;  // rad/s
};

struct ActionSet {
  std::array<Action, kNumActions> actions;

  /// Linearly spaced turn rates between +-162 deg/s; speed falls from 0.6 m/s
  /// straight ahead to 0.2 m/s at the sharpest turns.
  static ActionSet standard() {
    ActionSet set;
    const double lin[kNumActions] = {0.2, 0.2 + 0.4 / 3.0, 0.2 + 0.8 / 3.0, 0.6, 0.2 + 0.8 / 3.0, 0.2 + 0.4 / 3.0, 0.2};
    for (int i = 0; i < kNumActions; ++i) set.actions[i] = {lin[i], deg_to_rad(-162.0 + 54.0 * i)};
    return set;
  }

  void validate(double v_max) const {
    for (int i = 0; i < kNumActions; ++i) {
      const auto& a = actions[i];
      const auto& m = actions[kNumActions - 1 - i];
      if (std::abs(a.linear) > v_max) throw std::invalid_argument("action linear velocity exceeds v_max");
      if (a.linear != m.linear || a.angular != -m.angular)
        throw std::invalid_argument("action table must be mirror-symmetric");
    }
  }

  const Action& operator[](int i) const { return actions.at(static_cast<std::size_t>(i)); }
};

struct RewardSpec {
  double goal = 20.0;
  double collision = -20.0;
  double timeout = -10.0;
  double progress_gain = 1.0;  // reward per meter of progress toward the goal
  double orientation = 0.02;

  friend bool operator==(const RewardSpec&, const RewardSpec&) = default;
};

struct EnvConfig {
  RobotSpec robot;
  ScannerSpec scanner;
  ActionSet actions = ActionSet::standard();
  RewardSpec reward;
};

enum class Status { Running, GoalReached, Collided, TimedOut };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::GoalReached: return "goal_reached";
    case Status::Collided: return "collided";
    case Status::TimedOut: return "timed_out";
  }
  return "?";
}

/// Network input: `history` normalized scans (oldest first) plus a one-hot
/// goal bearing.
struct Observation {
  int beams = 0;
  std::vector<float> scan_stack;      // kScanHistory * beams, row-major by scan
  std::vector<float> bearing_onehot;  // kBearingBins

  std::span<const float> scan(int k) const {
    return std::span<const float>(scan_stack).subspan(static_cast<std::size_t>(k) * beams, beams);
  }
  int bearing_index() const {
    for (int i = 0; i < static_cast<int>(bearing_onehot.size()); ++i)
      if (bearing_onehot[i] != 0.0f) return i;
    return -1;
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct EpisodeState {
  Pose pose;
  Vec2 goal;
  std::array<Scan, kScanHistory> scan_history;  // ring buffer
  int history_head = 0;                          // index of the oldest scan
  int step_count = 0;
  double prev_goal_distance = 0.0;
  double prev_heading_error = 0.0;
  Status status = Status::Running;

  void push_scan(Scan s) {
    scan_history[history_head] = std::move(s);
    history_head = (history_head + 1) % kScanHistory;
  }
  const Scan& scan_at(int k) const { return scan_history[(history_head + k) % kScanHistory]; }
  const Scan& latest_scan() const { return scan_at(kScanHistory - 1); }
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminal = false;
  Status status = Status::Running;
};

// ---------------------------------------------------------------------------

/// Exact unicycle arc over `dt` at constant (v, w).
inline Pose integrate_motion(const Pose& pose, double v, double w, double dt) {
  const double th = pose.heading;
  if (std::abs(w) < 1e-6) {
    return {{pose.position.x + v * dt * std::cos(th), pose.position.y + v * dt * std::sin(th)}, wrap_angle(th + w * dt)};
  }
  const double th1 = th + w * dt;
  const double r = v / w;
  return {{pose.position.x + r * (std::sin(th1) - std::sin(th)), pose.position.y - r * (std::cos(th1) - std::cos(th))},
          wrap_angle(th1)};
}

/// Goal bearing in the robot frame, [-pi, pi).
inline double relative_bearing(const Pose& pose, Vec2 goal) {
  const Vec2 d = goal - pose.position;
  return wrap_angle(std::atan2(d.y, d.x) - pose.heading);
}

inline int orientation_bin(double bearing, int bins = kBearingBins) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double b = std::fmod(bearing, two_pi);
  if (b < 0.0) b += two_pi;
  if (b >= two_pi) b = 0.0;
  const int idx = static_cast<int>(std::floor(b / two_pi * bins));
  return std::clamp(idx, 0, bins - 1);
}

inline std::vector<float> encode_orientation(double bearing, int bins = kBearingBins) {
  std::vector<float> v(static_cast<std::size_t>(bins), 0.0f);
  v[static_cast<std::size_t>(orientation_bin(bearing, bins))] = 1.0f;
  return v;
}

inline void normalize_scan_into(const Scan& scan, double max_range, std::span<float> out) {
  for (std::size_t j = 0; j < scan.ranges.size(); ++j)
    out[j] = static_cast<float>(std::clamp(scan.ranges[j] / max_range, 0.0, 1.0));
}

inline std::vector<float> normalize_scan(const Scan& scan, double max_range = 20.0) {
  std::vector<float> out(scan.ranges.size());
  normalize_scan_into(scan, max_range, out);
  return out;
}

inline Observation make_observation(const EpisodeState& s, const ScannerSpec& spec) {
  Observation obs;
  obs.beams = spec.num_beams;
  obs.scan_stack.resize(static_cast<std::size_t>(kScanHistory) * spec.num_beams);
  for (int k = 0; k < kScanHistory; ++k)
    normalize_scan_into(s.scan_at(k), spec.max_range,
                        std::span<float>(obs.scan_stack).subspan(static_cast<std::size_t>(k) * spec.num_beams));
  obs.bearing_onehot = encode_orientation(relative_bearing(s.pose, s.goal));
  return obs;
}

/// Terminal outcomes get fixed rewards; running steps earn progress toward the
/// goal plus a small bonus/penalty for turning toward/away from it.
inline double compute_reward(const EpisodeState& prev, const Pose& new_pose, Status status, const RewardSpec& r = {}) {
  switch (status) {
    case Status::GoalReached: return r.goal;
    case Status::Collided: return r.collision;
    case Status::TimedOut: return r.timeout;
    case Status::Running: break;
  }
  const double dist = norm(prev.goal - new_pose.position);
  const double heading_err = std::abs(relative_bearing(new_pose, prev.goal));
  const double turn = heading_err < prev.prev_heading_error ? r.orientation : -r.orientation;
  return r.progress_gain * (prev.prev_goal_distance - dist) + turn;
}

/// Collision test for the robot disc.
inline bool in_collision(const WorldMap& map, Vec2 p, double radius) { return !has_clearance(map, p, radius); }

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Navigation MDP over one immutable map. Not thread-safe; one per agent.
class NavEnv {
 public:
  NavEnv(const WorldMap& map, EnvConfig config) : map_(&map), cfg_(std::move(config)), beams_(cfg_.scanner) {
    cfg_.robot.validate();
    cfg_.actions.validate(cfg_.robot.v_max);
  }

  const WorldMap& map() const { return *map_; }
  const EnvConfig& config() const { return cfg_; }
  const EpisodeState& state() const { return state_; }

  Observation reset(Rng& rng) {
    const double clearance = cfg_.robot.radius + cfg_.robot.placement_margin;
    const Pose spawn = sample_free_pose(*map_, map_->spawn_regions, clearance, rng);
    const double min_d = cfg_.robot.min_goal_distance;
    const Pose goal = sample_free_pose(*map_, map_->goal_regions, clearance, rng,
                                       [&](Vec2 p) { return norm(p - spawn.position) >= min_d; });
    return reset_to(spawn, goal.position, rng);
  }

  /// Starts an episode at a fixed spawn pose and goal.
  Observation reset_to(const Pose& spawn, Vec2 goal, Rng& rng) {
    state_ = EpisodeState{};
    state_.pose = {spawn.position, wrap_angle(spawn.heading)};
    state_.goal = goal;
    const Scan first = sense(rng);
    for (auto& s : state_.scan_history) s = first;
    state_.prev_goal_distance = norm(goal - spawn.position);
    state_.prev_heading_error = std::abs(relative_bearing(state_.pose, goal));
    return make_observation(state_, cfg_.scanner);
  }

  StepResult step(int action_index, Rng& rng) {
    if (state_.status != Status::Running) throw ContractViolation("step() called on a terminal episode");
    if (action_index < 0 || action_index >= kNumActions) throw ContractViolation("action index out of range");
    const Action& a = cfg_.actions[action_index];
    const auto& robot = cfg_.robot;
    const double sub_dt = robot.dt / robot.collision_substeps;

    Pose pose = state_.pose;
    Status status = Status::Running;
    for (int k = 0; k < robot.collision_substeps; ++k) {
      pose = integrate_motion(pose, a.linear, a.angular, sub_dt);
      if (in_collision(*map_, pose.position, robot.radius)) {
        status = Status::Collided;
        break;
      }
      if (norm(pose.position - state_.goal) <= robot.goal_radius) {
        status = Status::GoalReached;
        break;
      }
    }
    ++state_.step_count;
    if (status == Status::Running && state_.step_count >= robot.max_steps) status = Status::TimedOut;

    StepResult result;
    result.reward = compute_reward(state_, pose, status, cfg_.reward);
    result.status = status;
    result.terminal = status != Status::Running;

    state_.pose = pose;
    state_.status = status;
    state_.prev_goal_distance = norm(state_.goal - pose.position);
    state_.prev_heading_error = std::abs(relative_bearing(pose, state_.goal));
    state_.push_scan(sense(rng));
    result.observation = make_observation(state_, cfg_.scanner);
    return result;
  }

 private:
  Scan sense(Rng& rng) const {
    return apply_noise(cast_scan(state_.pose, map_->obstacles, beams_), cfg_.scanner.noise_sigma, rng);
  }

  const WorldMap* map_;
  EnvConfig cfg_;
  BeamTable beams_;
  EpisodeState state_;
};

struct TrajectoryRow {
  int step = 0;
  Pose pose;
  int action = -1;
  double reward = 0.0;
  Status status = Status::Running;
};

/// Per-episode trajectory log: step,x,y,theta,action,reward,status.
inline void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows) {
  out << "step,x,y,theta,action,reward,status\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%d,%.6f,%s\n", r.step, r.pose.position.x, r.pose.position.y,
                  r.pose.heading, r.action, r.reward, std::string(to_string(r.status)).c_str());
    out << buf;
  }
}

}  // namespace navgym

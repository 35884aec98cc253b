// Drives one episode on a map with a random policy and prints the outcome,
// then scores an untrained network greedily.
//
//   navgym_demo [map-file]

#include <cstdio>
#include <iostream>

#include "navgym/navgym.hpp"

int main(int argc, char** argv) {
  using namespace navgym;
  const std::string path = argc > 1 ? argv[1] : "maps/simple_room.map";
  WorldMap map;
  try {
    map = load_map(read_file(path));
  } catch (const std::exception& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return 1;
  }

  EnvConfig cfg;
  NavEnv env(map, cfg);
  Rng rng(7);
  Observation obs = env.reset(rng);
  std::printf("map %s: %zu obstacles, start (%.2f, %.2f), goal (%.2f, %.2f), bearing bin %d\n", map.name.c_str(),
              map.obstacles.size(), env.state().pose.position.x, env.state().pose.position.y, env.state().goal.x,
              env.state().goal.y, obs.bearing_index());

  std::uniform_int_distribution<int> pick(0, kNumActions - 1);
  double total = 0.0;
  StepResult r;
  do {
    r = env.step(pick(rng), rng);
    total += r.reward;
  } while (!r.terminal);
  std::printf("random policy: %s after %d steps, return %.3f\n", std::string(to_string(r.status)).c_str(),
              env.state().step_count, total);

  NetShape shape;
  shape.beams = cfg.scanner.num_beams;
  const auto params = init_params<float>(shape, rng);
  EvalOptions eo;
  eo.episodes = 20;
  const EvalMetrics m = evaluate(params, map, cfg, eo);
  std::printf("untrained greedy net over %d episodes: success %.2f, collision %.2f, timeout %.2f\n", m.episodes,
              m.success_rate, m.collision_rate, m.timeout_rate);
  return 0;
}

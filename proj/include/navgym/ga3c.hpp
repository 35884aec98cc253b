#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "navgym/acnet.hpp"
#include "navgym/metrics.hpp"
#include "navgym/queue.hpp"
#include "navgym/sim_env.hpp"
#include "navgym/worldmap.hpp"

namespace navgym {

// ---------------------------------------------------------------------------
// Configuration

struct MapChoice {
  std::string name;
  std::shared_ptr<const WorldMap> map;
  double weight = 1.0;
};

/// From `from_episode` on, maps are drawn with these weights (one per map).
struct CurriculumStage {
  std::uint64_t from_episode = 0;
  std::vector<double> weights;
};

struct TrainConfig {
  int num_agents = 32;
  int num_trainers = 8;
  int num_predictors = 2;
  int prediction_batch_max = 32;
  int training_batch_size = 32;
  int t_max = 5;
  double gamma = 0.99;
  std::uint64_t total_episodes = 5000;
  std::uint64_t checkpoint_every = 500;
  std::uint64_t seed = 1;
  int prediction_wait_us = 2000;
  std::vector<MapChoice> maps;
  std::vector<CurriculumStage> curriculum;

  /// All worker counts are one: the run is then bit-reproducible.
  bool single_worker() const { return num_agents == 1 && num_trainers == 1 && num_predictors == 1; }

  void validate() const {
    if (num_agents < 1 || num_trainers < 1 || num_predictors < 1 || prediction_batch_max < 1 ||
        training_batch_size < 1 || t_max < 1)
      throw std::invalid_argument("train counts must all be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
    if (maps.empty()) throw std::invalid_argument("train needs at least one map");
    for (const auto& m : maps) {
      if (!m.map) throw std::invalid_argument("map '" + m.name + "' not loaded");
      if (!(m.weight >= 0.0)) throw std::invalid_argument("map weights must be >= 0");
    }
    auto check = [&](const std::vector<double>& w, const std::string& where) {
      if (w.size() != maps.size()) throw std::invalid_argument(where + ": need one weight per map");
      double sum = 0;
      for (double x : w) {
        if (!(x >= 0.0)) throw std::invalid_argument(where + ": weights must be >= 0");
        sum += x;
      }
      if (!(sum > 0.0)) throw std::invalid_argument(where + ": weights sum to zero");
    };
    std::vector<double> base;
    for (const auto& m : maps) base.push_back(m.weight);
    check(base, "map weights");
    for (const auto& c : curriculum) check(c.weights, "curriculum stage at episode " + std::to_string(c.from_episode));
  }

  std::vector<double> weights_for(std::uint64_t episode) const {
    std::vector<double> w;
    for (const auto& m : maps) w.push_back(m.weight);
    std::uint64_t best = 0;
    bool any = false;
    for (const auto& c : curriculum) {
      if (c.from_episode <= episode && (!any || c.from_episode >= best)) {
        w = c.weights;
        best = c.from_episode;
        any = true;
      }
    }
    return w;
  }
};

struct OptimConfig {
  LossHyper loss;
  double learning_rate = 3e-4;
};

// ---------------------------------------------------------------------------
// Pure helpers

/// Discounted returns, accumulated backward from the end of a segment. A
/// segment cut by t_max bootstraps from the critic's value of the next state.
inline std::vector<double> compute_returns(std::span<const double> rewards, double gamma, double bootstrap,
                                           bool terminal) {
  if (rewards.empty()) throw std::invalid_argument("compute_returns needs at least one reward");
  std::vector<double> R(rewards.size());
  double acc = terminal ? 0.0 : bootstrap;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    R[i] = acc;
  }
  return R;
}

inline int sample_action(std::span<const double> policy, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double c = 0.0;
  for (std::size_t k = 0; k < policy.size(); ++k) {
    c += policy[k];
    if (u < c) return static_cast<int>(k);
  }
  return static_cast<int>(policy.size()) - 1;
}

inline int greedy_action(std::span<const double> policy) {
  return static_cast<int>(std::max_element(policy.begin(), policy.end()) - policy.begin());
}

inline std::size_t pick_weighted(std::span<const double> weights, Rng& rng) {
  double total = 0;
  for (double w : weights) total += w;
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double c = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    c += weights[i];
    if (u < c && weights[i] > 0) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0) return i;
  return 0;
}

// ---------------------------------------------------------------------------
// Shared parameter store

/// The single network instance. Predictors and gradient computations read
/// concurrently; an optimizer step excludes everyone.
class ParamStore {
 public:
  ParamStore(NetParams<float> params, OptState opt) : params_(std::move(params)), opt_(std::move(opt)) {
    if (opt_.accum.size() != params_.values.size()) opt_.accum.assign(params_.values.size(), 0.0f);
  }

  template <class F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mu_);
    readers_.fetch_add(1);
    if (writers_.load() != 0) violations_.fetch_add(1);
    struct Done {
      std::atomic<int>& r;
      ~Done() { r.fetch_sub(1); }
    } done{readers_};
    return f(static_cast<const NetParams<float>&>(params_));
  }

  void update(const NetParams<float>& grads) {
    std::unique_lock lock(mu_);
    if (writers_.fetch_add(1) != 0 || readers_.load() != 0) violations_.fetch_add(1);
    apply_update(params_, opt_, grads);
    writers_.fetch_sub(1);
  }

  /// Consistent copy of parameters and optimizer state.
  std::pair<NetParams<float>, OptState> snapshot() const {
    std::shared_lock lock(mu_);
    return {params_, opt_};
  }

  std::uint64_t updates() const {
    std::shared_lock lock(mu_);
    return opt_.steps;
  }
  /// Times the reader/writer exclusion was observed broken (must stay 0).
  std::uint64_t violations() const { return violations_.load(); }

 private:
  mutable WriterPreferringLock mu_;
  NetParams<float> params_;
  OptState opt_;
  mutable std::atomic<int> readers_{0};
  std::atomic<int> writers_{0};
  mutable std::atomic<std::uint64_t> violations_{0};
};

// ---------------------------------------------------------------------------
// Messages and workers

struct PredictionRequest {
  int agent_id = 0;
  const Observation* observation = nullptr;  // owned by the waiting agent
};

struct PredictionReply {
  int agent_id = 0;
  std::vector<double> policy;
  double value = 0.0;
};

using ForwardFn = std::function<std::vector<NetOutput>(std::span<const Observation* const>)>;

struct Queues {
  Queues(int agents, std::size_t prediction_capacity, std::size_t training_capacity)
      : predictions(prediction_capacity), training(training_capacity) {
    for (int i = 0; i < agents; ++i) replies.push_back(std::make_unique<ReplySlot<PredictionReply>>());
  }

  void close_all() {
    predictions.close();
    training.close();
    for (auto& r : replies) r->close();
  }

  BoundedQueue<PredictionRequest> predictions;
  BoundedQueue<TrainingSample> training;
  std::vector<std::unique_ptr<ReplySlot<PredictionReply>>> replies;
};

struct PredictorStats {
  std::atomic<std::uint64_t> forward_calls{0};
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> max_batch{0};
};

/// Drains up to `batch_max` requests (waiting briefly for stragglers), runs
/// one batched forward pass and routes each reply to its requester. Each agent
/// has at most one request in flight, so the batch never waits for more
/// requests than there are agents.
inline void predictor_loop(Queues& q, const ForwardFn& forward_fn, int batch_max, std::chrono::microseconds wait,
                           PredictorStats* stats = nullptr) {
  if (!q.replies.empty()) batch_max = std::min(batch_max, static_cast<int>(q.replies.size()));
  std::vector<PredictionRequest> batch;
  std::vector<const Observation*> obs;
  while (true) {
    batch.clear();
    if (q.predictions.pop_batch(batch, static_cast<std::size_t>(batch_max), wait) == 0) return;
    obs.clear();
    for (const auto& r : batch) obs.push_back(r.observation);
    auto out = forward_fn(std::span<const Observation* const>(obs));
    if (stats) {
      stats->forward_calls.fetch_add(1);
      stats->requests.fetch_add(batch.size());
      auto prev = stats->max_batch.load();
      while (prev < batch.size() && !stats->max_batch.compare_exchange_weak(prev, batch.size())) {
      }
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      q.replies.at(static_cast<std::size_t>(batch[i].agent_id))
          ->put({batch[i].agent_id, std::move(out[i].policy), out[i].value});
    }
  }
}

/// Counts samples the trainers have fully processed, so a single-worker run
/// can wait for each segment's update before acting again.
class TrainProgress {
 public:
  void advance(std::uint64_t n) {
    {
      std::lock_guard lock(mu_);
      done_ += n;
    }
    cv_.notify_all();
  }
  void wait_for(std::uint64_t n) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return done_ >= n || aborted_; });
  }
  void abort() {
    {
      std::lock_guard lock(mu_);
      aborted_ = true;
    }
    cv_.notify_all();
  }
  std::uint64_t done() const {
    std::lock_guard lock(mu_);
    return done_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t done_ = 0;
  bool aborted_ = false;
};

/// Latest per-update losses, shared with the episode logger.
class LossBoard {
 public:
  void set(const Losses& l) {
    std::lock_guard lock(mu_);
    latest_ = l;
  }
  Losses get() const {
    std::lock_guard lock(mu_);
    return latest_;
  }

 private:
  mutable std::mutex mu_;
  Losses latest_;
};

struct UpdateRecord {
  std::uint64_t update = 0;
  std::size_t batch = 0;
  Losses losses;
};

/// Accumulates `batch_size` samples, computes gradients under shared access
/// and applies them under exclusive access. On close, a partial batch is
/// flushed before returning.
template <class OnUpdate>
void trainer_loop(Queues& q, ParamStore& store, int batch_size, const LossHyper& hyper, TrainProgress& progress,
                  OnUpdate&& on_update) {
  std::vector<TrainingSample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  GradWorkspace<float> ws;
  NetParams<float> grads;
  auto train = [&] {
    const Losses l = store.read([&](const NetParams<float>& p) {
      return compute_gradients(p, std::span<const TrainingSample>(batch), grads, ws, hyper);
    });
    store.update(grads);
    on_update(l, batch.size());
    batch.clear();
  };
  // A sample counts as processed once it sits in a partial batch, or once the
  // update it completed has been applied.
  while (auto s = q.training.pop()) {
    batch.push_back(std::move(*s));
    if (static_cast<int>(batch.size()) >= batch_size) train();
    progress.advance(1);
  }
  if (!batch.empty()) train();
}

// ---------------------------------------------------------------------------
// Agents

struct AgentStats {
  std::atomic<std::uint64_t> samples_enqueued{0};
  std::atomic<std::uint64_t> misrouted_replies{0};
};

/// Per-episode environment supply for an agent: `begin(episode, rng)` returns
/// the environment to use and the map name.
template <class Env>
struct EnvHandle {
  Env* env;
  std::string map_name;
};

struct AgentOptions {
  int agent_id = 0;
  int t_max = 5;
  double gamma = 0.99;
  bool lockstep = false;  // wait for the trainer after every segment
};

/// One actor. Repeats: ask the predictor for pi and V, sample an action,
/// step, buffer; every t_max steps or at episode end converts the buffer to
/// discounted returns and enqueues it for training.
///
/// `claim(index&)` reserves the next episode (false = stop); `source(index,
/// rng)` returns the EnvHandle; `on_episode(record)` logs a finished episode.
template <class Env, class Claim, class Source, class OnEpisode, class ShouldStop>
void agent_loop(const AgentOptions& opt, Queues& q, Rng& rng, Claim&& claim, Source&& source, OnEpisode&& on_episode,
                ShouldStop&& should_stop, AgentStats& stats, TrainProgress& progress) {
  auto& reply_slot = *q.replies.at(static_cast<std::size_t>(opt.agent_id));
  auto predict = [&](const Observation& obs) -> std::optional<PredictionReply> {
    if (!q.predictions.push({opt.agent_id, &obs})) return std::nullopt;
    auto r = reply_slot.take();
    if (r && r->agent_id != opt.agent_id) stats.misrouted_replies.fetch_add(1);
    return r;
  };

  std::vector<TrainingSample> segment;
  std::vector<double> rewards;
  std::uint64_t episode_index = 0;
  while (!should_stop() && claim(episode_index)) {
    const auto t0 = std::chrono::steady_clock::now();
    EnvHandle<Env> h = source(episode_index, rng);
    Observation obs = h.env->reset(rng);
    std::optional<PredictionReply> pending;
    double total = 0.0;
    int steps = 0;
    Status outcome = Status::Running;
    segment.clear();
    rewards.clear();
    while (true) {
      if (should_stop()) return;
      if (!pending) pending = predict(obs);
      if (!pending) return;  // queues closed
      const int action = sample_action(pending->policy, rng);
      pending.reset();
      StepResult res = h.env->step(action, rng);
      total += res.reward;
      ++steps;
      segment.push_back({std::move(obs), action, 0.0});
      rewards.push_back(res.reward);
      obs = std::move(res.observation);
      if (res.terminal || static_cast<int>(segment.size()) >= opt.t_max) {
        double bootstrap = 0.0;
        if (!res.terminal) {
          pending = predict(obs);
          if (!pending) return;
          bootstrap = pending->value;
        }
        const auto R = compute_returns(rewards, opt.gamma, bootstrap, res.terminal);
        const auto n = segment.size();
        for (std::size_t i = 0; i < n; ++i) {
          segment[i].return_R = R[i];
          if (!q.training.push(std::move(segment[i]))) return;
        }
        const auto enqueued = stats.samples_enqueued.fetch_add(n) + n;
        if (opt.lockstep) progress.wait_for(enqueued);
        segment.clear();
        rewards.clear();
      }
      if (res.terminal) {
        outcome = res.status;
        break;
      }
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    EpisodeRecord rec;
    rec.map = h.map_name;
    rec.outcome = outcome;
    rec.total_reward = total;
    rec.steps = steps;
    rec.wall_ms = ms;
    on_episode(std::move(rec));
  }
}

// ---------------------------------------------------------------------------
// Training run

struct TrainHooks {
  /// Called with each finished episode, in completion order, numbered.
  std::function<void(const EpisodeRecord&)> on_episode;
  std::function<void(const UpdateRecord&)> on_update;
  /// Called every `checkpoint_every` episodes and once at the end.
  std::function<void(const NetParams<float>&, const OptState&, std::uint64_t episodes, bool final)> on_checkpoint;
  /// Polled by agents; returning true requests an orderly stop.
  std::function<bool()> stop_requested;
};

struct TrainResult {
  NetParams<float> params;
  OptState opt;
  std::uint64_t episodes_completed = 0;  // including the resumed offset
  std::uint64_t samples_enqueued = 0;
  std::uint64_t samples_consumed = 0;
  std::uint64_t updates = 0;
  std::uint64_t exclusion_violations = 0;
  std::uint64_t misrouted_replies = 0;
  std::uint64_t forward_calls = 0;
  bool interrupted = false;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs GA3C-style training: `num_agents` actors, `num_predictors` batching
/// predictors, `num_trainers` trainers, one shared network. Stops after
/// `total_episodes` new episodes. `start_episode` continues numbering when
/// resuming. With one worker of each kind the run is bit-deterministic.
inline TrainResult run_training(const TrainConfig& cfg, const EnvConfig& env_cfg, const OptimConfig& optim,
                                NetParams<float> init, OptState opt, std::uint64_t start_episode,
                                const TrainHooks& hooks = {}) {
  cfg.validate();
  if (init.shape.beams != env_cfg.scanner.num_beams)
    throw std::invalid_argument("network input width does not match scanner beam count");
  if (opt.accum.size() != init.values.size()) opt = OptState(init.values.size(), optim.learning_rate);

  const bool lockstep = cfg.single_worker();
  ParamStore store(std::move(init), std::move(opt));
  Queues q(cfg.num_agents, 2 * static_cast<std::size_t>(cfg.prediction_batch_max),
           2 * static_cast<std::size_t>(cfg.training_batch_size));
  TrainProgress progress;
  LossBoard board;
  AgentStats agent_stats;
  PredictorStats pred_stats;

  std::atomic<std::uint64_t> claimed{0};
  std::atomic<bool> abort{false};
  std::mutex err_mu;
  std::string first_error;
  auto fail = [&](const std::string& who, const std::exception& e) {
    {
      std::lock_guard lock(err_mu);
      if (first_error.empty()) first_error = who + ": " + e.what();
    }
    abort = true;
    progress.abort();
    q.close_all();
  };
  auto stop_requested = [&] { return abort.load() || (hooks.stop_requested && hooks.stop_requested()); };

  std::mutex log_mu;
  std::uint64_t logged = 0;
  auto log_episode = [&](EpisodeRecord rec) {
    std::lock_guard lock(log_mu);
    ++logged;
    rec.episode = start_episode + logged;
    rec.losses = board.get();
    if (lockstep) rec.wall_ms = 0.0;  // keeps single-worker logs byte-identical
    if (hooks.on_episode) hooks.on_episode(rec);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && rec.episode % cfg.checkpoint_every == 0) {
      auto [p, o] = store.snapshot();
      hooks.on_checkpoint(p, o, rec.episode, false);
    }
  };

  std::mutex update_mu;
  auto on_update = [&](const Losses& l, std::size_t n) {
    board.set(l);
    if (hooks.on_update) {
      std::lock_guard lock(update_mu);
      hooks.on_update({store.updates(), n, l});
    }
  };

  ForwardFn forward_fn = [&](std::span<const Observation* const> obs) {
    return store.read([&](const NetParams<float>& p) { return forward(p, obs); });
  };

  std::vector<std::thread> trainers, predictors, agents;
  for (int i = 0; i < cfg.num_trainers; ++i) {
    trainers.emplace_back([&, i] {
      try {
        trainer_loop(q, store, cfg.training_batch_size, optim.loss, progress, on_update);
      } catch (const std::exception& e) {
        fail("trainer " + std::to_string(i), e);
      }
    });
  }
  for (int i = 0; i < cfg.num_predictors; ++i) {
    predictors.emplace_back([&, i] {
      try {
        predictor_loop(q, forward_fn, cfg.prediction_batch_max, std::chrono::microseconds(cfg.prediction_wait_us),
                       &pred_stats);
      } catch (const std::exception& e) {
        fail("predictor " + std::to_string(i), e);
      }
    });
  }
  for (int a = 0; a < cfg.num_agents; ++a) {
    agents.emplace_back([&, a] {
      try {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(a), 0x6e617667u};
        Rng rng(seq);
        std::vector<NavEnv> envs;
        envs.reserve(cfg.maps.size());
        for (const auto& m : cfg.maps) envs.emplace_back(*m.map, env_cfg);
        AgentOptions ao{a, cfg.t_max, cfg.gamma, lockstep};
        auto claim = [&](std::uint64_t& idx) {
          idx = claimed.fetch_add(1);
          return idx < cfg.total_episodes;
        };
        auto source = [&](std::uint64_t idx, Rng& r) {
          const auto w = cfg.weights_for(start_episode + idx);
          const auto k = pick_weighted(w, r);
          return EnvHandle<NavEnv>{&envs[k], cfg.maps[k].name};
        };
        agent_loop<NavEnv>(ao, q, rng, claim, source, log_episode, stop_requested, agent_stats, progress);
      } catch (const std::exception& e) {
        fail("agent " + std::to_string(a), e);
      }
    });
  }

  for (auto& t : agents) t.join();
  q.predictions.close();
  for (auto& t : predictors) t.join();
  q.training.close();
  for (auto& t : trainers) t.join();

  if (!first_error.empty()) throw TrainingAborted("training aborted: " + first_error);

  TrainResult res;
  std::tie(res.params, res.opt) = store.snapshot();
  res.episodes_completed = start_episode + logged;
  res.samples_enqueued = agent_stats.samples_enqueued.load();
  res.samples_consumed = q.training.popped();
  res.updates = store.updates();
  res.exclusion_violations = store.violations();
  res.misrouted_replies = agent_stats.misrouted_replies.load();
  res.forward_calls = pred_stats.forward_calls.load();
  res.interrupted = hooks.stop_requested && hooks.stop_requested();
  if (hooks.on_checkpoint) hooks.on_checkpoint(res.params, res.opt, res.episodes_completed, true);
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalMetrics {
  int episodes = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_steps = 0.0;
  double mean_reward = 0.0;

  friend bool operator==(const EvalMetrics&, const EvalMetrics&) = default;
};

struct EvalOptions {
  int episodes = 200;
  std::uint64_t seed = 1;
  int parallel = 32;  // episodes advanced together; does not change results
  /// When set, receives each episode's trajectory.
  std::function<void(int episode, const std::vector<TrajectoryRow>&)> on_trajectory;
};

/// Greedy (argmax) rollouts. Episode `e` draws from its own generator seeded
/// by (seed, e), so results do not depend on `parallel`.
inline EvalMetrics evaluate(const NetParams<float>& params, const WorldMap& map, const EnvConfig& env_cfg,
                            const EvalOptions& opt) {
  if (opt.episodes < 1) throw std::invalid_argument("evaluate needs at least one episode");
  struct Slot {
    int episode = -1;
    NavEnv env;
    Rng rng;
    Observation obs;
    double total = 0.0;
    std::vector<TrajectoryRow> traj;
  };
  const int width = std::max(1, std::min(opt.parallel, opt.episodes));
  std::vector<Slot> slots;
  slots.reserve(static_cast<std::size_t>(width));
  for (int i = 0; i < width; ++i) slots.push_back(Slot{-1, NavEnv(map, env_cfg), Rng(), {}, 0.0, {}});

  int next = 0, done = 0, success = 0, collided = 0, timed_out = 0;
  double steps_sum = 0.0;
  // summed in episode order so the mean does not depend on completion order
  std::vector<double> totals(static_cast<std::size_t>(opt.episodes));
  auto start = [&](Slot& s) {
    s.episode = next++;
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                      static_cast<std::uint32_t>(s.episode), 0x6576616cu};
    s.rng.seed(seq);
    s.obs = s.env.reset(s.rng);
    s.total = 0.0;
    s.traj.clear();
    if (opt.on_trajectory) s.traj.push_back({0, s.env.state().pose, -1, 0.0, Status::Running});
  };
  for (auto& s : slots) start(s);

  std::vector<Activations<float>> acts;
  std::vector<const Observation*> batch;
  std::vector<Slot*> active;
  while (done < opt.episodes) {
    batch.clear();
    active.clear();
    for (auto& s : slots) {
      if (s.episode < 0) continue;
      batch.push_back(&s.obs);
      active.push_back(&s);
    }
    const auto out = forward(params, std::span<const Observation* const>(batch));
    for (std::size_t i = 0; i < active.size(); ++i) {
      Slot& s = *active[i];
      const int a = greedy_action(out[i].policy);
      StepResult r = s.env.step(a, s.rng);
      s.total += r.reward;
      s.obs = std::move(r.observation);
      if (opt.on_trajectory) s.traj.push_back({s.env.state().step_count, s.env.state().pose, a, r.reward, r.status});
      if (!r.terminal) continue;
      ++done;
      success += r.status == Status::GoalReached;
      collided += r.status == Status::Collided;
      timed_out += r.status == Status::TimedOut;
      steps_sum += s.env.state().step_count;
      totals[static_cast<std::size_t>(s.episode)] = s.total;
      if (opt.on_trajectory) opt.on_trajectory(s.episode, s.traj);
      if (next < opt.episodes)
        start(s);
      else
        s.episode = -1;
    }
  }
  EvalMetrics m;
  m.episodes = opt.episodes;
  m.success_rate = double(success) / opt.episodes;
  m.collision_rate = double(collided) / opt.episodes;
  m.timeout_rate = double(timed_out) / opt.episodes;
  m.mean_steps = steps_sum / opt.episodes;
  double reward_sum = 0.0;
  for (double t : totals) reward_sum += t;
  m.mean_reward = reward_sum / opt.episodes;
  return m;
}

}  // namespace navgym

#pragma once

// DQN training loop: simulate a path, roll an epsilon-greedy episode into the
// replay buffer, then take gradient steps on uniform mini-batches against
// targets from the frozen copy theta*, which is refreshed every
// target_sync_period steps. Single-threaded and fully deterministic for a
// given seed.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qstop/mdp.hpp"
#include "qstop/net.hpp"
#include "qstop/replay.hpp"
#include "qstop/rmsprop.hpp"

namespace qstop {

struct TrainConfig {
  std::vector<int> hidden = {32, 32, 32};
  int batch_size = 1000;
  std::uint64_t total_paths = 200000;
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint64_t eps_decay_steps = 0;       // 0: half of total_paths
  std::uint64_t target_sync_period = 500;  // T*
  std::size_t buffer_capacity = 100000;
  std::size_t warmup = 0;                  // 0: 10 * batch_size
  int grad_steps_per_episode = 1;
  RmsPropConfig optimizer;

  std::uint64_t effective_decay_steps() const {
    if (eps_decay_steps > 0) return eps_decay_steps;
    return total_paths >= 2 ? total_paths / 2 : 1;
  }
  std::size_t effective_warmup() const {
    return warmup > 0 ? warmup : static_cast<std::size_t>(10) * batch_size;
  }

  void validate() const {
    if (hidden.empty()) throw std::invalid_argument("train: need at least one hidden layer");
    for (int h : hidden) {
      if (h < 1) throw std::invalid_argument("train: hidden sizes must be >= 1");
    }
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (static_cast<std::size_t>(batch_size) > buffer_capacity) {
      throw std::invalid_argument("train: batch_size must not exceed buffer capacity");
    }
    if (total_paths < 1) throw std::invalid_argument("train: total_paths must be >= 1");
    if (target_sync_period < 1) throw std::invalid_argument("train: target_sync_period must be >= 1");
    if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0)) {
      throw std::invalid_argument("train: epsilon values must lie in [0,1]");
    }
    if (eps_end > eps_start) throw std::invalid_argument("train: eps_end must be <= eps_start");
    if (grad_steps_per_episode < 1) {
      throw std::invalid_argument("train: grad_steps_per_episode must be >= 1");
    }
  }
};

struct TrainDiagnostics {
  std::vector<double> loss_trace;  // one entry per gradient step
  double final_epsilon = 0.0;
  std::uint64_t gradient_steps = 0;
  std::uint64_t target_syncs = 0;
  std::uint64_t episodes = 0;
  std::uint64_t experiences = 0;
  // Continue-head values below -0.05 seen at periodic spot checks of visited
  // states; logged, never fatal (rewards are nonnegative, so the optimum is too).
  std::uint64_t soft_negative_q = 0;
};

// Stream purposes under the training seed.
namespace train_streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kPaths = 2;
inline constexpr std::uint64_t kExplore = 3;
inline constexpr std::uint64_t kBatch = 4;
}  // namespace train_streams

// TD targets from the frozen network: r for terminal rows, otherwise
// r + max over the two heads at the successor state (gamma = 1).
inline std::vector<double> td_targets(const ReplayBuffer& buffer,
                                      std::span<const std::uint32_t> idx,
                                      const DenseNet& target_net) {
  const int width = target_net.input_dim();
  Matrix next_states(static_cast<int>(idx.size()), width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Experience& e = buffer[idx[r]];
    auto row = next_states.row(static_cast<int>(r));
    for (int c = 0; c < width; ++c) row[c] = e.next_state[c];
  }
  const Matrix q_next = forward(target_net, next_states);
  std::vector<double> targets(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Experience& e = buffer[idx[r]];
    double t = e.reward;
    if (!e.terminal) {
      double best = q_next(static_cast<int>(r), 0);
      for (int c = 1; c < q_next.cols(); ++c) best = std::max(best, q_next(static_cast<int>(r), c));
      t += best;
    }
    targets[r] = t;
  }
  return targets;
}

template <Environment E>
std::pair<DenseNet, TrainDiagnostics> train(const TrainConfig& cfg, const E& env,
                                            int rights, int delta, std::uint64_t seed) {
  cfg.validate();
  if (rights < 1) throw std::invalid_argument("train: rights must be >= 1");
  if (delta < 1) throw std::invalid_argument("train: delta must be >= 1");

  const StreamKey root = StreamKey::from_seed(seed);
  CounterRng init_rng(root.child(train_streams::kInit));
  CounterRng batch_rng(root.child(train_streams::kBatch));

  std::vector<int> arch;
  arch.push_back(encoded_width(env.feature_count()));
  arch.insert(arch.end(), cfg.hidden.begin(), cfg.hidden.end());
  arch.push_back(2);

  DenseNet net = init_net(arch, init_rng);
  DenseNet target = sync_target(net);
  RmsProp optimizer(net, cfg.optimizer);
  ReplayBuffer buffer(cfg.buffer_capacity);

  const EpsilonSchedule schedule{cfg.eps_start, cfg.eps_end, cfg.effective_decay_steps()};
  const std::size_t warmup = cfg.effective_warmup();

  TrainDiagnostics diag;
  diag.loss_trace.reserve(cfg.total_paths * cfg.grad_steps_per_episode);

  GradientSet grads = GradientSet::zeros_like(net);
  BackpropWorkspace ws;
  Matrix states(cfg.batch_size, net.input_dim());
  std::vector<int> actions(cfg.batch_size);
  double eps = cfg.eps_start;

  for (std::uint64_t p = 0; p < cfg.total_paths; ++p) {
    eps = epsilon_at(schedule, p);
    const auto path = env.simulate(root.child(train_streams::kPaths, p));
    CounterRng explore_rng(root.child(train_streams::kExplore, p));
    auto episode = generate_episode(net, env, path, rights, delta, eps, explore_rng);
    diag.experiences += episode.size();
    for (Experience& e : episode) buffer.push(std::move(e));
    ++diag.episodes;

    if (buffer.size() < warmup || buffer.size() < static_cast<std::size_t>(cfg.batch_size)) {
      continue;
    }
    for (int g = 0; g < cfg.grad_steps_per_episode; ++g) {
      const auto idx = buffer.sample_indices(cfg.batch_size, batch_rng);
      const auto targets = td_targets(buffer, idx, target);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const Experience& e = buffer[idx[r]];
        auto row = states.row(static_cast<int>(r));
        for (int c = 0; c < net.input_dim(); ++c) row[c] = e.state[c];
        actions[r] = e.action;
      }
      const double loss = loss_and_grads_into(net, states, actions, targets, grads, ws);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: diverged (non-finite loss at gradient step " +
                                 std::to_string(diag.gradient_steps) + ")");
      }
      optimizer.step(net, grads);
      diag.loss_trace.push_back(loss);
      ++diag.gradient_steps;

      if (diag.gradient_steps % cfg.target_sync_period == 0) {
        // Spot check before the sync: continue-head values at the states of
        // the current batch should not be materially negative.
        const Matrix q = forward(net, states);
        for (int r = 0; r < q.rows(); ++r) {
          if (q(r, 0) < -0.05) ++diag.soft_negative_q;
        }
        target = sync_target(net);
        ++diag.target_syncs;
      }
    }
  }
  diag.final_epsilon = eps;
  if (!parameters_finite(net)) {
    throw std::runtime_error("train: diverged (non-finite parameters)");
  }
  return {std::move(net), std::move(diag)};
}

}  // namespace qstop

#pragma once

// The stopping decision process on a fixed simulated path. Continuing moves
// one step for zero reward; exercising pays the current payoff, consumes one
// right and jumps the agent delta steps ahead (the waiting period collapses
// into the transition, so one-step TD targets line up with the delayed
// continuation value). Episodes end at absorption (last right used), when an
// exercise lands past the grid, or on continue at the final date.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "qstop/env.hpp"
#include "qstop/net.hpp"
#include "qstop/replay.hpp"

namespace qstop {

enum class Action : int { kContinue = 0, kExercise = 1 };

// Position of the agent on a path: time index, remaining rights, and whether
// the absorbing state (all rights used) has been reached.
struct StoppingState {
  int t = 0;
  int rights = 0;
  bool absorbed = false;
};

struct Transition {
  StoppingState next;
  double reward = 0.0;
  bool terminal = false;
};

inline int encoded_width(int feature_count) { return feature_count + 2; }

// Feature layout: [t/N, features..., rights/total]. Market features are log
// prices; the normalizations keep all inputs near the unit scale.
template <Environment E>
void encode_state(const E& env, const typename E::Path& path, const StoppingState& s,
                  int total_rights, std::span<double> out) {
  const int d = env.feature_count();
  out[0] = static_cast<double>(s.t) / env.horizon();
  env.write_features(path, s.t, out.subspan(1, d));
  out[d + 1] = static_cast<double>(s.rights) / total_rights;
}

template <Environment E>
Transition step_state(const E& env, const typename E::Path& path, const StoppingState& s,
                      Action action, int delta) {
  if (s.absorbed || s.t > env.horizon()) {
    throw std::logic_error("step_state: acting in a terminated state");
  }
  if (action == Action::kContinue) {
    if (s.t == env.horizon()) {
      return {StoppingState{s.t + 1, s.rights, false}, 0.0, true};
    }
    return {StoppingState{s.t + 1, s.rights, false}, 0.0, false};
  }
  if (s.rights < 1) throw std::logic_error("step_state: exercise without rights");
  const double reward = env.payoff(path, s.t);
  const int next_t = s.t + delta;
  const int next_rights = s.rights - 1;
  const bool absorbed = next_rights == 0;
  const bool terminal = absorbed || next_t > env.horizon();
  return {StoppingState{next_t, next_rights, absorbed}, reward, terminal};
}

// One epsilon-greedy episode along `path`. With probability eps the action is
// uniform, otherwise the argmax of the two heads with ties broken toward
// continuing. Terminal successors are encoded as the reserved all-zero state.
template <Environment E>
std::vector<Experience> generate_episode(const DenseNet& net, const E& env,
                                         const typename E::Path& path, int total_rights,
                                         int delta, double eps, CounterRng& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("generate_episode: eps must lie in [0,1]");
  }
  const int width = encoded_width(env.feature_count());
  RowEval eval(net);
  std::vector<Experience> episode;
  std::vector<double> enc(width);

  StoppingState state{0, total_rights, false};
  while (true) {
    encode_state(env, path, state, total_rights, enc);
    Action action;
    if (rng.next_unit() < eps) {
      action = (rng.next_u64() & 1u) ? Action::kExercise : Action::kContinue;
    } else {
      auto q = eval(enc);
      action = q[1] > q[0] ? Action::kExercise : Action::kContinue;
    }
    const Transition tr = step_state(env, path, state, action, delta);

    Experience e;
    e.state = enc;
    e.action = static_cast<int>(action);
    e.reward = tr.reward;
    e.terminal = tr.terminal;
    if (tr.terminal) {
      e.next_state.assign(width, 0.0);
    } else {
      e.next_state.resize(width);
      encode_state(env, path, tr.next, total_rights, std::span<double>(e.next_state));
    }
    episode.push_back(std::move(e));
    if (tr.terminal) break;
    state = tr.next;
  }
  return episode;
}

}  // namespace qstop

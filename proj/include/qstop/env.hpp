#pragma once

// Environment adapters: the market model and the finite chain exposed through
// one surface so that episode generation, training and the bound estimators
// can be written once. A Path is a full trajectory over absolute times
// 0..horizon; conditional resimulation keeps the prefix of the base path and
// redraws the rest from its own stream.

#include <concepts>
#include <span>
#include <vector>

#include "qstop/chain.hpp"
#include "qstop/market.hpp"
#include "qstop/matrix.hpp"
#include "qstop/rng.hpp"

namespace qstop {

template <class E>
concept Environment = requires(const E& env, const typename E::Path& path,
                               StreamKey key, int t, std::span<double> out) {
  typename E::Path;
  { env.horizon() } -> std::convertible_to<int>;
  { env.feature_count() } -> std::convertible_to<int>;
  { env.simulate(key) } -> std::same_as<typename E::Path>;
  { env.simulate_from(path, t, t, key) } -> std::same_as<typename E::Path>;
  { env.payoff(path, t) } -> std::convertible_to<double>;
  env.write_features(path, t, out);
};

class MarketEnv {
 public:
  // Log prices, row t holds the d coordinates at time t.
  struct Path {
    Matrix logp;  // (N+1) x d
  };

  explicit MarketEnv(MarketModel model) : model_(model) { model_.validate(); }

  int horizon() const { return model_.steps; }
  int feature_count() const { return model_.d; }
  const MarketModel& model() const { return model_; }

  Path simulate(StreamKey key) const {
    Path path{Matrix(model_.steps + 1, model_.d)};
    const double l0 = std::log(model_.s0);
    for (int i = 0; i < model_.d; ++i) path.logp(0, i) = l0;
    evolve(path, 0, model_.steps, key);
    return path;
  }

  // Continuation of `base` from time t, simulated through t_max (the rest of
  // the rows is left untouched and must not be read).
  Path simulate_from(const Path& base, int t, int t_max, StreamKey key) const {
    Path path{Matrix(model_.steps + 1, model_.d)};
    for (int u = 0; u <= t; ++u) {
      for (int i = 0; i < model_.d; ++i) path.logp(u, i) = base.logp(u, i);
    }
    evolve(path, t, std::min(t_max, model_.steps), key);
    return path;
  }

  void simulate_from_into(const Path& base, int t, int t_max, StreamKey key,
                          Path& out) const {
    if (out.logp.rows() != model_.steps + 1 || out.logp.cols() != model_.d) {
      out.logp = Matrix(model_.steps + 1, model_.d);
    }
    for (int i = 0; i < model_.d; ++i) out.logp(t, i) = base.logp(t, i);
    evolve(out, t, std::min(t_max, model_.steps), key);
  }

  double payoff(const Path& path, int t) const {
    if (t > model_.steps) return 0.0;
    return payoff_from_logs(model_, t, path.logp.row(t));
  }

  void write_features(const Path& path, int t, std::span<double> out) const {
    auto logs = path.logp.row(t);
    for (int i = 0; i < model_.d; ++i) out[i] = logs[i];
  }

 private:
  void evolve(Path& path, int from, int to, StreamKey key) const {
    const double k = model_.mean_reversion;
    for (int t = from; t < to; ++t) {
      for (int i = 0; i < model_.d; ++i) {
        const double z = normal_from(key, static_cast<std::uint64_t>(t) * model_.d + i);
        path.logp(t + 1, i) =
            (1.0 - k) * (path.logp(t, i) - model_.mu) + model_.mu + model_.sigma * z;
      }
    }
  }

  MarketModel model_;
};

class ChainEnv {
 public:
  struct Path {
    std::vector<int> states;  // length N+1
  };

  explicit ChainEnv(ChainSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    // Row-wise cumulative transition probabilities for inverse sampling.
    cdf_ = Matrix(spec_.n_states, spec_.n_states);
    for (int s = 0; s < spec_.n_states; ++s) {
      double acc = 0.0;
      for (int t = 0; t < spec_.n_states; ++t) {
        acc += spec_.transition(s, t);
        cdf_(s, t) = acc;
      }
      cdf_(s, spec_.n_states - 1) = 1.0;
    }
  }

  int horizon() const { return spec_.steps; }
  int feature_count() const { return 1; }
  const ChainSpec& spec() const { return spec_; }

  Path simulate(StreamKey key) const {
    Path path{std::vector<int>(spec_.steps + 1)};
    path.states[0] = spec_.initial_state;
    evolve(path, 0, spec_.steps, key);
    return path;
  }

  Path simulate_from(const Path& base, int t, int t_max, StreamKey key) const {
    Path path{std::vector<int>(spec_.steps + 1)};
    for (int u = 0; u <= t; ++u) path.states[u] = base.states[u];
    evolve(path, t, std::min(t_max, spec_.steps), key);
    return path;
  }

  void simulate_from_into(const Path& base, int t, int t_max, StreamKey key,
                          Path& out) const {
    if (static_cast<int>(out.states.size()) != spec_.steps + 1) {
      out.states.assign(spec_.steps + 1, 0);
    }
    out.states[t] = base.states[t];
    evolve(out, t, std::min(t_max, spec_.steps), key);
  }

  double payoff(const Path& path, int t) const {
    if (t > spec_.steps) return 0.0;
    return spec_.payoff(t, path.states[t]);
  }

  void write_features(const Path& path, int t, std::span<double> out) const {
    const int denom = spec_.n_states > 1 ? spec_.n_states - 1 : 1;
    out[0] = static_cast<double>(path.states[t]) / denom;
  }

 private:
  void evolve(Path& path, int from, int to, StreamKey key) const {
    for (int t = from; t < to; ++t) {
      const double u = unit_from(key, static_cast<std::uint64_t>(t));
      const int s = path.states[t];
      int nxt = 0;
      while (nxt < spec_.n_states - 1 && u > cdf_(s, nxt)) ++nxt;
      path.states[t + 1] = nxt;
    }
  }

  ChainSpec spec_;
  Matrix cdf_;
};

static_assert(Environment<MarketEnv>);
static_assert(Environment<ChainEnv>);

}  // namespace qstop

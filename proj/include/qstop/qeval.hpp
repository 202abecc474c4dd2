#pragma once

// Q-function surface used by policies and bounds: the two action values at a
// path position (time t, remaining rights nu), with the boundary conventions
// that both values are 0 once nu <= 0 or t is past the grid. NetQ reads a
// trained network; ExactChainQ reads the backward-induction tables so tests
// can swap the exact Q* in for the learned one.

#include <concepts>
#include <vector>

#include "qstop/chain.hpp"
#include "qstop/env.hpp"
#include "qstop/mdp.hpp"
#include "qstop/net.hpp"

namespace qstop {

struct HeadValues {
  double cont = 0.0;  // value of continuing
  double ex = 0.0;    // value of exercising now
  double best() const { return cont > ex ? cont : ex; }
};

template <class Q, class E>
concept QFunction = Environment<E> &&
    requires(const Q& q, const typename E::Path& path, int t, int nu) {
      { q.heads(path, t, nu) } -> std::same_as<HeadValues>;
    };

// Evaluates one encoded row per query. Keeps scratch buffers, so copies (one
// per worker) rather than shared references should cross threads.
template <Environment E>
class NetQ {
 public:
  NetQ(const DenseNet& net, const E& env, int total_rights)
      : net_(&net), env_(&env), total_rights_(total_rights), eval_(net),
        enc_(encoded_width(env.feature_count())) {}

  NetQ(const NetQ& o) : net_(o.net_), env_(o.env_), total_rights_(o.total_rights_),
                        eval_(*o.net_), enc_(o.enc_.size()) {}
  NetQ& operator=(const NetQ&) = delete;

  HeadValues heads(const typename E::Path& path, int t, int nu) const {
    if (nu <= 0 || t > env_->horizon()) return {};
    StoppingState s{t, nu, false};
    encode_state(*env_, path, s, total_rights_, std::span<double>(enc_));
    auto q = eval_(enc_);
    return {q[0], q[1]};
  }

  const DenseNet& net() const { return *net_; }

 private:
  const DenseNet* net_;
  const E* env_;
  int total_rights_;
  mutable RowEval eval_;
  mutable std::vector<double> enc_;
};

// Exact action values from the chain tables: the continue head is q^nu(t,s),
// the exercise head is g(t,s) + q^{nu-1}_delta(t,s).
class ExactChainQ {
 public:
  ExactChainQ(const ChainSpec& spec, const ExactSolution& sol)
      : spec_(&spec), sol_(&sol) {}

  HeadValues heads(const ChainEnv::Path& path, int t, int nu) const {
    if (nu <= 0 || t > spec_->steps) return {};
    const int s = path.states[t];
    const double cont = sol_->q[nu][t][s];
    const double delayed = sol_->q_delta[nu - 1][t][s];
    return {cont, spec_->payoff(t, s) + delayed};
  }

  const ExactSolution& solution() const { return *sol_; }

 private:
  const ChainSpec* spec_;
  const ExactSolution* sol_;
};

static_assert(QFunction<NetQ<MarketEnv>, MarketEnv>);
static_assert(QFunction<NetQ<ChainEnv>, ChainEnv>);
static_assert(QFunction<ExactChainQ, ChainEnv>);

}  // namespace qstop

#pragma once

// Exact ground truth on small finite-state Markov chains: backward induction
// for the multiple-stopping problem with waiting period (tables q, q_delta, y
// and the start value), plus a brute-force supremum over adapted exercise
// rules computed by a full recursion over history trees. The two routes share
// no algorithmic structure, which is the point: they cross-check each other.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qstop/errors.hpp"
#include "qstop/matrix.hpp"

namespace qstop {

struct ChainSpec {
  int n_states = 0;
  Matrix transition;  // S x S, rows sum to 1
  Matrix payoff;      // (steps+1) x S, nonnegative
  int steps = 0;      // N
  int rights = 1;     // n
  int delta = 1;
  int initial_state = 0;

  void validate() const {
    if (n_states < 1) throw std::invalid_argument("chain: need at least one state");
    if (steps < 1) throw std::invalid_argument("chain: steps must be >= 1");
    if (rights < 1) throw std::invalid_argument("chain: rights must be >= 1");
    if (delta < 1) throw std::invalid_argument("chain: delta must be >= 1");
    if (initial_state < 0 || initial_state >= n_states) {
      throw std::invalid_argument("chain: initial state out of range");
    }
    if (transition.rows() != n_states || transition.cols() != n_states) {
      throw std::invalid_argument("chain: transition matrix must be S x S");
    }
    if (payoff.rows() != steps + 1 || payoff.cols() != n_states) {
      throw std::invalid_argument("chain: payoff table must be (N+1) x S");
    }
    for (int s = 0; s < n_states; ++s) {
      double sum = 0.0;
      for (int t = 0; t < n_states; ++t) {
        const double p = transition(s, t);
        if (!(p >= 0.0)) throw std::invalid_argument("chain: negative transition probability");
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("chain: transition row does not sum to 1");
      }
    }
    for (double g : payoff.values()) {
      if (!(g >= 0.0)) throw std::invalid_argument("chain: payoffs must be nonnegative");
    }
  }
};

// Backward-induction tables, indexed [nu][k][s] for nu = 0..n, k = 0..N.
// Boundary conventions: g = 0 past the grid, q^0_delta = 0, y^0 = 0.
struct ExactSolution {
  std::vector<std::vector<std::vector<double>>> q;        // continue value q^nu(k,s)
  std::vector<std::vector<std::vector<double>>> q_delta;  // delayed value q^nu_delta(k,s)
  std::vector<std::vector<std::vector<double>>> y;        // envelope y^nu(k,s)
  std::vector<std::vector<std::vector<int>>> action;      // 1 = exercise, nu = 1..n
  double v0 = 0.0;

  double y_value(int nu, int k, int s, int steps) const {
    if (nu <= 0 || k > steps) return 0.0;
    return y[nu][k][s];
  }
};

// Exact backward induction with matrix powers for the delta-step expectations:
//   q^nu(k,.)        = P   * y^nu(k+1,.)
//   q^nu_delta(k,.)  = P^d * y^nu(k+d,.)
//   y^nu(k,x)        = max{ g(k,x) + q^{nu-1}_delta(k,x), q^nu(k,x) }.
inline ExactSolution solve_chain(const ChainSpec& spec) {
  spec.validate();
  const int S = spec.n_states;
  const int N = spec.steps;
  const int n = spec.rights;

  Matrix p_delta(S, S);
  for (int i = 0; i < S; ++i) p_delta(i, i) = 1.0;
  for (int d = 0; d < spec.delta; ++d) p_delta = matmul(p_delta, spec.transition);

  auto zeros = [&] {
    return std::vector<std::vector<double>>(N + 1, std::vector<double>(S, 0.0));
  };
  ExactSolution sol;
  sol.q.assign(n + 1, zeros());
  sol.q_delta.assign(n + 1, zeros());
  sol.y.assign(n + 1, zeros());
  sol.action.assign(n + 1, std::vector<std::vector<int>>(N + 1, std::vector<int>(S, 0)));

  auto expect = [&](const Matrix& kernel, const std::vector<double>& v, int s) {
    double acc = 0.0;
    for (int t = 0; t < S; ++t) acc += kernel(s, t) * v[t];
    return acc;
  };

  for (int nu = 1; nu <= n; ++nu) {
    for (int k = N; k >= 0; --k) {
      for (int s = 0; s < S; ++s) {
        const double cont = (k + 1 <= N) ? expect(spec.transition, sol.y[nu][k + 1], s) : 0.0;
        const double delayed =
            (k + spec.delta <= N) ? expect(p_delta, sol.y[nu - 1][k + spec.delta], s) : 0.0;
        sol.q[nu][k][s] = cont;
        sol.q_delta[nu - 1][k][s] = delayed;
        const double exercise = spec.payoff(k, s) + delayed;
        sol.y[nu][k][s] = std::max(exercise, cont);
        sol.action[nu][k][s] = exercise >= cont ? 1 : 0;
      }
    }
  }
  // Complete the nu = n slice of q_delta (not consumed by the recursion).
  for (int k = 0; k <= N; ++k) {
    for (int s = 0; s < S; ++s) {
      sol.q_delta[n][k][s] =
          (k + spec.delta <= N) ? expect(p_delta, sol.y[n][k + spec.delta], s) : 0.0;
    }
  }
  sol.v0 = sol.y[n][0][spec.initial_state];
  return sol;
}

namespace detail {

// Supremum over adapted exercise rules, walking the full history tree: at
// every reachable prefix the rule may choose freely, continuation values are
// exact one-step expectations over successors. Deliberately no memoization
// and no reduction-principle structure.
inline double adapted_tree_value(const ChainSpec& c, int t, int s, int rights,
                                 int earliest_exercise) {
  double cont = 0.0;
  if (t < c.steps && rights > 0) {
    for (int nxt = 0; nxt < c.n_states; ++nxt) {
      const double p = c.transition(s, nxt);
      if (p > 0.0) cont += p * adapted_tree_value(c, t + 1, nxt, rights, earliest_exercise);
    }
  }
  double best = cont;
  if (rights > 0 && t >= earliest_exercise) {
    double ex = c.payoff(t, s);
    if (rights > 1 && t < c.steps) {
      double tail = 0.0;
      for (int nxt = 0; nxt < c.n_states; ++nxt) {
        const double p = c.transition(s, nxt);
        if (p > 0.0) tail += p * adapted_tree_value(c, t + 1, nxt, rights - 1, t + c.delta);
      }
      ex += tail;
    }
    best = std::max(best, ex);
  }
  return best;
}

}  // namespace detail

inline double brute_force_value(const ChainSpec& spec) {
  spec.validate();
  if (spec.n_states > 5 || spec.steps > 10 || spec.rights > 3) {
    throw SizeGuardError("brute_force_value: limits are S <= 5, N <= 10, n <= 3");
  }
  return detail::adapted_tree_value(spec, 0, spec.initial_state, spec.rights, 0);
}

}  // namespace qstop

#pragma once

// Primal lower bound, dual upper bound and the confidence interval around the
// point estimate, for single and multiple stopping with a waiting period.
//
// The evaluation-time Q conventions live here:
//  - Single stopping (n = 1) exercises on a strict comparison of the two
//    heads; multiple stopping uses the non-strict rule. Both are overridable.
//  - The exercise branch of the empirical envelope y^nu can be taken from the
//    network's own exercise head (kQHead, the default: the head learns
//    payoff-now plus the delta-delayed continuation, so with an exact Q the
//    identities of the backward induction hold node by node), or assembled
//    literally from the realized path value at t+delta (kRealizedPath).

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "qstop/env.hpp"
#include "qstop/parallel.hpp"
#include "qstop/qeval.hpp"
#include "qstop/rng.hpp"

namespace qstop {

enum class DelayedTerm { kQHead, kRealizedPath };

struct PolicyOptions {
  bool strict_single = true;     // n = 1: exercise iff Q_ex >  Q_cont
  bool strict_multiple = false;  // n >= 2: exercise iff branch >= Q_cont
  DelayedTerm delayed_term = DelayedTerm::kQHead;
};

// Stream purposes under the evaluation seed.
namespace eval_streams {
inline constexpr std::uint64_t kLowerPaths = 10;
inline constexpr std::uint64_t kUpperOuter = 11;
inline constexpr std::uint64_t kUpperInner = 12;
inline constexpr std::uint64_t kPathDump = 13;
// Inner-estimate purposes under a per-outer-path key.
inline constexpr std::uint64_t kOneStep = 1;
inline constexpr std::uint64_t kDeltaStep = 2;
inline constexpr std::uint64_t kRollout = 3;
}  // namespace eval_streams

// Empirical Snell envelope y^nu at (t, X_t) through the Q-function, with
// g = 0 past the grid and Q(., 0) = 0. Returns 0 for nu <= 0.
template <Environment E, class Q>
  requires QFunction<Q, E>
double snell_from_q(const E& env, const Q& q, const typename E::Path& path, int t,
                    int nu, int delta, DelayedTerm mode) {
  if (nu <= 0 || t > env.horizon()) return 0.0;
  const HeadValues h = q.heads(path, t, nu);
  if (mode == DelayedTerm::kQHead) return h.best();
  const double delayed = q.heads(path, t + delta, nu - 1).cont;
  const double exercise = env.payoff(path, t) + delayed;
  return exercise > h.cont ? exercise : h.cont;
}

// Exercise times of the greedy policy along one path: ordered, pairwise gaps
// of at least delta, at most n entries; empty when never triggered.
template <Environment E, class Q>
  requires QFunction<Q, E>
std::vector<int> greedy_exercise_times(const E& env, const Q& q,
                                       const typename E::Path& path, int n, int delta,
                                       const PolicyOptions& opts) {
  std::vector<int> times;
  int earliest = 0;  // convention tau_{n+1} = -delta
  for (int t = 0; t <= env.horizon() && static_cast<int>(times.size()) < n; ++t) {
    if (t < earliest) continue;
    const int nu = n - static_cast<int>(times.size());
    bool exercise;
    if (n == 1) {
      const HeadValues h = q.heads(path, t, 1);
      exercise = opts.strict_single ? h.ex > h.cont : h.ex >= h.cont;
    } else {
      const HeadValues h = q.heads(path, t, nu);
      double branch;
      if (opts.delayed_term == DelayedTerm::kQHead) {
        branch = h.ex;
      } else {
        branch = env.payoff(path, t) + q.heads(path, t + delta, nu - 1).cont;
      }
      exercise = opts.strict_multiple ? branch > h.cont : branch >= h.cont;
    }
    if (exercise) {
      times.push_back(t);
      earliest = t + delta;
    }
  }
  return times;
}

struct PolicyEvaluation {
  double l_hat = 0.0;
  double sigma_l = 0.0;
  std::uint64_t sample_count = 0;
  std::vector<double> path_values;               // summed payoffs per path
  std::vector<std::vector<int>> exercise_times;  // per path
};

// Monte Carlo policy value over fresh paths: the primal lower bound.
template <Environment E, class Q>
  requires QFunction<Q, E>
PolicyEvaluation lower_bound(const E& env, const Q& q, int n, int delta,
                             std::uint64_t m_l, StreamKey key,
                             const PolicyOptions& opts, int workers = 1) {
  if (m_l < 2) throw std::invalid_argument("lower_bound: need at least 2 paths");
  PolicyEvaluation out;
  out.sample_count = m_l;
  out.path_values.resize(m_l);
  out.exercise_times.resize(m_l);

  std::vector<Q> worker_q(static_cast<std::size_t>(std::max(workers, 1)), q);
  parallel_for(m_l, workers, [&](std::size_t i, int w) {
    const Q& wq = worker_q[w];
    const auto path = env.simulate(key.child(i));
    auto times = greedy_exercise_times(env, wq, path, n, delta, opts);
    double total = 0.0;
    for (int t : times) total += env.payoff(path, t);
    out.path_values[i] = total;
    out.exercise_times[i] = std::move(times);
  });

  double sum = 0.0;
  for (double v : out.path_values) sum += v;
  out.l_hat = sum / static_cast<double>(m_l);
  double ss = 0.0;
  for (double v : out.path_values) ss += (v - out.l_hat) * (v - out.l_hat);
  out.sigma_l = std::sqrt(ss / static_cast<double>(m_l - 1));
  return out;
}

template <class CE, class E>
concept ContinuationEstimator = Environment<E> &&
    requires(const CE& ce, const typename E::Path& path, int a, int b, int nu,
             StreamKey key) {
      { ce.y_expectation(path, a, b, nu, key) } -> std::convertible_to<double>;
      { ce.rollout_value(path, a, key) } -> std::convertible_to<double>;
      { ce.inner_count() } -> std::convertible_to<std::uint64_t>;
    };

// Nested Monte Carlo estimates of the conditional continuation values. Each
// estimate draws j_inner conditional continuation paths from its own stream,
// so estimates are unbiased given the Q-function and independent across call
// sites.
template <Environment E, class Q>
  requires QFunction<Q, E>
class NestedEstimator {
 public:
  NestedEstimator(const E& env, const Q& q, int j_inner, int delta,
                  const PolicyOptions& opts)
      : env_(&env), q_(q), j_(j_inner), delta_(delta), opts_(opts) {
    if (j_inner < 1) throw std::invalid_argument("NestedEstimator: j_inner must be >= 1");
  }

  // Estimate of E[y^nu(target, X_target) | F_anchor] along the outer path.
  double y_expectation(const typename E::Path& outer, int anchor, int target, int nu,
                       StreamKey key) const {
    if (nu <= 0 || target > env_->horizon()) return 0.0;
    const int t_max =
        opts_.delayed_term == DelayedTerm::kRealizedPath ? target + delta_ : target;
    double sum = 0.0;
    for (int j = 0; j < j_; ++j) {
      env_->simulate_from_into(outer, anchor, t_max, key.child(j), scratch_);
      sum += snell_from_q(*env_, q_, scratch_, target, nu, delta_, opts_.delayed_term);
    }
    return sum / j_;
  }

  // Single-stopping continuation: average payoff at the first greedy exercise
  // time past the anchor along conditional continuation paths (0 if none).
  double rollout_value(const typename E::Path& outer, int anchor, StreamKey key) const {
    if (anchor >= env_->horizon()) return 0.0;
    double sum = 0.0;
    for (int j = 0; j < j_; ++j) {
      env_->simulate_from_into(outer, anchor, env_->horizon(), key.child(j), scratch_);
      for (int u = anchor + 1; u <= env_->horizon(); ++u) {
        const HeadValues h = q_.heads(scratch_, u, 1);
        const bool stop = opts_.strict_single ? h.ex > h.cont : h.ex >= h.cont;
        if (stop) {
          sum += env_->payoff(scratch_, u);
          break;
        }
      }
    }
    return sum / j_;
  }

  std::uint64_t inner_count() const { return static_cast<std::uint64_t>(j_); }

 private:
  const E* env_;
  Q q_;
  int j_;
  int delta_;
  PolicyOptions opts_;
  mutable typename E::Path scratch_;
};

// Exact conditional expectations on a chain via transition-matrix powers, for
// oracle-grade tests. Assumes the kQHead envelope (y equals the
// backward-induction tables when paired with ExactChainQ).
class ExactChainEstimator {
 public:
  ExactChainEstimator(const ChainSpec& spec, const ExactSolution& sol)
      : spec_(&spec), sol_(&sol) {
    powers_.reserve(spec.steps + 1);
    Matrix p(spec.n_states, spec.n_states);
    for (int i = 0; i < spec.n_states; ++i) p(i, i) = 1.0;
    powers_.push_back(p);
    for (int k = 1; k <= spec.steps; ++k) {
      powers_.push_back(matmul(powers_.back(), spec_->transition));
    }
  }

  double y_expectation(const ChainEnv::Path& outer, int anchor, int target, int nu,
                       StreamKey) const {
    if (nu <= 0 || target > spec_->steps) return 0.0;
    const Matrix& kernel = powers_[target - anchor];
    const int s = outer.states[anchor];
    double acc = 0.0;
    for (int t = 0; t < spec_->n_states; ++t) {
      acc += kernel(s, t) * sol_->y[nu][target][t];
    }
    return acc;
  }

  // The optimal policy's continuation value is the continue head itself.
  double rollout_value(const ChainEnv::Path& outer, int anchor, StreamKey) const {
    if (anchor >= spec_->steps) return 0.0;
    return sol_->q[1][anchor][outer.states[anchor]];
  }

  std::uint64_t inner_count() const { return 0; }

 private:
  const ChainSpec* spec_;
  const ExactSolution* sol_;
  std::vector<Matrix> powers_;
};

static_assert(ContinuationEstimator<NestedEstimator<MarketEnv, NetQ<MarketEnv>>, MarketEnv>);
static_assert(ContinuationEstimator<ExactChainEstimator, ChainEnv>);

// Martingale and correction arrays for one outer path, k = 0..N.
struct MartingaleTrack {
  std::vector<double> g;                        // payoffs along the path
  std::vector<std::vector<double>> y;           // y[nu-1][k], realized envelopes
  std::vector<std::vector<double>> m;           // m[nu-1][k], martingales, m[.][0] = 0
  std::vector<std::vector<double>> correction;  // correction[nu-1][k], nu = 1..n-1
};

// Builds the dual inputs along one outer path. For n = 1 the increments use
// the action-indicator form with greedy rollout estimates; for n >= 2 they are
// the envelope increments y^nu(k) - E[y^nu(k) | F_{k-1}], plus the
// delta-increment corrections
//   corr^nu(p) = M(p+delta) - M(p) + E[y^nu(p+delta) | F_p] - y^nu(p+delta),
// with M frozen at M(N) and y = 0 past the grid.
template <Environment E, class Q, class CE>
  requires QFunction<Q, E> && ContinuationEstimator<CE, E>
MartingaleTrack martingale_track(const E& env, const Q& q, const CE& ce,
                                 const typename E::Path& path, int n, int delta,
                                 StreamKey inner_key, const PolicyOptions& opts) {
  const int N = env.horizon();
  MartingaleTrack tr;
  tr.g.resize(N + 1);
  for (int k = 0; k <= N; ++k) tr.g[k] = env.payoff(path, k);

  tr.y.assign(n, std::vector<double>(N + 1, 0.0));
  for (int nu = 1; nu <= n; ++nu) {
    for (int k = 0; k <= N; ++k) {
      tr.y[nu - 1][k] = snell_from_q(env, q, path, k, nu, delta, opts.delayed_term);
    }
  }

  tr.m.assign(n, std::vector<double>(N + 1, 0.0));
  if (n == 1) {
    // E_k = conditional value of the greedy policy started after k; E_N = 0.
    std::vector<double> est(N + 1, 0.0);
    for (int k = 0; k < N; ++k) {
      est[k] = ce.rollout_value(path, k, inner_key.child(eval_streams::kRollout, k));
    }
    for (int k = 1; k <= N; ++k) {
      const HeadValues h = q.heads(path, k, 1);
      const bool stop = opts.strict_single ? h.ex > h.cont : h.ex >= h.cont;
      const double realized = stop ? tr.g[k] : est[k];
      tr.m[0][k] = tr.m[0][k - 1] + realized - est[k - 1];
    }
  } else {
    for (int nu = 1; nu <= n; ++nu) {
      auto& m = tr.m[nu - 1];
      for (int k = 1; k <= N; ++k) {
        const double expected =
            ce.y_expectation(path, k - 1, k, nu, inner_key.child(eval_streams::kOneStep, k, nu));
        m[k] = m[k - 1] + tr.y[nu - 1][k] - expected;
      }
    }
    tr.correction.assign(n - 1, std::vector<double>(N + 1, 0.0));
    for (int nu = 1; nu <= n - 1; ++nu) {
      for (int p = 0; p <= N; ++p) {
        const int t = p + delta;
        double c = tr.m[nu - 1][std::min(t, N)] - tr.m[nu - 1][p];
        if (t <= N) {
          c += ce.y_expectation(path, p, t, nu, inner_key.child(eval_streams::kDeltaStep, p, nu)) -
               tr.y[nu - 1][t];
        }
        tr.correction[nu - 1][p] = c;
      }
    }
  }
  return tr;
}

// Exact maximum of the dual objective over all admissible exercise tuples
// u_nu >= u_{nu+1} + delta, evaluated by dynamic programming over the grid
// extended with n*delta cemetery slots (payoff 0, martingales frozen,
// corrections 0 past the grid). O(N^2 * n).
inline double pathwise_sup(std::span<const double> g,
                           const std::vector<std::vector<double>>& m,
                           const std::vector<std::vector<double>>& correction,
                           int n, int delta, int horizon) {
  const int n_cem = horizon + n * delta;
  const double neg_inf = -std::numeric_limits<double>::infinity();

  auto g_at = [&](int u) { return u <= horizon ? g[u] : 0.0; };
  auto m_at = [&](int nu, int u) { return m[nu - 1][std::min(u, horizon)]; };
  auto corr_at = [&](int nu, int p) {
    return p <= horizon ? correction[nu - 1][p] : 0.0;
  };

  // w[p] = best value of the remaining r exercises given the previous
  // exercise sits at p.
  std::vector<double> w(n_cem + 1, 0.0), next(n_cem + 1, 0.0);
  for (int r = 1; r <= n - 1; ++r) {
    for (int p = 0; p <= n_cem; ++p) {
      double best = neg_inf;
      for (int u = p + delta; u <= n_cem; ++u) {
        const double v = g_at(u) - m_at(r, u) + m_at(r, p) + corr_at(r, p) + w[u];
        if (v > best) best = v;
      }
      next[p] = best;
    }
    std::swap(w, next);
  }
  double best = neg_inf;
  for (int u = 0; u <= n_cem; ++u) {
    const double v = g_at(u) - m_at(n, u) + w[u];
    if (v > best) best = v;
  }
  return best;
}

struct DualEvaluation {
  double u_hat = 0.0;
  double sigma_u = 0.0;
  std::uint64_t outer_count = 0;
  std::uint64_t inner_count = 0;
  std::vector<double> sup_values;  // per outer path
};

// Monte Carlo average of the pathwise supremum over fresh outer paths: the
// dual upper bound. For n = 1 the objective is max_{0<=k<=N} (g(k) - M(k)).
template <Environment E, class Q, class CE>
  requires QFunction<Q, E> && ContinuationEstimator<CE, E>
DualEvaluation upper_bound(const E& env, const Q& q, const CE& ce, int n, int delta,
                           std::uint64_t m_u, StreamKey outer_key, StreamKey inner_key,
                           const PolicyOptions& opts, int workers = 1) {
  if (m_u < 2) throw std::invalid_argument("upper_bound: need at least 2 outer paths");
  DualEvaluation out;
  out.outer_count = m_u;
  out.inner_count = ce.inner_count();
  out.sup_values.resize(m_u);

  const int n_workers = std::max(workers, 1);
  std::vector<Q> worker_q(static_cast<std::size_t>(n_workers), q);
  std::vector<CE> worker_ce(static_cast<std::size_t>(n_workers), ce);
  parallel_for(m_u, workers, [&](std::size_t i, int w) {
    const auto path = env.simulate(outer_key.child(i));
    const auto track = martingale_track(env, worker_q[w], worker_ce[w], path, n, delta,
                                        inner_key.child(i), opts);
    if (n == 1) {
      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k <= env.horizon(); ++k) {
        best = std::max(best, track.g[k] - track.m[0][k]);
      }
      out.sup_values[i] = best;
    } else {
      out.sup_values[i] =
          pathwise_sup(track.g, track.m, track.correction, n, delta, env.horizon());
    }
  });

  double sum = 0.0;
  for (double v : out.sup_values) sum += v;
  out.u_hat = sum / static_cast<double>(m_u);
  double ss = 0.0;
  for (double v : out.sup_values) ss += (v - out.u_hat) * (v - out.u_hat);
  out.sigma_u = std::sqrt(ss / static_cast<double>(m_u - 1));
  return out;
}

struct BoundsReport {
  double l_hat = 0.0;
  double sigma_l = 0.0;
  double u_hat = 0.0;
  double sigma_u = 0.0;
  double point_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double alpha = 0.05;
  std::uint64_t m_l = 0;
  std::uint64_t m_u = 0;
  std::uint64_t j_inner = 0;
  std::uint64_t seed_train = 0;
  std::uint64_t seed_eval = 0;
  double runtime_seconds = 0.0;
};

// Asymptotic two-sided (1-alpha) interval from the central limit theorem:
//   [L - z_{alpha/2} sigma_L / sqrt(M_L),  U + z_{alpha/2} sigma_U / sqrt(M_U)]
// with point estimate (L + U) / 2.
inline BoundsReport confidence_interval(const PolicyEvaluation& lower,
                                        const DualEvaluation& upper, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("confidence_interval: alpha must lie in (0,1)");
  }
  const double z = normal_quantile(1.0 - alpha / 2.0);
  BoundsReport r;
  r.l_hat = lower.l_hat;
  r.sigma_l = lower.sigma_l;
  r.u_hat = upper.u_hat;
  r.sigma_u = upper.sigma_u;
  r.point_estimate = 0.5 * (lower.l_hat + upper.u_hat);
  r.ci_low = lower.l_hat - z * lower.sigma_l / std::sqrt(static_cast<double>(lower.sample_count));
  r.ci_high = upper.u_hat + z * upper.sigma_u / std::sqrt(static_cast<double>(upper.outer_count));
  r.alpha = alpha;
  r.m_l = lower.sample_count;
  r.m_u = upper.outer_count;
  r.j_inner = upper.inner_count;
  return r;
}

}  // namespace qstop

#pragma once

// Exponential Gaussian Ornstein-Uhlenbeck market on the unit-step grid
// t = 0..steps, with independent coordinates:
//   log S_{t+1} = (1 - k) (log S_t - mu) + mu + sigma Z_t,  Z_t ~ N(0,1).
// Paths are stored as log prices; the payoff is the (max-)call
// (max_i S^i_t - K)^+, zero past the grid, with no discounting.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qstop/rng.hpp"

namespace qstop {

enum class PayoffKind { kSingleCall, kMaxCall };

struct MarketModel {
  int d = 1;
  double sigma = 0.5;
  double mean_reversion = 0.9;  // k
  double mu = 0.0;
  double s0 = 1.0;
  double strike = 1.0;
  int steps = 10;  // N; maturity T equals N on the unit grid
  PayoffKind payoff_kind = PayoffKind::kMaxCall;

  void validate() const {
    if (d < 1) throw std::invalid_argument("market: d must be >= 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("market: sigma must be >= 0");
    if (!(s0 > 0.0)) throw std::invalid_argument("market: s0 must be > 0");
    if (steps < 1) throw std::invalid_argument("market: steps must be >= 1");
    if (payoff_kind == PayoffKind::kSingleCall && d != 1) {
      throw std::invalid_argument("market: single_call payoff requires d == 1");
    }
  }
};

// A batch of simulated paths over absolute times t0..steps. Column t0 holds
// the common starting point of the batch.
class PathSet {
 public:
  PathSet(const MarketModel& model, int n_paths, int t0, std::uint64_t seed)
      : model_(model), n_paths_(n_paths), t0_(t0), seed_(seed),
        logp_(static_cast<std::size_t>(n_paths) * (model.steps - t0 + 1) * model.d) {
    if (n_paths < 1) throw std::invalid_argument("PathSet: count must be >= 1");
    if (t0 < 0 || t0 > model.steps) throw std::invalid_argument("PathSet: bad t0");
  }

  int n_paths() const { return n_paths_; }
  int t0() const { return t0_; }
  int steps() const { return model_.steps; }
  int n_times() const { return model_.steps - t0_ + 1; }
  int d() const { return model_.d; }
  std::uint64_t seed() const { return seed_; }
  const MarketModel& model() const { return model_; }

  double log_price(int p, int t, int i) const { return logp_[index(p, t, i)]; }
  double price(int p, int t, int i) const { return std::exp(logp_[index(p, t, i)]); }

  std::span<double> slot(int p, int t) {
    return {logp_.data() + index(p, t, 0), static_cast<std::size_t>(model_.d)};
  }
  std::span<const double> log_prices_at(int p, int t) const {
    return {logp_.data() + index(p, t, 0), static_cast<std::size_t>(model_.d)};
  }

 private:
  std::size_t index(int p, int t, int i) const {
    return (static_cast<std::size_t>(p) * n_times() + (t - t0_)) * model_.d + i;
  }

  MarketModel model_;
  int n_paths_;
  int t0_;
  std::uint64_t seed_;
  std::vector<double> logp_;
};

namespace detail {

// Advance one path from its column at time `from` to time `to`, drawing the
// innovation for step t from index t*d+i of the path stream.
inline void evolve_path(const MarketModel& m, PathSet& ps, int p, int from, int to,
                        StreamKey path_key) {
  const double k = m.mean_reversion;
  for (int t = from; t < to; ++t) {
    auto cur = ps.slot(p, t);
    auto nxt = ps.slot(p, t + 1);
    for (int i = 0; i < m.d; ++i) {
      const double z = normal_from(path_key, static_cast<std::uint64_t>(t) * m.d + i);
      nxt[i] = (1.0 - k) * (cur[i] - m.mu) + m.mu + m.sigma * z;
    }
  }
}

}  // namespace detail

inline PathSet simulate_paths(const MarketModel& model, int count, StreamKey key) {
  model.validate();
  PathSet ps(model, count, 0, key.key);
  const double l0 = std::log(model.s0);
  for (int p = 0; p < count; ++p) {
    auto start = ps.slot(p, 0);
    for (int i = 0; i < model.d; ++i) start[i] = l0;
    detail::evolve_path(model, ps, p, 0, model.steps, key.child(p));
  }
  return ps;
}

// Conditional continuation paths given the time-start_t prices; conditionally
// independent of each other and of anything simulated from other keys.
inline PathSet simulate_conditional(const MarketModel& model,
                                    std::span<const double> start_prices,
                                    int start_t, int count, StreamKey key) {
  model.validate();
  if (static_cast<int>(start_prices.size()) != model.d) {
    throw std::invalid_argument("simulate_conditional: start price width != d");
  }
  for (double s : start_prices) {
    if (!(s > 0.0)) throw std::invalid_argument("simulate_conditional: prices must be > 0");
  }
  PathSet ps(model, count, start_t, key.key);
  for (int p = 0; p < count; ++p) {
    auto start = ps.slot(p, start_t);
    for (int i = 0; i < model.d; ++i) start[i] = std::log(start_prices[i]);
    detail::evolve_path(model, ps, p, start_t, model.steps, key.child(p));
  }
  return ps;
}

inline double payoff_from_logs(const MarketModel& model, int t,
                               std::span<const double> log_prices) {
  if (t > model.steps) return 0.0;  // cemetery convention
  double best = log_prices[0];
  for (int i = 1; i < model.d; ++i) best = std::max(best, log_prices[i]);
  const double v = std::exp(best) - model.strike;
  return v > 0.0 ? v : 0.0;
}

inline double payoff(const MarketModel& model, int t, std::span<const double> prices) {
  if (t > model.steps) return 0.0;
  double best = prices[0];
  for (int i = 1; i < model.d; ++i) best = std::max(best, prices[i]);
  const double v = best - model.strike;
  return v > 0.0 ? v : 0.0;
}

// Binary path dump for cross-implementation diffing: three little-endian
// uint64 header fields {paths, times, d} followed by row-major prices.
inline void write_path_dump(const PathSet& ps, const std::string& file) {
  if (ps.t0() != 0) throw std::invalid_argument("write_path_dump: full paths only");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("write_path_dump: cannot open " + file);
  const std::uint64_t header[3] = {static_cast<std::uint64_t>(ps.n_paths()),
                                   static_cast<std::uint64_t>(ps.n_times()),
                                   static_cast<std::uint64_t>(ps.d())};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  std::vector<double> row(ps.d());
  for (int p = 0; p < ps.n_paths(); ++p) {
    for (int t = 0; t <= ps.steps(); ++t) {
      for (int i = 0; i < ps.d(); ++i) row[i] = ps.price(p, t, i);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(sizeof(double) * row.size()));
    }
  }
  if (!out) throw std::runtime_error("write_path_dump: write failed for " + file);
}

struct PathDump {
  std::uint64_t paths = 0, times = 0, d = 0;
  std::vector<double> prices;  // row-major (path, time, asset)
};

inline PathDump read_path_dump(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("read_path_dump: cannot open " + file);
  PathDump dump;
  std::uint64_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw std::runtime_error("read_path_dump: truncated header");
  dump.paths = header[0];
  dump.times = header[1];
  dump.d = header[2];
  dump.prices.resize(dump.paths * dump.times * dump.d);
  in.read(reinterpret_cast<char*>(dump.prices.data()),
          static_cast<std::streamsize>(sizeof(double) * dump.prices.size()));
  if (!in) throw std::runtime_error("read_path_dump: truncated payload");
  return dump;
}

}  // namespace qstop

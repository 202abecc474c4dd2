#pragma once

// Flat sectioned key-value configuration:
//
//   [market]
//   d = 3            # trailing comments are stripped
//   sigma = 0.5
//
// plus typed getters that name the missing or malformed key in the error.
// RunConfig assembles a full run (market or chain environment, rights,
// training, evaluation, seeds, outputs) and validates it up front.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qstop/bounds.hpp"
#include "qstop/chain.hpp"
#include "qstop/errors.hpp"
#include "qstop/market.hpp"
#include "qstop/train.hpp"

namespace qstop {

class ParsedConfig {
 public:
  static ParsedConfig parse_text(std::string text) {
    ParsedConfig cfg;
    cfg.raw_ = std::move(text);
    std::istringstream in(cfg.raw_);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']') {
          throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
        }
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        if (section.empty()) {
          throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
        }
        cfg.sections_[section];
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      }
      if (section.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": key outside a section");
      }
      cfg.sections_[section][key] = value;
    }
    return cfg;
  }

  static ParsedConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  bool has(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(k) > 0;
  }

  std::string get_string(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    if (it == sections_.end() || !it->second.count(k)) {
      throw ConfigError("missing config key " + s + "." + k);
    }
    return it->second.at(k);
  }
  std::string get_string_or(const std::string& s, const std::string& k,
                            const std::string& fallback) const {
    return has(s, k) ? get_string(s, k) : fallback;
  }

  double get_real(const std::string& s, const std::string& k) const {
    return parse_real(get_string(s, k), s, k);
  }
  double get_real_or(const std::string& s, const std::string& k, double fallback) const {
    return has(s, k) ? get_real(s, k) : fallback;
  }

  std::int64_t get_int(const std::string& s, const std::string& k) const {
    return parse_int(get_string(s, k), s, k);
  }
  std::int64_t get_int_or(const std::string& s, const std::string& k,
                          std::int64_t fallback) const {
    return has(s, k) ? get_int(s, k) : fallback;
  }

  bool get_bool_or(const std::string& s, const std::string& k, bool fallback) const {
    if (!has(s, k)) return fallback;
    const std::string v = get_string(s, k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key " + s + "." + k + ": expected a boolean, got '" + v + "'");
  }

  std::vector<double> get_reals(const std::string& s, const std::string& k) const {
    std::istringstream in(get_string(s, k));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_real(tok, s, k));
    if (out.empty()) throw ConfigError("config key " + s + "." + k + ": empty list");
    return out;
  }

  std::vector<int> get_ints(const std::string& s, const std::string& k) const {
    std::istringstream in(get_string(s, k));
    std::vector<int> out;
    std::string tok;
    while (in >> tok) out.push_back(static_cast<int>(parse_int(tok, s, k)));
    if (out.empty()) throw ConfigError("config key " + s + "." + k + ": empty list");
    return out;
  }

  const std::string& raw_text() const { return raw_; }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }
  static double parse_real(const std::string& v, const std::string& s, const std::string& k) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key " + s + "." + k + ": expected a number, got '" + v + "'");
    }
  }
  static std::int64_t parse_int(const std::string& v, const std::string& s,
                                const std::string& k) {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key " + s + "." + k + ": expected an integer, got '" + v + "'");
    }
  }

  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string raw_;
};

inline ChainSpec chain_from_config(const ParsedConfig& cfg) {
  ChainSpec spec;
  spec.n_states = static_cast<int>(cfg.get_int("chain", "states"));
  spec.steps = static_cast<int>(cfg.get_int("chain", "steps"));
  spec.rights = static_cast<int>(cfg.get_int("chain", "rights"));
  spec.delta = static_cast<int>(cfg.get_int("chain", "delta"));
  spec.initial_state = static_cast<int>(cfg.get_int_or("chain", "initial_state", 0));
  spec.transition = Matrix(spec.n_states, spec.n_states);
  for (int s = 0; s < spec.n_states; ++s) {
    const auto row = cfg.get_reals("chain", "transition_" + std::to_string(s));
    if (static_cast<int>(row.size()) != spec.n_states) {
      throw ConfigError("chain.transition_" + std::to_string(s) + ": expected " +
                        std::to_string(spec.n_states) + " entries");
    }
    for (int t = 0; t < spec.n_states; ++t) spec.transition(s, t) = row[t];
  }
  spec.payoff = Matrix(spec.steps + 1, spec.n_states);
  if (cfg.has("chain", "payoff")) {
    // One row for every time step.
    const auto row = cfg.get_reals("chain", "payoff");
    if (static_cast<int>(row.size()) != spec.n_states) {
      throw ConfigError("chain.payoff: expected " + std::to_string(spec.n_states) + " entries");
    }
    for (int k = 0; k <= spec.steps; ++k) {
      for (int s = 0; s < spec.n_states; ++s) spec.payoff(k, s) = row[s];
    }
  } else {
    for (int k = 0; k <= spec.steps; ++k) {
      const auto row = cfg.get_reals("chain", "payoff_" + std::to_string(k));
      if (static_cast<int>(row.size()) != spec.n_states) {
        throw ConfigError("chain.payoff_" + std::to_string(k) + ": expected " +
                          std::to_string(spec.n_states) + " entries");
      }
      for (int s = 0; s < spec.n_states; ++s) spec.payoff(k, s) = row[s];
    }
  }
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("chain section invalid: ") + e.what());
  }
  return spec;
}

enum class EnvKind { kMarket, kChain };

struct EvalConfig {
  std::uint64_t m_l = 20000;
  std::uint64_t m_u = 50;
  std::uint64_t j_inner = 1000;
  double alpha = 0.05;
};

struct OutputConfig {
  std::string checkpoint = "checkpoint.bin";
  std::string report = "report.json";
  std::string loss_trace;  // empty: skip
};

struct RunConfig {
  EnvKind env_kind = EnvKind::kMarket;
  MarketModel market;
  std::optional<ChainSpec> chain;
  int rights = 1;
  int delta = 1;
  TrainConfig training;
  EvalConfig eval;
  PolicyOptions policy;
  std::uint64_t seed_train = 1;
  std::uint64_t seed_eval = 2;
  int workers = 1;
  OutputConfig output;
  std::string raw_text;

  static RunConfig from_parsed(const ParsedConfig& cfg) {
    RunConfig rc;
    rc.raw_text = cfg.raw_text();

    const std::string env = cfg.get_string_or("run", "env", "market");
    if (env == "market") {
      rc.env_kind = EnvKind::kMarket;
    } else if (env == "chain") {
      rc.env_kind = EnvKind::kChain;
    } else {
      throw ConfigError("run.env: expected 'market' or 'chain', got '" + env + "'");
    }

    if (rc.env_kind == EnvKind::kMarket) {
      if (cfg.has("market", "correlation")) {
        throw ConfigError("market.correlation: correlated assets are not supported");
      }
      rc.market.d = static_cast<int>(cfg.get_int("market", "d"));
      rc.market.sigma = cfg.get_real("market", "sigma");
      rc.market.mean_reversion = cfg.get_real("market", "k");
      rc.market.mu = cfg.get_real_or("market", "mu", 0.0);
      rc.market.s0 = cfg.get_real_or("market", "s0", 1.0);
      rc.market.strike = cfg.get_real("market", "strike");
      rc.market.steps = static_cast<int>(cfg.get_int("market", "steps"));
      const std::string payoff = cfg.get_string_or("market", "payoff", "max_call");
      if (payoff == "max_call") {
        rc.market.payoff_kind = PayoffKind::kMaxCall;
      } else if (payoff == "single_call") {
        rc.market.payoff_kind = PayoffKind::kSingleCall;
      } else {
        throw ConfigError("market.payoff: expected 'max_call' or 'single_call'");
      }
      try {
        rc.market.validate();
      } catch (const std::exception& e) {
        throw ConfigError(std::string("market section invalid: ") + e.what());
      }
      rc.rights = static_cast<int>(cfg.get_int("rights", "n"));
      rc.delta = static_cast<int>(cfg.get_int("rights", "delta"));
    } else {
      rc.chain = chain_from_config(cfg);
      rc.rights = rc.chain->rights;
      rc.delta = rc.chain->delta;
    }
    if (rc.rights < 1) throw ConfigError("rights.n must be >= 1");
    if (rc.delta < 1) throw ConfigError("rights.delta must be >= 1");

    if (cfg.has("training", "hidden")) rc.training.hidden = cfg.get_ints("training", "hidden");
    rc.training.batch_size = static_cast<int>(cfg.get_int_or("training", "batch_size", 1000));
    rc.training.total_paths =
        static_cast<std::uint64_t>(cfg.get_int_or("training", "total_paths", 200000));
    rc.training.eps_start = cfg.get_real_or("training", "eps_start", 1.0);
    rc.training.eps_end = cfg.get_real_or("training", "eps_end", 0.05);
    rc.training.eps_decay_steps =
        static_cast<std::uint64_t>(cfg.get_int_or("training", "eps_decay_steps", 0));
    rc.training.target_sync_period =
        static_cast<std::uint64_t>(cfg.get_int_or("training", "target_sync_period", 500));
    rc.training.buffer_capacity =
        static_cast<std::size_t>(cfg.get_int_or("training", "buffer_capacity", 100000));
    rc.training.warmup = static_cast<std::size_t>(cfg.get_int_or("training", "warmup", 0));
    rc.training.grad_steps_per_episode =
        static_cast<int>(cfg.get_int_or("training", "grad_steps_per_episode", 1));
    rc.training.optimizer.lr = cfg.get_real_or("training", "lr", 1e-3);
    rc.training.optimizer.rho = cfg.get_real_or("training", "rho", 0.99);
    rc.training.optimizer.eps = cfg.get_real_or("training", "eps_num", 1e-8);
    try {
      rc.training.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("training section invalid: ") + e.what());
    }

    rc.eval.m_l = static_cast<std::uint64_t>(cfg.get_int_or("evaluation", "m_l", 20000));
    rc.eval.m_u = static_cast<std::uint64_t>(cfg.get_int_or("evaluation", "m_u", 50));
    rc.eval.j_inner = static_cast<std::uint64_t>(cfg.get_int_or("evaluation", "j_inner", 1000));
    rc.eval.alpha = cfg.get_real_or("evaluation", "alpha", 0.05);
    if (rc.eval.m_l < 2) throw ConfigError("evaluation.m_l must be >= 2");
    if (rc.eval.m_u < 2) throw ConfigError("evaluation.m_u must be >= 2");
    if (rc.eval.j_inner < 1) throw ConfigError("evaluation.j_inner must be >= 1");
    if (!(rc.eval.alpha > 0.0 && rc.eval.alpha < 1.0)) {
      throw ConfigError("evaluation.alpha must lie in (0,1)");
    }

    const std::string delayed = cfg.get_string_or("policy", "delayed_term", "q_head");
    if (delayed == "q_head") {
      rc.policy.delayed_term = DelayedTerm::kQHead;
    } else if (delayed == "realized_path") {
      rc.policy.delayed_term = DelayedTerm::kRealizedPath;
    } else {
      throw ConfigError("policy.delayed_term: expected 'q_head' or 'realized_path'");
    }
    rc.policy.strict_single = cfg.get_bool_or("policy", "strict_single", true);
    rc.policy.strict_multiple = cfg.get_bool_or("policy", "strict_multiple", false);

    rc.seed_train = static_cast<std::uint64_t>(cfg.get_int_or("seeds", "train", 1));
    rc.seed_eval = static_cast<std::uint64_t>(cfg.get_int_or("seeds", "eval", 2));
    if (rc.seed_train == rc.seed_eval) {
      throw ConfigError("seeds.train and seeds.eval must differ (evaluation paths must be "
                        "independent of training paths)");
    }

    rc.workers = static_cast<int>(cfg.get_int_or("run", "workers", 1));
    if (rc.workers < 1) throw ConfigError("run.workers must be >= 1");

    rc.output.checkpoint = cfg.get_string_or("output", "checkpoint", "checkpoint.bin");
    rc.output.report = cfg.get_string_or("output", "report", "report.json");
    rc.output.loss_trace = cfg.get_string_or("output", "loss_trace", "");
    return rc;
  }

  static RunConfig load(const std::string& path) {
    return from_parsed(ParsedConfig::parse_file(path));
  }
};

}  // namespace qstop

// Batch front door: `train` fits the Q-network and writes a checkpoint,
// `price` evaluates the lower/upper bounds and writes a report, `oracle`
// solves a finite chain exactly and writes its tables. Every run is fully
// described by a sectioned key-value config file; a few flags override it.

#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qstop/bounds.hpp"
#include "qstop/checkpoint.hpp"
#include "qstop/config.hpp"
#include "qstop/report.hpp"
#include "qstop/train.hpp"

namespace {

using namespace qstop;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCheckpoint = 3;
constexpr int kExitSizeGuard = 4;
constexpr int kExitIo = 5;

struct CommonArgs {
  std::string config_path;
  std::int64_t seed = -1;
  int workers = 0;
  std::string checkpoint_override;
  std::string report_override;
  bool train_first = false;
  std::string dump_paths;
  std::int64_t dump_count = 100;
};

void apply_overrides(RunConfig& rc, const CommonArgs& args) {
  std::string extra;
  if (args.seed >= 0) {
    rc.seed_train = static_cast<std::uint64_t>(args.seed);
    rc.seed_eval = static_cast<std::uint64_t>(args.seed) + 1;
    extra += "[seeds]\ntrain = " + std::to_string(rc.seed_train) +
             "\neval = " + std::to_string(rc.seed_eval) + "\n";
  }
  if (args.workers > 0) {
    rc.workers = args.workers;
    extra += "[run]\nworkers = " + std::to_string(rc.workers) + "\n";
  }
  if (!args.checkpoint_override.empty()) {
    rc.output.checkpoint = args.checkpoint_override;
    extra += "[output]\ncheckpoint = " + rc.output.checkpoint + "\n";
  }
  if (!args.report_override.empty()) {
    rc.output.report = args.report_override;
    extra += "[output]\nreport = " + rc.output.report + "\n";
  }
  if (!extra.empty()) rc.raw_text += "\n# command-line overrides\n" + extra;
}

void write_loss_trace(const TrainDiagnostics& diag, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open loss trace file: " + path);
  out << "step,loss\n";
  for (std::size_t i = 0; i < diag.loss_trace.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, diag.loss_trace[i]);
    out << buf;
  }
}

template <Environment E>
DenseNet train_and_save(const RunConfig& rc, const E& env) {
  auto [net, diag] = train(rc.training, env, rc.rights, rc.delta, rc.seed_train);
  save_checkpoint(net, rc.output.checkpoint);
  if (!rc.output.loss_trace.empty()) write_loss_trace(diag, rc.output.loss_trace);
  std::cout << "trained: episodes=" << diag.episodes
            << " experiences=" << diag.experiences
            << " gradient_steps=" << diag.gradient_steps
            << " target_syncs=" << diag.target_syncs
            << " final_epsilon=" << diag.final_epsilon;
  if (!diag.loss_trace.empty()) std::cout << " last_loss=" << diag.loss_trace.back();
  if (diag.soft_negative_q > 0) {
    std::cout << " (note: " << diag.soft_negative_q
              << " continue-head values below -0.05 at spot checks)";
  }
  std::cout << "\ncheckpoint: " << rc.output.checkpoint << "\n";
  return std::move(net);
}

template <Environment E>
int price_with_env(const RunConfig& rc, const E& env, const CommonArgs& args) {
  DenseNet net;
  if (args.train_first) {
    net = train_and_save(rc, env);
  } else {
    net = load_checkpoint(rc.output.checkpoint);
  }
  const int width = encoded_width(env.feature_count());
  if (!checkpoint_matches(net, width, rc.training.hidden, 2)) {
    throw CheckpointError("checkpoint architecture does not match the configuration (" +
                          rc.output.checkpoint + ")");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const StreamKey eval_root = StreamKey::from_seed(rc.seed_eval);
  NetQ<E> q(net, env, rc.rights);

  const auto lower = lower_bound(env, q, rc.rights, rc.delta, rc.eval.m_l,
                                 eval_root.child(eval_streams::kLowerPaths), rc.policy,
                                 rc.workers);
  const NestedEstimator<E, NetQ<E>> estimator(env, q, static_cast<int>(rc.eval.j_inner),
                                              rc.delta, rc.policy);
  const auto upper = upper_bound(env, q, estimator, rc.rights, rc.delta, rc.eval.m_u,
                                 eval_root.child(eval_streams::kUpperOuter),
                                 eval_root.child(eval_streams::kUpperInner), rc.policy,
                                 rc.workers);

  BoundsReport report = confidence_interval(lower, upper, rc.eval.alpha);
  report.seed_train = rc.seed_train;
  report.seed_eval = rc.seed_eval;
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  emit_report(report, rc.raw_text, rc.output.report);

  if (!args.dump_paths.empty()) {
    if constexpr (std::is_same_v<E, MarketEnv>) {
      const auto paths =
          simulate_paths(env.model(), static_cast<int>(args.dump_count),
                         eval_root.child(eval_streams::kPathDump));
      write_path_dump(paths, args.dump_paths);
      std::cout << "paths: " << args.dump_paths << "\n";
    } else {
      throw ConfigError("--dump-paths is only available for market runs");
    }
  }

  std::printf("l_hat=%.6f (sigma %.6f)  u_hat=%.6f (sigma %.6f)\n", report.l_hat,
              report.sigma_l, report.u_hat, report.sigma_u);
  std::printf("point_estimate=%.6f  ci=[%.6f, %.6f]  alpha=%g\n", report.point_estimate,
              report.ci_low, report.ci_high, report.alpha);
  std::cout << "report: " << rc.output.report << "\n";
  return kExitOk;
}

std::string tables_to_json(const ExactSolution& sol, const ChainSpec& spec,
                           const double* brute) {
  std::string out = "{\n";
  out += "  \"states\": " + std::to_string(spec.n_states) + ",\n";
  out += "  \"steps\": " + std::to_string(spec.steps) + ",\n";
  out += "  \"rights\": " + std::to_string(spec.rights) + ",\n";
  out += "  \"delta\": " + std::to_string(spec.delta) + ",\n";
  out += "  \"initial_state\": " + std::to_string(spec.initial_state) + ",\n";
  out += "  \"v0\": " + detail::format_real(sol.v0) + ",\n";
  if (brute != nullptr) {
    out += "  \"brute_force_v0\": " + detail::format_real(*brute) + ",\n";
  }
  auto table = [&](const char* name, const auto& t, auto format) {
    out += "  \"";
    out += name;
    out += "\": [";
    for (std::size_t nu = 0; nu < t.size(); ++nu) {
      out += nu == 0 ? "\n" : ",\n";
      out += "    [";
      for (std::size_t k = 0; k < t[nu].size(); ++k) {
        out += k == 0 ? "" : ", ";
        out += "[";
        for (std::size_t s = 0; s < t[nu][k].size(); ++s) {
          if (s > 0) out += ", ";
          out += format(t[nu][k][s]);
        }
        out += "]";
      }
      out += "]";
    }
    out += "\n  ]";
  };
  auto real_fmt = [](double v) { return detail::format_real(v); };
  auto int_fmt = [](int v) { return std::to_string(v); };
  table("q", sol.q, real_fmt);
  out += ",\n";
  table("q_delta", sol.q_delta, real_fmt);
  out += ",\n";
  table("y", sol.y, real_fmt);
  out += ",\n";
  table("action", sol.action, int_fmt);
  out += "\n}\n";
  return out;
}

int run_train(const CommonArgs& args) {
  RunConfig rc = RunConfig::load(args.config_path);
  apply_overrides(rc, args);
  if (rc.env_kind == EnvKind::kMarket) {
    train_and_save(rc, MarketEnv(rc.market));
  } else {
    train_and_save(rc, ChainEnv(*rc.chain));
  }
  return kExitOk;
}

int run_price(const CommonArgs& args) {
  RunConfig rc = RunConfig::load(args.config_path);
  apply_overrides(rc, args);
  if (rc.env_kind == EnvKind::kMarket) {
    return price_with_env(rc, MarketEnv(rc.market), args);
  }
  return price_with_env(rc, ChainEnv(*rc.chain), args);
}

int run_oracle(const CommonArgs& args, const std::string& out_path, bool brute) {
  const ParsedConfig cfg = ParsedConfig::parse_file(args.config_path);
  const ChainSpec spec = chain_from_config(cfg);
  const ExactSolution sol = solve_chain(spec);
  double brute_v0 = 0.0;
  if (brute) brute_v0 = brute_force_value(spec);
  const std::string json = tables_to_json(sol, spec, brute ? &brute_v0 : nullptr);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open output file: " + out_path);
  out << json;
  if (!out) throw std::runtime_error("write failed: " + out_path);
  std::printf("v0=%.12f", sol.v0);
  if (brute) std::printf("  brute_force_v0=%.12f", brute_v0);
  std::printf("\ntables: %s\n", out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-learning pricer for single- and multiple-exercise stopping problems"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string oracle_out = "oracle_tables.json";
  bool oracle_brute = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", args.config_path, "configuration file")->required();
    cmd->add_option("--seed", args.seed,
                    "override seeds: train = SEED, eval = SEED + 1");
    cmd->add_option("--workers", args.workers, "worker threads for evaluation phases");
  };

  CLI::App* cmd_train = app.add_subcommand("train", "train the Q-network, write a checkpoint");
  add_common(cmd_train);
  cmd_train->add_option("--checkpoint", args.checkpoint_override, "checkpoint output path");

  CLI::App* cmd_price = app.add_subcommand("price", "evaluate bounds, write a report");
  add_common(cmd_price);
  cmd_price->add_option("--checkpoint", args.checkpoint_override, "checkpoint path");
  cmd_price->add_option("--report", args.report_override, "report output path");
  cmd_price->add_flag("--train-first", args.train_first, "train before pricing");
  cmd_price->add_option("--dump-paths", args.dump_paths,
                        "dump evaluation paths to a binary file");
  cmd_price->add_option("--dump-count", args.dump_count, "number of paths to dump");

  CLI::App* cmd_oracle = app.add_subcommand("oracle", "solve a chain exactly, write tables");
  cmd_oracle->add_option("-c,--config", args.config_path, "configuration file")->required();
  cmd_oracle->add_option("-o,--out", oracle_out, "output path for the tables");
  cmd_oracle->add_flag("--brute-force", oracle_brute,
                       "cross-check against the brute-force value (small chains only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand(cmd_train)) return run_train(args);
    if (app.got_subcommand(cmd_price)) return run_price(args);
    return run_oracle(args, oracle_out, oracle_brute);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const SizeGuardError& e) {
    std::cerr << "size guard: " << e.what() << "\n";
    return kExitSizeGuard;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos ||
        what.find("write failed") != std::string::npos) {
      std::cerr << "i/o error: " << what << "\n";
      return kExitIo;
    }
    std::cerr << "error: " << what << "\n";
    return kExitOther;
  }
}

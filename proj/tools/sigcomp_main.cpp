#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sigcomp/checkpoint.hpp"
#include "sigcomp/errors.hpp"
#include "sigcomp/games.hpp"
#include "sigcomp/harness.hpp"
#include "sigcomp/metrics.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitPartial = 4;

using sigcomp::games::GameConfig;
using sigcomp::games::Regime;

std::string checkpoint_path(const std::string& out_dir, const std::string& regime,
                            std::uint64_t seed) {
  return out_dir + "/checkpoint-" + regime + "-" + std::to_string(seed) + ".ckpt";
}

int cmd_train(const std::string& regime_name, const std::string& config_path,
              std::uint64_t seed, const std::string& out_dir) {
  const Regime regime = sigcomp::games::parse_regime(regime_name);
  GameConfig config = sigcomp::harness::load_config_file(config_path);
  config.master_seed = seed;

  sigcomp::games::SeedOutcome outcome = sigcomp::games::run_seed(regime, config);

  std::filesystem::create_directories(out_dir);
  const std::string ckpt = checkpoint_path(out_dir, outcome.record.regime, seed);
  sigcomp::checkpoint::write_file(ckpt, outcome.checkpoint);
  {
    std::ofstream records(out_dir + "/records.jsonl", std::ios::app);
    if (!records) throw sigcomp::ConfigError("cannot open records.jsonl in " + out_dir);
    records << sigcomp::harness::record_to_json_line(outcome.record) << '\n';
  }

  std::printf("regime=%s seed=%llu epochs=%d train_both=%.4f test_both=%.4f "
              "test_avg=%.4f ci=%.4f topo=%.4f\n",
              outcome.record.regime.c_str(),
              static_cast<unsigned long long>(seed), outcome.record.epochs,
              outcome.record.final_train_acc_both,
              outcome.record.final_test_acc_both,
              outcome.record.final_test_acc_avg, outcome.record.ci,
              outcome.record.topo);
  std::printf("checkpoint: %s\n", ckpt.c_str());
  return kExitOk;
}

int cmd_sweep(const std::string& regimes_arg, const std::string& config_path,
              int n_seeds, int jobs, const std::string& out_dir,
              double max_seconds) {
  if (n_seeds < 1) throw sigcomp::ConfigError("--seeds must be >= 1");
  const GameConfig config = sigcomp::harness::load_config_file(config_path);

  std::vector<Regime> regimes;
  {
    std::stringstream ss(regimes_arg);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) regimes.push_back(sigcomp::games::parse_regime(name));
    }
  }
  if (regimes.empty()) throw sigcomp::ConfigError("--regimes list is empty");

  sigcomp::harness::AggregateReport combined;
  bool partial = false;
  for (const Regime regime : regimes) {
    sigcomp::harness::ExperimentSpec spec;
    spec.config = config;
    spec.regime = regime;
    for (int i = 0; i < n_seeds; ++i) {
      spec.seed_indices.push_back(static_cast<std::uint64_t>(i));
    }
    spec.out_dir = out_dir;
    spec.jobs = jobs;
    spec.max_seconds = max_seconds;

    const auto result = sigcomp::harness::run_experiment(spec);
    for (const auto& row : result.report.rows) combined.rows.push_back(row);
    for (const auto& failure : result.failures) {
      std::fprintf(stderr, "[%s] %s\n",
                   sigcomp::games::regime_name(regime).c_str(), failure.c_str());
    }
    partial = partial || result.report.partial;
  }
  combined.partial = partial;

  const std::string markdown =
      sigcomp::harness::render_report(combined, sigcomp::harness::ReportFormat::kMarkdown);
  std::fputs(markdown.c_str(), stdout);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir + "/report.md") << markdown;
    std::ofstream(out_dir + "/report.csv") << sigcomp::harness::render_report(
        combined, sigcomp::harness::ReportFormat::kCsv);
    std::ofstream(out_dir + "/report.json") << sigcomp::harness::render_report(
        combined, sigcomp::harness::ReportFormat::kJson);
  }
  return partial ? kExitPartial : kExitOk;
}

int cmd_dump_protocol(const std::string& checkpoint_file,
                      const std::string& format) {
  const auto entries = sigcomp::checkpoint::read_file(checkpoint_file);
  const auto run = sigcomp::games::load_run(entries);
  const auto protocol = sigcomp::games::protocol_from_loaded(run);
  sigcomp::core::AttributeSpace space;
  space.n_colors = run.n_colors;
  space.n_shapes = run.n_shapes;
  if (format == "csv") {
    std::fputs(sigcomp::metrics::write_protocol_file(protocol).c_str(), stdout);
  } else if (format == "text") {
    std::fputs(sigcomp::metrics::render_protocol_text(protocol, space).c_str(),
               stdout);
  } else {
    throw sigcomp::ConfigError("--format must be csv or text");
  }
  return kExitOk;
}

int cmd_metrics(const std::string& protocol_path) {
  const auto protocol = sigcomp::metrics::read_protocol_path(protocol_path);
  int vocab = 1;
  for (const auto& m : protocol.table) {
    for (int s : m.symbols) vocab = std::max(vocab, s + 1);
  }
  const auto topo = sigcomp::metrics::topographic_similarity(protocol);
  const double ci = sigcomp::metrics::context_independence(protocol, vocab);
  std::printf("topo = %.6f%s\n", topo.value,
              topo.degenerate ? " (degenerate)" : "");
  std::printf("ci = %.6f\n", ci);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_file, const std::string& config_path) {
  const GameConfig config = sigcomp::harness::load_config_file(config_path);
  const auto entries = sigcomp::checkpoint::read_file(checkpoint_file);
  const auto run = sigcomp::games::load_run(entries);

  const auto dataset = sigcomp::core::build_dataset(config.space);
  if (static_cast<int>(dataset.front().observation.size()) != run.obs_dim) {
    throw sigcomp::ConfigError(
        "config observation dim does not match the checkpoint");
  }
  const auto split = sigcomp::core::diagonal_split(dataset, config.space);
  const auto acc = sigcomp::metrics::zero_shot_eval(
      sigcomp::games::loaded_sender_fn(run), *run.receiver, split);
  std::printf("train_both = %.6f\n", acc.train_both);
  std::printf("test_both = %.6f\n", acc.test_both);
  std::printf("test_avg = %.6f\n", acc.test_avg);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lewis signaling game experiments with compositionality metrics"};
  app.require_subcommand(1);

  std::string regime = "baseline";
  std::string config_path;
  std::string out_dir = "runs";
  std::string checkpoint_file;
  std::string protocol_path;
  std::string format = "text";
  std::string regimes = "random,baseline,template-transfer,obverter";
  std::uint64_t seed = 0;
  int n_seeds = 10;
  int jobs = 1;
  double max_seconds = 0.0;

  auto* train = app.add_subcommand("train", "Train one seed of one regime");
  train->add_option("--regime", regime,
                    "random|baseline|template-transfer|obverter")->required();
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--seed", seed, "Run seed")->required();
  train->add_option("--out", out_dir, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Multi-seed, multi-regime sweep");
  sweep->add_option("--regimes", regimes, "Comma-separated regime list");
  sweep->add_option("--config", config_path, "Config file")->required();
  sweep->add_option("--seeds", n_seeds, "Number of seeds");
  sweep->add_option("--jobs", jobs, "Worker threads");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--max-seconds", max_seconds, "Wall-clock budget (0 = off)");

  auto* dump = app.add_subcommand("dump-protocol",
                                  "Print a checkpoint's protocol table");
  dump->add_option("--checkpoint", checkpoint_file, "Checkpoint file")->required();
  dump->add_option("--format", format, "csv|text");

  auto* metrics_cmd = app.add_subcommand("metrics",
                                         "Topo and CI for a protocol file");
  metrics_cmd->add_option("--protocol", protocol_path, "Protocol file")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Zero-shot accuracies of a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_file, "Checkpoint file")->required();
  eval_cmd->add_option("--config", config_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(regime, config_path, seed, out_dir);
    if (sweep->parsed()) {
      return cmd_sweep(regimes, config_path, n_seeds, jobs, out_dir, max_seconds);
    }
    if (dump->parsed()) return cmd_dump_protocol(checkpoint_file, format);
    if (metrics_cmd->parsed()) return cmd_metrics(protocol_path);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_file, config_path);
  } catch (const sigcomp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const sigcomp::IngestError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitConfig;
  } catch (const sigcomp::NumericsError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const sigcomp::PretrainTimeout& e) {
    std::fprintf(stderr, "training failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}

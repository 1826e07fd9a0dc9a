#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sigcomp/games.hpp"
#include "sigcomp/protocol.hpp"

namespace sigcomp::harness {

struct ExperimentSpec {
  games::GameConfig config;
  games::Regime regime = games::Regime::kBaseline;
  // Seed indices; each run's rng seed is derive_child_seed(master, index).
  std::vector<std::uint64_t> seed_indices;
  std::string out_dir;  // empty disables persistence
  int jobs = 1;
  double max_seconds = 0.0;  // 0 = unlimited

  void validate() const;
};

struct RegimeStats {
  std::string regime;
  int completed = 0;
  int requested = 0;
  double mean_train_both = 0.0, std_train_both = 0.0;
  double mean_test_both = 0.0, std_test_both = 0.0;
  double mean_test_avg = 0.0, std_test_avg = 0.0;
  double mean_ci = 0.0, std_ci = 0.0;
  double mean_topo = 0.0, std_topo = 0.0;

  bool incomplete() const { return completed < requested; }
};

struct AggregateReport {
  std::vector<RegimeStats> rows;
  bool partial = false;
};

// Sample mean and n-1 standard deviation per metric. DomainError on an empty
// list or mixed regimes/config hashes.
RegimeStats aggregate(const std::vector<games::RunRecord>& records);

enum class ReportFormat { kMarkdown, kCsv, kJson };

std::string render_report(const AggregateReport& report, ReportFormat format);
AggregateReport parse_report_csv(const std::string& text);

struct ExperimentResult {
  AggregateReport report;  // one row
  std::vector<games::RunRecord> records;
  std::vector<TrainedProtocol> protocols;  // aligned with records
  std::vector<std::string> failures;       // messages for failed seeds
};

// Runs every requested seed of one regime (optionally on a small worker
// pool), appends records to <out_dir>/records.jsonl in seed order, and
// aggregates the completed runs.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// --- RunRecord persistence ----------------------------------------------------

std::vector<double> decimate_trace(const std::vector<double>& trace,
                                   std::size_t cap = 200);
std::string record_to_json_line(const games::RunRecord& record);
games::RunRecord record_from_json_line(const std::string& line);

// --- Config files ---------------------------------------------------------------

// Flat "key = value" lines with '#' comments. Unknown keys are rejected.
games::GameConfig parse_config_text(const std::string& text);
games::GameConfig load_config_file(const std::string& path);

}  // namespace sigcomp::harness

#include "sigcomp/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sigcomp/errors.hpp"
#include "sigcomp/rng.hpp"

namespace sigcomp::harness {

using nlohmann::json;

void ExperimentSpec::validate() const {
  config.validate();
  if (seed_indices.empty()) throw ConfigError("seed list must be non-empty");
  std::set<std::uint64_t> unique(seed_indices.begin(), seed_indices.end());
  if (unique.size() != seed_indices.size()) {
    throw ConfigError("seed list contains duplicates");
  }
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (max_seconds < 0.0) throw ConfigError("max_seconds must be >= 0");
}

// --- Aggregation -----------------------------------------------------------------

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& std_dev) {
  const double n = static_cast<double>(xs.size());
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) {
    std_dev = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  std_dev = std::sqrt(ss / (n - 1.0));
}

}  // namespace

RegimeStats aggregate(const std::vector<games::RunRecord>& records) {
  if (records.empty()) throw DomainError("aggregate: no records");
  for (const auto& r : records) {
    if (r.regime != records.front().regime ||
        r.config_hash != records.front().config_hash) {
      throw DomainError("aggregate: records mix regimes or config hashes");
    }
  }
  RegimeStats stats;
  stats.regime = records.front().regime;
  stats.completed = static_cast<int>(records.size());
  stats.requested = stats.completed;

  std::vector<double> train_both, test_both, test_avg, ci, topo;
  for (const auto& r : records) {
    train_both.push_back(r.final_train_acc_both);
    test_both.push_back(r.final_test_acc_both);
    test_avg.push_back(r.final_test_acc_avg);
    ci.push_back(r.ci);
    topo.push_back(r.topo);
  }
  mean_std(train_both, stats.mean_train_both, stats.std_train_both);
  mean_std(test_both, stats.mean_test_both, stats.std_test_both);
  mean_std(test_avg, stats.mean_test_avg, stats.std_test_avg);
  mean_std(ci, stats.mean_ci, stats.std_ci);
  mean_std(topo, stats.mean_topo, stats.std_topo);
  return stats;
}

// --- Report rendering ---------------------------------------------------------------

namespace {

std::string cell(double mean, double std_dev) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f (± %.2f)", mean, std_dev);
  return buf;
}

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json row_to_json(const RegimeStats& row) {
  return json{{"regime", row.regime},
              {"completed", row.completed},
              {"requested", row.requested},
              {"train_both", {{"mean", row.mean_train_both}, {"std", row.std_train_both}}},
              {"test_both", {{"mean", row.mean_test_both}, {"std", row.std_test_both}}},
              {"test_avg", {{"mean", row.mean_test_avg}, {"std", row.std_test_avg}}},
              {"ci", {{"mean", row.mean_ci}, {"std", row.std_ci}}},
              {"topo", {{"mean", row.mean_topo}, {"std", row.std_topo}}}};
}

}  // namespace

std::string render_report(const AggregateReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kMarkdown: {
      std::ostringstream out;
      out << "| Model | Train (both) | Test (both) | Test (avg) | CI | Topo |\n";
      out << "|---|---|---|---|---|---|\n";
      for (const auto& row : report.rows) {
        std::string name = row.regime;
        if (row.incomplete()) {
          name += " [" + std::to_string(row.completed) + "/" +
                  std::to_string(row.requested) + " seeds]";
        }
        out << "| " << name << " | " << cell(row.mean_train_both, row.std_train_both)
            << " | " << cell(row.mean_test_both, row.std_test_both) << " | "
            << cell(row.mean_test_avg, row.std_test_avg) << " | "
            << cell(row.mean_ci, row.std_ci) << " | "
            << cell(row.mean_topo, row.std_topo) << " |\n";
      }
      if (report.partial) out << "\n(partial sweep)\n";
      return out.str();
    }
    case ReportFormat::kCsv: {
      std::ostringstream out;
      out << "regime,completed,requested,train_both_mean,train_both_std,"
             "test_both_mean,test_both_std,test_avg_mean,test_avg_std,"
             "ci_mean,ci_std,topo_mean,topo_std\n";
      for (const auto& row : report.rows) {
        out << row.regime << ',' << row.completed << ',' << row.requested << ','
            << full(row.mean_train_both) << ',' << full(row.std_train_both) << ','
            << full(row.mean_test_both) << ',' << full(row.std_test_both) << ','
            << full(row.mean_test_avg) << ',' << full(row.std_test_avg) << ','
            << full(row.mean_ci) << ',' << full(row.std_ci) << ','
            << full(row.mean_topo) << ',' << full(row.std_topo) << '\n';
      }
      return out.str();
    }
    case ReportFormat::kJson: {
      json out;
      out["partial"] = report.partial;
      out["rows"] = json::array();
      for (const auto& row : report.rows) out["rows"].push_back(row_to_json(row));
      return out.dump(2) + "\n";
    }
  }
  return {};
}

AggregateReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty report csv");
  AggregateReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 13) throw IngestError("report csv row must have 13 fields");
    RegimeStats row;
    row.regime = fields[0];
    try {
      row.completed = std::stoi(fields[1]);
      row.requested = std::stoi(fields[2]);
      row.mean_train_both = std::stod(fields[3]);
      row.std_train_both = std::stod(fields[4]);
      row.mean_test_both = std::stod(fields[5]);
      row.std_test_both = std::stod(fields[6]);
      row.mean_test_avg = std::stod(fields[7]);
      row.std_test_avg = std::stod(fields[8]);
      row.mean_ci = std::stod(fields[9]);
      row.std_ci = std::stod(fields[10]);
      row.mean_topo = std::stod(fields[11]);
      row.std_topo = std::stod(fields[12]);
    } catch (const std::exception&) {
      throw IngestError("malformed report csv row: " + line);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// --- RunRecord persistence -----------------------------------------------------------

std::vector<double> decimate_trace(const std::vector<double>& trace,
                                   std::size_t cap) {
  if (trace.size() <= cap || cap == 0) return trace;
  const std::size_t stride = (trace.size() + cap - 1) / cap;
  std::vector<double> out;
  out.reserve(cap);
  for (std::size_t i = 0; i < trace.size(); i += stride) out.push_back(trace[i]);
  return out;
}

std::string record_to_json_line(const games::RunRecord& record) {
  json j;
  j["regime"] = record.regime;
  j["seed"] = record.seed;
  j["config_hash"] = record.config_hash;
  j["epochs"] = record.epochs;
  j["final_train_acc_both"] = record.final_train_acc_both;
  j["final_test_acc_both"] = record.final_test_acc_both;
  j["final_test_acc_avg"] = record.final_test_acc_avg;
  j["ci"] = record.ci;
  j["topo"] = record.topo;
  j["topo_degenerate"] = record.topo_degenerate;
  j["wall_ms"] = record.wall_ms;
  j["loss_trace"] = decimate_trace(record.loss_trace);
  return j.dump();
}

games::RunRecord record_from_json_line(const std::string& line) {
  games::RunRecord record;
  try {
    const json j = json::parse(line);
    record.regime = j.at("regime").get<std::string>();
    record.seed = j.at("seed").get<std::uint64_t>();
    record.config_hash = j.at("config_hash").get<std::uint64_t>();
    record.epochs = j.at("epochs").get<int>();
    record.final_train_acc_both = j.at("final_train_acc_both").get<double>();
    record.final_test_acc_both = j.at("final_test_acc_both").get<double>();
    record.final_test_acc_avg = j.at("final_test_acc_avg").get<double>();
    record.ci = j.at("ci").get<double>();
    record.topo = j.at("topo").get<double>();
    record.topo_degenerate = j.at("topo_degenerate").get<bool>();
    record.wall_ms = j.at("wall_ms").get<double>();
    record.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw IngestError(std::string("bad record line: ") + e.what());
  }
  return record;
}

// --- Experiment driver -----------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::size_t n = spec.seed_indices.size();

  struct Slot {
    std::optional<games::SeedOutcome> outcome;
    std::string failure;
  };
  std::vector<Slot> slots(n);

  const auto deadline =
      spec.max_seconds > 0.0
          ? std::optional(std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(spec.max_seconds)))
          : std::nullopt;
  std::atomic<bool> out_of_time{false};
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      if (deadline && std::chrono::steady_clock::now() >= *deadline) {
        out_of_time.store(true);
        slots[i].failure = "skipped: wall-clock budget exhausted";
        continue;
      }
      games::GameConfig config = spec.config;
      config.master_seed =
          derive_child_seed(spec.config.master_seed, spec.seed_indices[i]);
      try {
        slots[i].outcome = games::run_seed(spec.regime, config);
      } catch (const std::exception& e) {
        slots[i].failure = e.what();
      }
    }
  };

  const int workers = std::min<int>(spec.jobs, static_cast<int>(n));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i].outcome) {
      result.records.push_back(slots[i].outcome->record);
      result.protocols.push_back(slots[i].outcome->protocol);
    } else {
      result.failures.push_back("seed index " +
                                std::to_string(spec.seed_indices[i]) + ": " +
                                slots[i].failure);
    }
  }

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    std::ofstream out(spec.out_dir + "/records.jsonl", std::ios::app);
    if (!out) throw ConfigError("cannot open records.jsonl in " + spec.out_dir);
    for (const auto& record : result.records) {
      out << record_to_json_line(record) << '\n';
    }
  }

  if (!result.records.empty()) {
    RegimeStats row = aggregate(result.records);
    row.requested = static_cast<int>(n);
    result.report.rows.push_back(row);
  }
  result.report.partial = !result.failures.empty() || out_of_time.load();
  return result;
}

// --- Config files -------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return {};
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects an integer, got: " + v);
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects a number, got: " + v);
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " expects an unsigned integer, got: " + v);
  }
}

}  // namespace

games::GameConfig parse_config_text(const std::string& text) {
  games::GameConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not key = value: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "n_colors") config.space.n_colors = to_int(value, key);
    else if (key == "n_shapes") config.space.n_shapes = to_int(value, key);
    else if (key == "encoding") {
      if (value == "onehot") {
        config.space.encoding.kind = core::EncodingKind::kOneHotDisentangled;
      } else if (value == "entangled") {
        config.space.encoding.kind = core::EncodingKind::kEntangledProjection;
      } else if (value == "precomputed") {
        config.space.encoding.kind = core::EncodingKind::kPrecomputedEmbedding;
      } else {
        throw ConfigError("unknown encoding: " + value);
      }
    } else if (key == "encoding_dim") config.space.encoding.dim = to_int(value, key);
    else if (key == "encoding_seed") config.space.encoding.seed = to_u64(value, key);
    else if (key == "encoding_path") config.space.encoding.path = value;
    else if (key == "vocab_size") config.vocab_size = to_int(value, key);
    else if (key == "message_length") config.message_length = to_int(value, key);
    else if (key == "batch_size") config.batch_size = to_int(value, key);
    else if (key == "hidden_dim") config.hidden_dim = to_int(value, key);
    else if (key == "embed_dim") config.embed_dim = to_int(value, key);
    else if (key == "lr_pretrain") config.lr.pretrain_all = to_double(value, key);
    else if (key == "lr_sender") config.lr.sender_phase2 = to_double(value, key);
    else if (key == "lr_receiver") config.lr.receiver_phase2 = to_double(value, key);
    else if (key == "lr_obverter_receiver") config.lr.obverter_receiver = to_double(value, key);
    else if (key == "pretrain_threshold") config.pretrain_threshold = to_double(value, key);
    else if (key == "max_epochs") config.max_epochs = to_int(value, key);
    else if (key == "max_epochs_obverter") config.max_epochs_obverter = to_int(value, key);
    else if (key == "master_seed") config.master_seed = to_u64(value, key);
    else throw ConfigError("unknown config key: " + key);
  }
  config.validate();
  return config;
}

games::GameConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace sigcomp::harness

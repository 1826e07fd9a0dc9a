#include "sigcomp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sigcomp/errors.hpp"

namespace sigcomp::metrics {

int levenshtein(std::span<const int> a, std::span<const int> b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<int> prev(n + 1), curr(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    curr[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] != b[j - 1] ? 1 : 0);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return prev[n];
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

SpearmanResult spearman_rho(std::span<const double> x,
                            std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman_rho: length mismatch");
  if (x.size() < 2) throw ShapeError("spearman_rho: need at least 2 samples");

  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

PairDistances pair_distances(const TrainedProtocol& protocol) {
  PairDistances out;
  const int n = protocol.n_colors * protocol.n_shapes;
  out.target.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  out.message.reserve(out.target.capacity());
  for (int i = 0; i < n; ++i) {
    const int c1 = i / protocol.n_shapes;
    const int s1 = i % protocol.n_shapes;
    // Shapes offset past the color alphabet so the two attribute slots can
    // never cross-match in an alignment.
    const std::array<int, 2> t1{c1, protocol.n_colors + s1};
    for (int j = i + 1; j < n; ++j) {
      const int c2 = j / protocol.n_shapes;
      const int s2 = j % protocol.n_shapes;
      const std::array<int, 2> t2{c2, protocol.n_colors + s2};
      out.target.push_back(levenshtein(t1, t2));
      out.message.push_back(
          levenshtein(protocol.table[static_cast<std::size_t>(i)].symbols,
                      protocol.table[static_cast<std::size_t>(j)].symbols));
    }
  }
  return out;
}

SpearmanResult topographic_similarity(const TrainedProtocol& protocol) {
  if (protocol.table.size() !=
      static_cast<std::size_t>(protocol.n_colors * protocol.n_shapes)) {
    throw DomainError("topographic_similarity: protocol table incomplete");
  }
  const PairDistances d = pair_distances(protocol);
  return spearman_rho(d.target, d.message);
}

ConceptStats concept_stats(const TrainedProtocol& protocol, int vocab_size) {
  ConceptStats stats;
  stats.vocab_size = vocab_size;
  stats.n_concepts = protocol.n_colors + protocol.n_shapes;
  stats.counts = Matrix::Zero(vocab_size, stats.n_concepts);
  for (int c = 0; c < protocol.n_colors; ++c) {
    for (int s = 0; s < protocol.n_shapes; ++s) {
      for (int v : protocol.at(c, s).symbols) {
        if (v < 0 || v >= vocab_size) {
          throw DomainError("concept_stats: symbol out of vocabulary");
        }
        stats.counts(v, c) += 1.0;
        stats.counts(v, protocol.n_colors + s) += 1.0;
      }
    }
  }
  return stats;
}

double ConceptStats::p_symbol_given_concept(int v, int k) const {
  const double total = counts.col(k).sum();
  return total > 0.0 ? counts(v, k) / total : 0.0;
}

double ConceptStats::p_concept_given_symbol(int k, int v) const {
  const double total = counts.row(v).sum();
  return total > 0.0 ? counts(v, k) / total : 0.0;
}

double context_independence(const TrainedProtocol& protocol, int vocab_size) {
  const ConceptStats stats = concept_stats(protocol, vocab_size);
  double sum = 0.0;
  for (int k = 0; k < stats.n_concepts; ++k) {
    int best_symbol = 0;
    double best_p = -1.0;
    for (int v = 0; v < vocab_size; ++v) {
      const double p = stats.p_concept_given_symbol(k, v);
      if (p > best_p) {
        best_p = p;
        best_symbol = v;
      }
    }
    sum += stats.p_symbol_given_concept(best_symbol, k) * best_p;
  }
  return sum / static_cast<double>(stats.n_concepts);
}

ZeroShotAccuracy zero_shot_eval(const DeterministicSender& sender,
                                const agents::ReceiverAgent& receiver,
                                const core::DatasetSplit& split) {
  auto evaluate = [&](const std::vector<core::ObjectInstance>& instances,
                      double& both, double& avg) {
    if (instances.empty()) {
      both = 0.0;
      avg = 0.0;
      return;
    }
    int hit_both = 0, hit_color = 0, hit_shape = 0;
    for (const auto& inst : instances) {
      const agents::Message m = sender(inst);
      const auto [color_lp, shape_lp] = receiver_eval(receiver, m);
      Index c = 0, s = 0;
      color_lp.maxCoeff(&c);
      shape_lp.maxCoeff(&s);
      const bool color_ok = static_cast<int>(c) == inst.color;
      const bool shape_ok = static_cast<int>(s) == inst.shape;
      hit_color += color_ok;
      hit_shape += shape_ok;
      hit_both += color_ok && shape_ok;
    }
    const double n = static_cast<double>(instances.size());
    both = hit_both / n;
    avg = 0.5 * (hit_color / n + hit_shape / n);
  };

  ZeroShotAccuracy acc;
  double train_avg = 0.0;
  evaluate(split.train, acc.train_both, train_avg);
  evaluate(split.test, acc.test_both, acc.test_avg);
  return acc;
}

// --- Protocol file and renderings --------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

int parse_int(const std::string& s, const char* what) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw IngestError(std::string("malformed ") + what + ": " + s);
  }
}

}  // namespace

std::string write_protocol_file(const TrainedProtocol& protocol) {
  std::ostringstream out;
  out << protocol.n_colors << ',' << protocol.n_shapes << ','
      << protocol.message_length << '\n';
  for (int c = 0; c < protocol.n_colors; ++c) {
    for (int s = 0; s < protocol.n_shapes; ++s) {
      out << c << ',' << s;
      for (int sym : protocol.at(c, s).symbols) out << ',' << sym;
      out << '\n';
    }
  }
  return out.str();
}

TrainedProtocol read_protocol_file(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty protocol file");
  const auto header = split_fields(line, ',');
  if (header.size() != 3) {
    throw IngestError("protocol header must be n_colors,n_shapes,T");
  }
  TrainedProtocol protocol;
  protocol.n_colors = parse_int(header[0], "protocol header");
  protocol.n_shapes = parse_int(header[1], "protocol header");
  protocol.message_length = parse_int(header[2], "protocol header");
  if (protocol.n_colors < 1 || protocol.n_shapes < 1 ||
      protocol.message_length < 1) {
    throw IngestError("protocol header values must be positive");
  }
  const std::size_t cells =
      static_cast<std::size_t>(protocol.n_colors * protocol.n_shapes);
  protocol.table.assign(cells, {});
  std::vector<bool> seen(cells, false);
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != static_cast<std::size_t>(protocol.message_length) + 2) {
      throw IngestError("protocol row has wrong field count: " + line);
    }
    const int c = parse_int(fields[0], "protocol row");
    const int s = parse_int(fields[1], "protocol row");
    if (c < 0 || c >= protocol.n_colors || s < 0 || s >= protocol.n_shapes) {
      throw IngestError("protocol row indices out of range: " + line);
    }
    const std::size_t slot = static_cast<std::size_t>(c * protocol.n_shapes + s);
    if (seen[slot]) throw IngestError("duplicate protocol row: " + line);
    agents::Message m;
    for (int t = 0; t < protocol.message_length; ++t) {
      m.symbols.push_back(parse_int(fields[static_cast<std::size_t>(t) + 2],
                                    "protocol symbol"));
    }
    protocol.table[slot] = std::move(m);
    seen[slot] = true;
    ++count;
  }
  if (count != cells) throw IngestError("protocol file does not cover every pair");
  return protocol;
}

TrainedProtocol read_protocol_path(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open protocol file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return read_protocol_file(buffer.str());
}

namespace {

std::string message_to_string(const agents::Message& m) {
  std::string out;
  for (std::size_t i = 0; i < m.symbols.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(m.symbols[i]);
  }
  return out;
}

}  // namespace

std::string render_protocol_csv(const TrainedProtocol& protocol,
                                const core::AttributeSpace& space) {
  std::ostringstream out;
  out << "color\\shape";
  for (int s = 0; s < protocol.n_shapes; ++s) out << ",s" << s;
  out << '\n';
  for (int c = 0; c < protocol.n_colors; ++c) {
    out << 'c' << c;
    for (int s = 0; s < protocol.n_shapes; ++s) {
      const std::string cell = message_to_string(protocol.at(c, s));
      out << ',' << (core::is_held_out(c, s, space) ? "[" + cell + "]" : cell);
    }
    out << '\n';
  }
  return out.str();
}

std::string render_protocol_text(const TrainedProtocol& protocol,
                                 const core::AttributeSpace& space) {
  // Column width: longest message plus the held-out star.
  std::size_t width = 6;
  for (const auto& m : protocol.table) {
    width = std::max(width, message_to_string(m).size() + 1);
  }
  std::ostringstream out;
  out << "held-out cells marked *\n";
  char head[32];
  std::snprintf(head, sizeof(head), "%-8s", "");
  out << head;
  for (int s = 0; s < protocol.n_shapes; ++s) {
    std::snprintf(head, sizeof(head), " %-*s", static_cast<int>(width),
                  ("s" + std::to_string(s)).c_str());
    out << head;
  }
  out << '\n';
  for (int c = 0; c < protocol.n_colors; ++c) {
    std::snprintf(head, sizeof(head), "%-8s", ("c" + std::to_string(c)).c_str());
    out << head;
    for (int s = 0; s < protocol.n_shapes; ++s) {
      std::string cell = message_to_string(protocol.at(c, s));
      if (core::is_held_out(c, s, space)) cell += '*';
      std::snprintf(head, sizeof(head), " %-*s", static_cast<int>(width),
                    cell.c_str());
      out << head;
    }
    out << '\n';
  }
  return out.str();
}

TrainedProtocol parse_protocol_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty protocol grid");
  const auto header = split_fields(line, ',');
  if (header.size() < 2) throw IngestError("protocol grid header too short");
  TrainedProtocol protocol;
  protocol.n_shapes = static_cast<int>(header.size()) - 1;

  std::vector<std::vector<agents::Message>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != header.size()) {
      throw IngestError("protocol grid row width mismatch: " + line);
    }
    std::vector<agents::Message> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::string cell = fields[i];
      if (!cell.empty() && cell.front() == '[' && cell.back() == ']') {
        cell = cell.substr(1, cell.size() - 2);
      }
      agents::Message m;
      for (const auto& tok : split_fields(cell, ' ')) {
        if (tok.empty()) continue;
        m.symbols.push_back(parse_int(tok, "protocol grid symbol"));
      }
      if (m.symbols.empty()) throw IngestError("empty protocol grid cell");
      row.push_back(std::move(m));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestError("protocol grid has no rows");
  protocol.n_colors = static_cast<int>(rows.size());
  protocol.message_length = static_cast<int>(rows[0][0].symbols.size());
  for (const auto& row : rows) {
    for (const auto& m : row) {
      if (static_cast<int>(m.symbols.size()) != protocol.message_length) {
        throw IngestError("protocol grid has ragged message lengths");
      }
      protocol.table.push_back(m);
    }
  }
  return protocol;
}

}  // namespace sigcomp::metrics

#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sigcomp/agents.hpp"
#include "sigcomp/core.hpp"
#include "sigcomp/protocol.hpp"
#include "sigcomp/types.hpp"

namespace sigcomp::metrics {

// Unit-cost edit distance (insert / delete / substitute).
int levenshtein(std::span<const int> a, std::span<const int> b);

struct SpearmanResult {
  double value = 0.0;
  // Set when either rank vector has zero variance; value is reported as 0.
  bool degenerate = false;
};

// Rank correlation with average ranks for ties.
SpearmanResult spearman_rho(std::span<const double> x,
                            std::span<const double> y);

// Pairwise target/message distances over every unordered object pair.
struct PairDistances {
  std::vector<double> target;   // Levenshtein on (color, shape) tuples
  std::vector<double> message;  // Levenshtein on messages
};

PairDistances pair_distances(const TrainedProtocol& protocol);

// Spearman correlation between target-space and message-space distances.
SpearmanResult topographic_similarity(const TrainedProtocol& protocol);

// Symbol/concept co-occurrence counts. Every token of every message counts
// once toward its object's color and once toward its object's shape; p(v|k)
// normalizes over tokens emitted for objects with property k, p(k|v) over all
// concept co-occurrences of token v.
struct ConceptStats {
  int vocab_size = 0;
  int n_concepts = 0;  // colors then shapes
  Matrix counts;       // vocab x concepts

  double p_symbol_given_concept(int v, int k) const;
  double p_concept_given_symbol(int k, int v) const;
};

ConceptStats concept_stats(const TrainedProtocol& protocol, int vocab_size);

// Mean over concepts of p(v^k|k) * p(k|v^k) with v^k = argmax_v p(k|v)
// (lowest symbol index wins ties).
double context_independence(const TrainedProtocol& protocol, int vocab_size);

// Deterministic sender abstraction shared by network senders and the
// obverter's search-based sender.
using DeterministicSender =
    std::function<agents::Message(const core::ObjectInstance&)>;

struct ZeroShotAccuracy {
  double train_both = 0.0;
  double test_both = 0.0;
  double test_avg = 0.0;
};

// Accuracy of the deterministic sender/receiver pair; "both" requires color
// and shape argmax simultaneously correct, "avg" averages the per-attribute
// accuracies.
ZeroShotAccuracy zero_shot_eval(const DeterministicSender& sender,
                                const agents::ReceiverAgent& receiver,
                                const core::DatasetSplit& split);

// --- Protocol file and table renderings -------------------------------------

// Row-per-pair protocol file: header "n_colors,n_shapes,T", then rows
// "color,shape,sym_0,...,sym_{T-1}" in decimal text.
std::string write_protocol_file(const TrainedProtocol& protocol);
TrainedProtocol read_protocol_file(const std::string& text);
TrainedProtocol read_protocol_path(const std::string& path);

// Grid renderings (one row per color, one column per shape). Held-out cells
// are bracketed in CSV and starred in the aligned-text form.
std::string render_protocol_csv(const TrainedProtocol& protocol,
                                const core::AttributeSpace& space);
std::string render_protocol_text(const TrainedProtocol& protocol,
                                 const core::AttributeSpace& space);
TrainedProtocol parse_protocol_csv(const std::string& text);

}  // namespace sigcomp::metrics

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigcomp/agents.hpp"
#include "sigcomp/checkpoint.hpp"
#include "sigcomp/core.hpp"
#include "sigcomp/metrics.hpp"
#include "sigcomp/nn.hpp"
#include "sigcomp/protocol.hpp"
#include "sigcomp/rng.hpp"

namespace sigcomp::games {

enum class Regime { kRandom, kBaseline, kTemplateTransfer, kObverter };

std::string regime_name(Regime regime);
Regime parse_regime(const std::string& name);

struct LearningRates {
  double pretrain_all = 1e-3;
  double sender_phase2 = 1e-3;
  double receiver_phase2 = 1e-5;
  double obverter_receiver = 1e-5;
};

struct GameConfig {
  core::AttributeSpace space;
  int vocab_size = 10;
  int message_length = 2;  // T of the object naming game
  int batch_size = 32;
  int hidden_dim = 200;
  int embed_dim = 25;
  LearningRates lr;
  double pretrain_threshold = 0.95;
  int max_epochs = 2000;  // per phase
  // Obverter converges slowly at its receiver-only 1e-5 updates; it gets its
  // own epoch budget so the shared default can stay small.
  int max_epochs_obverter = 2000;
  std::uint64_t master_seed = 1;

  void validate() const;
  // Sorted key=value lines covering every field except master_seed, so runs
  // of one experiment share a hash across seeds.
  std::string canonical_text() const;
  std::uint64_t config_hash() const;
};

// One seed's outcome: configuration echo, loss trace, and final metrics.
struct RunRecord {
  std::string regime;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  int epochs = 0;
  double final_train_acc_both = 0.0;
  double final_test_acc_both = 0.0;
  double final_test_acc_avg = 0.0;
  double ci = 0.0;
  double topo = 0.0;
  bool topo_degenerate = false;
  double wall_ms = 0.0;
  std::vector<double> loss_trace;
};

// --- Losses and shared machinery ---------------------------------------------

// Mean over the batch of -(log r(color|m) + log r(shape|m)) with m sampled
// from the sender's relaxed distribution. Differentiable w.r.t. both agents.
nn::Var naming_game_loss(agents::SenderAgent& sender,
                         agents::ReceiverAgent& receiver,
                         std::span<const core::ObjectInstance> batch, Rng& rng,
                         nn::Tape& tape);

enum class PretrainRole { kColorSender, kShapeSender };

// Length-2 message for the receiver: the color sender's symbol sits at
// position 0 (uniform random hard one-hot appended), the shape sender's at
// position 1 (random one-hot prepended). Padding carries no gradient.
agents::RelaxedMessage pad_pretrain_message(const agents::RelaxedMessage& message,
                                            PretrainRole role, int vocab_size,
                                            Rng& rng, nn::Tape& tape);

struct NamingAccuracy {
  double both = 0.0;
  double color = 0.0;
  double shape = 0.0;
};

NamingAccuracy naming_accuracy(const agents::SenderAgent& sender,
                               const agents::ReceiverAgent& receiver,
                               std::span<const core::ObjectInstance> instances);

// --- Training regimes ---------------------------------------------------------

struct TrainResult {
  agents::SenderAgent sender;
  agents::ReceiverAgent receiver;
  RunRecord record;
};

struct PretrainResult {
  agents::ReceiverAgent receiver;
  RunRecord record;
};

struct ObverterResult {
  agents::ReceiverAgent agent1;
  agents::ReceiverAgent agent2;
  RunRecord record;
};

// Joint sender/receiver training on the train split until both-accuracy
// reaches 0.99 or the epoch budget runs out. Used directly by the baseline
// regime and as phase 2 of template transfer.
void train_naming_game(const GameConfig& config,
                       std::span<const core::ObjectInstance> train,
                       agents::SenderAgent& sender,
                       agents::ReceiverAgent& receiver, Rng& rng,
                       double lr_sender, double lr_receiver,
                       std::vector<double>& loss_trace, int& epochs);

TrainResult train_baseline(const GameConfig& config);

// Phase 1 of template transfer: color and shape senders train against one
// shared receiver on the summed disentangled losses until both sub-game
// accuracies reach the threshold. Throws PretrainTimeout otherwise.
PretrainResult pretrain_disentangled(const GameConfig& config);

TrainResult run_template_transfer(const GameConfig& config);

// All vocab^T messages in lexicographic order; DomainError above 10^6.
std::vector<agents::Message> enumerate_messages(int vocab_size, int length);

// Search objective for the obverter: the agent's own receiver pathway scores
// the message against the labels. No gradients.
double evaluate_message(const agents::ReceiverAgent& agent,
                        const agents::Message& message, int color, int shape);

ObverterResult train_obverter(const GameConfig& config);

// --- Protocol extraction -------------------------------------------------------

metrics::DeterministicSender make_eval_sender(const agents::SenderAgent& sender);
// Caches the message score table for the agent's current parameters.
metrics::DeterministicSender make_obverter_sender(
    const agents::ReceiverAgent& agent, int vocab_size, int length);

TrainedProtocol extract_protocol(const metrics::DeterministicSender& sender,
                                 const core::AttributeSpace& space,
                                 int message_length);

// --- One full seed -------------------------------------------------------------

struct SeedOutcome {
  RunRecord record;
  TrainedProtocol protocol;
  checkpoint::EntryMap checkpoint;
};

// Trains (or, for the random regime, merely initializes) agents with
// config.master_seed as the run seed, extracts the protocol, computes all
// metrics on the diagonal split, and assembles the checkpoint.
SeedOutcome run_seed(Regime regime, const GameConfig& config);

// --- Checkpoint reconstruction ---------------------------------------------------

// Checkpoints are self-describing: metadata entries plus the observation
// matrix reconstruct the agents and evaluation inputs with no config file.
struct LoadedRun {
  Regime regime = Regime::kBaseline;
  int n_colors = 0;
  int n_shapes = 0;
  int vocab_size = 0;
  int message_length = 0;
  int hidden_dim = 0;
  int embed_dim = 0;
  int obs_dim = 0;
  std::uint64_t seed = 0;
  Matrix observations;  // obs_dim x cells, cells row-major by (color, shape)
  std::optional<agents::SenderAgent> sender;
  std::optional<agents::ReceiverAgent> receiver;         // decoding side
  std::optional<agents::ReceiverAgent> obverter_sender;  // agent1
};

LoadedRun load_run(const checkpoint::EntryMap& entries);
metrics::DeterministicSender loaded_sender_fn(const LoadedRun& run);
std::vector<core::ObjectInstance> instances_from_loaded(const LoadedRun& run);
TrainedProtocol protocol_from_loaded(const LoadedRun& run);

}  // namespace sigcomp::games

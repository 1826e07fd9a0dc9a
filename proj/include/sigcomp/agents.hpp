#pragma once

#include <utility>
#include <vector>

#include "sigcomp/nn.hpp"
#include "sigcomp/rng.hpp"
#include "sigcomp/types.hpp"

namespace sigcomp::agents {

// Hard-form message: T symbol indices from a closed vocabulary.
struct Message {
  std::vector<int> symbols;

  bool operator==(const Message& other) const = default;
};

// Relaxed-form message: T simplex-valued symbol vectors living on a tape.
using RelaxedMessage = std::vector<nn::Var>;

struct SenderConfig {
  int obs_dim = 10;
  int hidden_dim = 200;
  int vocab_size = 10;
  int embed_dim = 25;
  int message_length = 2;
  double temperature_init = 1.0;
  double temperature_floor = 0.5;
};

// The sender policy: observation -> message. An input projection seeds the
// RNN hidden state; each emitted symbol's embedding is the next RNN input.
class SenderAgent {
 public:
  SenderAgent(const SenderConfig& config, Rng& rng);

  const SenderConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  double temperature() const;

 private:
  SenderConfig config_;
  nn::ParamStore params_;
};

struct ReceiverConfig {
  int n_colors = 5;
  int n_shapes = 5;
  int hidden_dim = 200;
  int vocab_size = 10;
  int embed_dim = 25;
};

// The receiver policy: message -> (color log-probs, shape log-probs). An RNN
// consumes the embedded symbols; a two-layer head with two softmax groups
// reads out the final hidden state.
class ReceiverAgent {
 public:
  ReceiverAgent(const ReceiverConfig& config, Rng& rng);

  const ReceiverConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  ReceiverConfig config_;
  nn::ParamStore params_;
};

// Relaxed sampled message for training; differentiable w.r.t. the sender's
// parameters. hidden_0 = proj(obs); at each step logits come from the current
// hidden state and the sampled symbol's embedding feeds the next RNN step.
RelaxedMessage sender_forward_train(SenderAgent& sender, const Vector& obs,
                                    Rng& rng, nn::Tape& tape);

// Greedy deterministic decoding: per-step argmax, the chosen symbol's
// embedding fed onward. No sampling, no tape.
Message sender_forward_eval(const SenderAgent& sender, const Vector& obs);

// Receiver forward over relaxed symbol vectors (hard one-hots are the
// special case). Returns (color log-probs, shape log-probs).
std::pair<nn::Var, nn::Var> receiver_forward(ReceiverAgent& receiver,
                                             const RelaxedMessage& symbols,
                                             nn::Tape& tape);
std::pair<nn::Var, nn::Var> receiver_forward(ReceiverAgent& receiver,
                                             const Message& message,
                                             nn::Tape& tape);

// Tape-free receiver evaluation for one or many hard messages; matrices hold
// one column of log-probs per message.
std::pair<Vector, Vector> receiver_eval(const ReceiverAgent& receiver,
                                        const Message& message);
std::pair<Matrix, Matrix> receiver_eval_batch(
    const ReceiverAgent& receiver, const std::vector<Message>& messages);

enum class ConceptGroup { kColor, kShape };

// Marginal log-probability of one attribute. The two heads factorize, so the
// marginal over the other attribute is exactly the group's own entry.
nn::Var marginal_log_prob(nn::Tape& tape,
                          const std::pair<nn::Var, nn::Var>& joint,
                          ConceptGroup group, Index target);

Message one_hot_message(const RelaxedMessage& symbols, const nn::Tape& tape);
RelaxedMessage to_relaxed(const Message& message, int vocab_size,
                          nn::Tape& tape);

}  // namespace sigcomp::agents

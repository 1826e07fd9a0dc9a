#include "sigcomp/games.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <tuple>

#include "sigcomp/errors.hpp"

namespace sigcomp::games {

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::kRandom: return "random";
    case Regime::kBaseline: return "baseline";
    case Regime::kTemplateTransfer: return "template-transfer";
    case Regime::kObverter: return "obverter";
  }
  return "unknown";
}

Regime parse_regime(const std::string& name) {
  if (name == "random") return Regime::kRandom;
  if (name == "baseline") return Regime::kBaseline;
  if (name == "template-transfer") return Regime::kTemplateTransfer;
  if (name == "obverter") return Regime::kObverter;
  throw ConfigError("unknown regime: " + name);
}

void GameConfig::validate() const {
  space.validate();
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (message_length < 1) throw ConfigError("message_length must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hidden_dim < 1 || embed_dim < 1) {
    throw ConfigError("hidden_dim and embed_dim must be positive");
  }
  if (lr.pretrain_all <= 0.0 || lr.sender_phase2 <= 0.0 ||
      lr.receiver_phase2 <= 0.0 || lr.obverter_receiver <= 0.0) {
    throw ConfigError("learning rates must be positive");
  }
  if (pretrain_threshold < 0.0 || pretrain_threshold > 1.0) {
    throw ConfigError("pretrain_threshold must lie in [0, 1]");
  }
  if (max_epochs < 1 || max_epochs_obverter < 1) {
    throw ConfigError("epoch budgets must be >= 1");
  }
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

const char* encoding_name(core::EncodingKind kind) {
  switch (kind) {
    case core::EncodingKind::kOneHotDisentangled: return "onehot";
    case core::EncodingKind::kEntangledProjection: return "entangled";
    case core::EncodingKind::kPrecomputedEmbedding: return "precomputed";
  }
  return "unknown";
}

}  // namespace

std::string GameConfig::canonical_text() const {
  std::ostringstream out;
  out << "batch_size=" << batch_size << '\n'
      << "embed_dim=" << embed_dim << '\n'
      << "encoding=" << encoding_name(space.encoding.kind) << '\n'
      << "encoding_dim=" << space.encoding.dim << '\n'
      << "encoding_path=" << space.encoding.path << '\n'
      << "encoding_seed=" << space.encoding.seed << '\n'
      << "hidden_dim=" << hidden_dim << '\n'
      << "lr_obverter_receiver=" << format_double(lr.obverter_receiver) << '\n'
      << "lr_pretrain=" << format_double(lr.pretrain_all) << '\n'
      << "lr_receiver=" << format_double(lr.receiver_phase2) << '\n'
      << "lr_sender=" << format_double(lr.sender_phase2) << '\n'
      << "max_epochs=" << max_epochs << '\n'
      << "max_epochs_obverter=" << max_epochs_obverter << '\n'
      << "message_length=" << message_length << '\n'
      << "n_colors=" << space.n_colors << '\n'
      << "n_shapes=" << space.n_shapes << '\n'
      << "pretrain_threshold=" << format_double(pretrain_threshold) << '\n'
      << "vocab_size=" << vocab_size << '\n';
  return out.str();
}

std::uint64_t GameConfig::config_hash() const { return fnv1a64(canonical_text()); }

// --- Losses -------------------------------------------------------------------

nn::Var naming_game_loss(agents::SenderAgent& sender,
                         agents::ReceiverAgent& receiver,
                         std::span<const core::ObjectInstance> batch, Rng& rng,
                         nn::Tape& tape) {
  if (batch.empty()) throw DomainError("naming_game_loss: empty batch");
  nn::Var total{};
  for (const auto& inst : batch) {
    agents::RelaxedMessage message =
        agents::sender_forward_train(sender, inst.observation, rng, tape);
    auto joint = agents::receiver_forward(receiver, message, tape);
    nn::Var lp_color = agents::marginal_log_prob(
        tape, joint, agents::ConceptGroup::kColor, inst.color);
    nn::Var lp_shape = agents::marginal_log_prob(
        tape, joint, agents::ConceptGroup::kShape, inst.shape);
    nn::Var item = nn::add(tape, lp_color, lp_shape);
    total = total.valid() ? nn::add(tape, total, item) : item;
  }
  nn::Var loss =
      nn::scale(tape, total, -1.0 / static_cast<double>(batch.size()));
  if (!std::isfinite(tape.value(loss)[0])) {
    throw NumericsError("naming_game_loss: non-finite loss");
  }
  return loss;
}

agents::RelaxedMessage pad_pretrain_message(const agents::RelaxedMessage& message,
                                            PretrainRole role, int vocab_size,
                                            Rng& rng, nn::Tape& tape) {
  if (message.size() != 1) {
    throw DomainError("pad_pretrain_message: expects a length-1 message");
  }
  Vector pad = Vector::Zero(vocab_size);
  pad[rng.uniform_int(vocab_size)] = 1.0;
  nn::Var pad_var = tape.constant(std::move(pad));
  if (role == PretrainRole::kColorSender) {
    return {message[0], pad_var};
  }
  return {pad_var, message[0]};
}

// --- Evaluation helpers ---------------------------------------------------------

NamingAccuracy naming_accuracy(const agents::SenderAgent& sender,
                               const agents::ReceiverAgent& receiver,
                               std::span<const core::ObjectInstance> instances) {
  NamingAccuracy acc;
  if (instances.empty()) return acc;
  std::vector<agents::Message> messages;
  messages.reserve(instances.size());
  for (const auto& inst : instances) {
    messages.push_back(agents::sender_forward_eval(sender, inst.observation));
  }
  const auto [color_lp, shape_lp] = agents::receiver_eval_batch(receiver, messages);
  int hit_both = 0, hit_color = 0, hit_shape = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Index c = 0, s = 0;
    color_lp.col(static_cast<Index>(i)).maxCoeff(&c);
    shape_lp.col(static_cast<Index>(i)).maxCoeff(&s);
    const bool color_ok = static_cast<int>(c) == instances[i].color;
    const bool shape_ok = static_cast<int>(s) == instances[i].shape;
    hit_color += color_ok;
    hit_shape += shape_ok;
    hit_both += color_ok && shape_ok;
  }
  const double n = static_cast<double>(instances.size());
  acc.both = hit_both / n;
  acc.color = hit_color / n;
  acc.shape = hit_shape / n;
  return acc;
}

namespace {

// Sub-game accuracy with the padding marginalized exactly: every vocabulary
// symbol is tried in the padding slot and correctness averaged. Keeps
// evaluation deterministic and off the training rng stream.
double pretrain_subgame_accuracy(const agents::SenderAgent& sender,
                                 const agents::ReceiverAgent& receiver,
                                 std::span<const core::ObjectInstance> instances,
                                 PretrainRole role, int vocab_size) {
  std::vector<agents::Message> messages;
  messages.reserve(instances.size() * static_cast<std::size_t>(vocab_size));
  for (const auto& inst : instances) {
    const int symbol =
        agents::sender_forward_eval(sender, inst.observation).symbols[0];
    for (int pad = 0; pad < vocab_size; ++pad) {
      if (role == PretrainRole::kColorSender) {
        messages.push_back(agents::Message{{symbol, pad}});
      } else {
        messages.push_back(agents::Message{{pad, symbol}});
      }
    }
  }
  const auto [color_lp, shape_lp] = agents::receiver_eval_batch(receiver, messages);
  double correct = 0.0;
  Index col = 0;
  for (const auto& inst : instances) {
    for (int pad = 0; pad < vocab_size; ++pad, ++col) {
      Index best = 0;
      if (role == PretrainRole::kColorSender) {
        color_lp.col(col).maxCoeff(&best);
        correct += static_cast<int>(best) == inst.color;
      } else {
        shape_lp.col(col).maxCoeff(&best);
        correct += static_cast<int>(best) == inst.shape;
      }
    }
  }
  return correct / static_cast<double>(messages.size());
}

std::vector<core::ObjectInstance> gather_batch(
    std::span<const core::ObjectInstance> pool,
    const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
  std::vector<core::ObjectInstance> batch;
  batch.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) batch.push_back(pool[order[i]]);
  return batch;
}

agents::SenderConfig sender_config(const GameConfig& config, int obs_dim,
                                   int message_length) {
  agents::SenderConfig sc;
  sc.obs_dim = obs_dim;
  sc.hidden_dim = config.hidden_dim;
  sc.vocab_size = config.vocab_size;
  sc.embed_dim = config.embed_dim;
  sc.message_length = message_length;
  return sc;
}

agents::ReceiverConfig receiver_config(const GameConfig& config) {
  agents::ReceiverConfig rc;
  rc.n_colors = config.space.n_colors;
  rc.n_shapes = config.space.n_shapes;
  rc.hidden_dim = config.hidden_dim;
  rc.vocab_size = config.vocab_size;
  rc.embed_dim = config.embed_dim;
  return rc;
}

}  // namespace

// --- Naming game (baseline and template-transfer phase 2) -----------------------

void train_naming_game(const GameConfig& config,
                       std::span<const core::ObjectInstance> train,
                       agents::SenderAgent& sender,
                       agents::ReceiverAgent& receiver, Rng& rng,
                       double lr_sender, double lr_receiver,
                       std::vector<double>& loss_trace, int& epochs) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  epochs = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto batch = gather_batch(train, order, begin, end);
      nn::Tape tape;
      nn::Var loss = naming_game_loss(sender, receiver, batch, rng, tape);
      tape.backward(loss);
      nn::adam_step(sender.params(), lr_sender);
      nn::adam_step(receiver.params(), lr_receiver);
      epoch_loss += tape.value(loss)[0];
      ++batches;
    }
    loss_trace.push_back(epoch_loss / batches);
    epochs = epoch;
    if (naming_accuracy(sender, receiver, train).both >= 0.99) break;
  }
}

TrainResult train_baseline(const GameConfig& config) {
  config.validate();
  const auto dataset = core::build_dataset(config.space);
  const auto split = core::diagonal_split(dataset, config.space);
  const int obs_dim = static_cast<int>(dataset.front().observation.size());

  Rng rng(config.master_seed);
  agents::ReceiverAgent receiver(receiver_config(config), rng);
  agents::SenderAgent sender(
      sender_config(config, obs_dim, config.message_length), rng);

  RunRecord record;
  record.regime = regime_name(Regime::kBaseline);
  record.seed = config.master_seed;
  record.config_hash = config.config_hash();
  train_naming_game(config, split.train, sender, receiver, rng,
                    config.lr.sender_phase2, config.lr.receiver_phase2,
                    record.loss_trace, record.epochs);
  return TrainResult{std::move(sender), std::move(receiver), std::move(record)};
}

// --- Template transfer -----------------------------------------------------------

namespace {

PretrainResult pretrain_impl(const GameConfig& config, Rng& rng) {
  const auto dataset = core::build_dataset(config.space);
  const auto split = core::diagonal_split(dataset, config.space);
  const int obs_dim = static_cast<int>(dataset.front().observation.size());

  agents::ReceiverAgent receiver(receiver_config(config), rng);
  agents::SenderAgent color_sender(sender_config(config, obs_dim, 1), rng);
  agents::SenderAgent shape_sender(sender_config(config, obs_dim, 1), rng);

  RunRecord record;
  record.regime = "pretrain";
  record.seed = config.master_seed;
  record.config_hash = config.config_hash();

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  double color_acc = 0.0, shape_acc = 0.0;
  bool reached = false;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto batch = gather_batch(split.train, order, begin, end);
      nn::Tape tape;
      nn::Var total{};
      for (const auto& inst : batch) {
        // Color naming game: loss on the color marginal only.
        auto m1 = agents::sender_forward_train(color_sender, inst.observation,
                                               rng, tape);
        auto padded1 = pad_pretrain_message(m1, PretrainRole::kColorSender,
                                            config.vocab_size, rng, tape);
        auto joint1 = agents::receiver_forward(receiver, padded1, tape);
        nn::Var lp1 = agents::marginal_log_prob(
            tape, joint1, agents::ConceptGroup::kColor, inst.color);
        // Shape naming game: loss on the shape marginal only.
        auto m2 = agents::sender_forward_train(shape_sender, inst.observation,
                                               rng, tape);
        auto padded2 = pad_pretrain_message(m2, PretrainRole::kShapeSender,
                                            config.vocab_size, rng, tape);
        auto joint2 = agents::receiver_forward(receiver, padded2, tape);
        nn::Var lp2 = agents::marginal_log_prob(
            tape, joint2, agents::ConceptGroup::kShape, inst.shape);
        nn::Var item = nn::add(tape, lp1, lp2);
        total = total.valid() ? nn::add(tape, total, item) : item;
      }
      nn::Var loss =
          nn::scale(tape, total, -1.0 / static_cast<double>(batch.size()));
      if (!std::isfinite(tape.value(loss)[0])) {
        throw NumericsError("pretrain_disentangled: non-finite loss");
      }
      tape.backward(loss);
      nn::adam_step(color_sender.params(), config.lr.pretrain_all);
      nn::adam_step(shape_sender.params(), config.lr.pretrain_all);
      nn::adam_step(receiver.params(), config.lr.pretrain_all);
      epoch_loss += tape.value(loss)[0];
      ++batches;
    }
    record.loss_trace.push_back(epoch_loss / batches);
    record.epochs = epoch;
    color_acc = pretrain_subgame_accuracy(color_sender, receiver, split.train,
                                          PretrainRole::kColorSender,
                                          config.vocab_size);
    shape_acc = pretrain_subgame_accuracy(shape_sender, receiver, split.train,
                                          PretrainRole::kShapeSender,
                                          config.vocab_size);
    if (color_acc >= config.pretrain_threshold &&
        shape_acc >= config.pretrain_threshold) {
      reached = true;
      break;
    }
  }
  if (!reached) {
    std::ostringstream msg;
    msg << "pretraining did not reach threshold " << config.pretrain_threshold
        << " within " << config.max_epochs << " epochs (color "
        << color_acc << ", shape " << shape_acc << ")";
    throw PretrainTimeout(msg.str(), record.loss_trace, color_acc, shape_acc);
  }
  record.final_train_acc_both = std::min(color_acc, shape_acc);
  return PretrainResult{std::move(receiver), std::move(record)};
}

}  // namespace

PretrainResult pretrain_disentangled(const GameConfig& config) {
  config.validate();
  Rng rng(config.master_seed);
  return pretrain_impl(config, rng);
}

TrainResult run_template_transfer(const GameConfig& config) {
  config.validate();
  const auto dataset = core::build_dataset(config.space);
  const auto split = core::diagonal_split(dataset, config.space);
  const int obs_dim = static_cast<int>(dataset.front().observation.size());

  Rng rng(config.master_seed);
  PretrainResult pre = pretrain_impl(config, rng);

  // Phase 2: fresh sender, transferred receiver, no reinitialization.
  agents::SenderAgent sender(
      sender_config(config, obs_dim, config.message_length), rng);

  RunRecord record;
  record.regime = regime_name(Regime::kTemplateTransfer);
  record.seed = config.master_seed;
  record.config_hash = config.config_hash();
  record.loss_trace = std::move(pre.record.loss_trace);
  int phase2_epochs = 0;
  train_naming_game(config, split.train, sender, pre.receiver, rng,
                    config.lr.sender_phase2, config.lr.receiver_phase2,
                    record.loss_trace, phase2_epochs);
  record.epochs = pre.record.epochs + phase2_epochs;
  return TrainResult{std::move(sender), std::move(pre.receiver),
                     std::move(record)};
}

// --- Obverter ---------------------------------------------------------------------

std::vector<agents::Message> enumerate_messages(int vocab_size, int length) {
  if (vocab_size < 1 || length < 1) {
    throw DomainError("enumerate_messages: vocab and length must be positive");
  }
  std::uint64_t count = 1;
  for (int t = 0; t < length; ++t) {
    count *= static_cast<std::uint64_t>(vocab_size);
    if (count > 1000000ull) {
      throw DomainError("enumerate_messages: vocab^length exceeds 10^6");
    }
  }
  std::vector<agents::Message> messages;
  messages.reserve(count);
  agents::Message current;
  current.symbols.assign(static_cast<std::size_t>(length), 0);
  while (true) {
    messages.push_back(current);
    int pos = length - 1;
    while (pos >= 0 && current.symbols[static_cast<std::size_t>(pos)] ==
                           vocab_size - 1) {
      current.symbols[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++current.symbols[static_cast<std::size_t>(pos)];
  }
  return messages;
}

double evaluate_message(const agents::ReceiverAgent& agent,
                        const agents::Message& message, int color, int shape) {
  const auto [color_lp, shape_lp] = agents::receiver_eval(agent, message);
  if (color < 0 || color >= color_lp.size() || shape < 0 ||
      shape >= shape_lp.size()) {
    throw DomainError("evaluate_message: label out of range");
  }
  return -(color_lp[color] + shape_lp[shape]);
}

namespace {

// Index of the loss-minimizing message; ties resolve to the lowest index,
// i.e. the lexicographically smallest message of the enumeration.
Index argmin_message(const Matrix& color_lp, const Matrix& shape_lp, int color,
                     int shape) {
  Index best = 0;
  double best_loss = -(color_lp(color, 0) + shape_lp(shape, 0));
  for (Index j = 1; j < color_lp.cols(); ++j) {
    const double loss = -(color_lp(color, j) + shape_lp(shape, j));
    if (loss < best_loss) {
      best_loss = loss;
      best = j;
    }
  }
  return best;
}

NamingAccuracy obverter_accuracy(const agents::ReceiverAgent& sender_agent,
                                 const agents::ReceiverAgent& receiver_agent,
                                 std::span<const core::ObjectInstance> instances,
                                 const std::vector<agents::Message>& messages) {
  const auto [sc, ss] = agents::receiver_eval_batch(sender_agent, messages);
  std::vector<agents::Message> chosen;
  chosen.reserve(instances.size());
  for (const auto& inst : instances) {
    chosen.push_back(
        messages[static_cast<std::size_t>(argmin_message(sc, ss, inst.color, inst.shape))]);
  }
  const auto [rc, rs] = agents::receiver_eval_batch(receiver_agent, chosen);
  NamingAccuracy acc;
  int hit_both = 0, hit_color = 0, hit_shape = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Index c = 0, s = 0;
    rc.col(static_cast<Index>(i)).maxCoeff(&c);
    rs.col(static_cast<Index>(i)).maxCoeff(&s);
    const bool color_ok = static_cast<int>(c) == instances[i].color;
    const bool shape_ok = static_cast<int>(s) == instances[i].shape;
    hit_color += color_ok;
    hit_shape += shape_ok;
    hit_both += color_ok && shape_ok;
  }
  const double n = static_cast<double>(instances.size());
  acc.both = hit_both / n;
  acc.color = hit_color / n;
  acc.shape = hit_shape / n;
  return acc;
}

}  // namespace

ObverterResult train_obverter(const GameConfig& config) {
  config.validate();
  const auto dataset = core::build_dataset(config.space);
  const auto split = core::diagonal_split(dataset, config.space);

  Rng rng(config.master_seed);
  agents::ReceiverAgent agent1(receiver_config(config), rng);
  agents::ReceiverAgent agent2(receiver_config(config), rng);
  const auto messages =
      enumerate_messages(config.vocab_size, config.message_length);

  RunRecord record;
  record.regime = regime_name(Regime::kObverter);
  record.seed = config.master_seed;
  record.config_hash = config.config_hash();

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.max_epochs_obverter; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto batch = gather_batch(split.train, order, begin, end);

      const bool first_sends = rng.uniform_int(2) == 0;
      agents::ReceiverAgent& sender_agent = first_sends ? agent1 : agent2;
      agents::ReceiverAgent& receiver_agent = first_sends ? agent2 : agent1;

      // The sender-role agent scores every candidate message through its own
      // receiver pathway once per batch; the table depends only on its
      // parameters.
      const auto [sc, ss] = agents::receiver_eval_batch(sender_agent, messages);

      nn::Tape tape;
      nn::Var total{};
      for (const auto& inst : batch) {
        const Index j = argmin_message(sc, ss, inst.color, inst.shape);
        auto relaxed = agents::to_relaxed(messages[static_cast<std::size_t>(j)],
                                          config.vocab_size, tape);
        auto joint = agents::receiver_forward(receiver_agent, relaxed, tape);
        nn::Var lp_color = agents::marginal_log_prob(
            tape, joint, agents::ConceptGroup::kColor, inst.color);
        nn::Var lp_shape = agents::marginal_log_prob(
            tape, joint, agents::ConceptGroup::kShape, inst.shape);
        nn::Var item = nn::add(tape, lp_color, lp_shape);
        total = total.valid() ? nn::add(tape, total, item) : item;
      }
      nn::Var loss =
          nn::scale(tape, total, -1.0 / static_cast<double>(batch.size()));
      if (!std::isfinite(tape.value(loss)[0])) {
        throw NumericsError("train_obverter: non-finite loss");
      }
      tape.backward(loss);
      // Only the receiver-role agent updates.
      nn::adam_step(receiver_agent.params(), config.lr.obverter_receiver);
      epoch_loss += tape.value(loss)[0];
      ++batches;
    }
    record.loss_trace.push_back(epoch_loss / batches);
    record.epochs = epoch;
    if (obverter_accuracy(agent1, agent2, split.train, messages).both >= 0.99) {
      break;
    }
  }
  return ObverterResult{std::move(agent1), std::move(agent2), std::move(record)};
}

// --- Protocol extraction ------------------------------------------------------------

metrics::DeterministicSender make_eval_sender(const agents::SenderAgent& sender) {
  const agents::SenderAgent* agent = &sender;
  return [agent](const core::ObjectInstance& inst) {
    return agents::sender_forward_eval(*agent, inst.observation);
  };
}

metrics::DeterministicSender make_obverter_sender(
    const agents::ReceiverAgent& agent, int vocab_size, int length) {
  struct Table {
    std::vector<agents::Message> messages;
    Matrix color_lp;
    Matrix shape_lp;
  };
  auto table = std::make_shared<Table>();
  table->messages = enumerate_messages(vocab_size, length);
  std::tie(table->color_lp, table->shape_lp) =
      agents::receiver_eval_batch(agent, table->messages);
  return [table](const core::ObjectInstance& inst) {
    const Index j =
        argmin_message(table->color_lp, table->shape_lp, inst.color, inst.shape);
    return table->messages[static_cast<std::size_t>(j)];
  };
}

TrainedProtocol extract_protocol(const metrics::DeterministicSender& sender,
                                 const core::AttributeSpace& space,
                                 int message_length) {
  TrainedProtocol protocol;
  protocol.n_colors = space.n_colors;
  protocol.n_shapes = space.n_shapes;
  protocol.message_length = message_length;
  for (const auto& inst : core::build_dataset(space)) {
    protocol.table.push_back(sender(inst));
  }
  return protocol;
}

// --- One full seed --------------------------------------------------------------------

SeedOutcome run_seed(Regime regime, const GameConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  const auto dataset = core::build_dataset(config.space);
  const auto split = core::diagonal_split(dataset, config.space);
  const int obs_dim = static_cast<int>(dataset.front().observation.size());

  SeedOutcome outcome;
  checkpoint::EntryMap& ckpt = outcome.checkpoint;
  metrics::DeterministicSender sender_fn;
  const agents::ReceiverAgent* eval_receiver = nullptr;

  // Keep whichever agents the regime produces alive for evaluation.
  std::optional<TrainResult> trained;
  std::optional<ObverterResult> obverter;

  switch (regime) {
    case Regime::kRandom: {
      Rng rng(config.master_seed);
      agents::ReceiverAgent receiver(receiver_config(config), rng);
      agents::SenderAgent sender(
          sender_config(config, obs_dim, config.message_length), rng);
      RunRecord record;
      record.regime = regime_name(regime);
      record.seed = config.master_seed;
      record.config_hash = config.config_hash();
      trained.emplace(TrainResult{std::move(sender), std::move(receiver),
                                  std::move(record)});
      break;
    }
    case Regime::kBaseline:
      trained.emplace(train_baseline(config));
      break;
    case Regime::kTemplateTransfer:
      trained.emplace(run_template_transfer(config));
      break;
    case Regime::kObverter:
      obverter.emplace(train_obverter(config));
      break;
  }

  if (obverter) {
    outcome.record = std::move(obverter->record);
    sender_fn = make_obverter_sender(obverter->agent1, config.vocab_size,
                                     config.message_length);
    eval_receiver = &obverter->agent2;
    checkpoint::add_store(ckpt, "agent1/", obverter->agent1.params());
    checkpoint::add_store(ckpt, "agent2/", obverter->agent2.params());
  } else {
    outcome.record = std::move(trained->record);
    sender_fn = make_eval_sender(trained->sender);
    eval_receiver = &trained->receiver;
    checkpoint::add_store(ckpt, "sender/", trained->sender.params());
    checkpoint::add_store(ckpt, "receiver/", trained->receiver.params());
  }

  outcome.protocol = extract_protocol(sender_fn, config.space,
                                      config.message_length);
  outcome.protocol.regime = regime_name(regime);
  outcome.protocol.seed = config.master_seed;
  outcome.protocol.config_hash = config.config_hash();

  const auto acc = metrics::zero_shot_eval(sender_fn, *eval_receiver, split);
  outcome.record.final_train_acc_both = acc.train_both;
  outcome.record.final_test_acc_both = acc.test_both;
  outcome.record.final_test_acc_avg = acc.test_avg;

  const auto topo = metrics::topographic_similarity(outcome.protocol);
  outcome.record.topo = topo.value;
  outcome.record.topo_degenerate = topo.degenerate;
  outcome.record.ci =
      metrics::context_independence(outcome.protocol, config.vocab_size);

  // Self-describing checkpoint: enough metadata and data to re-extract the
  // protocol and re-run evaluation without the original config file.
  checkpoint::add_meta(ckpt, "meta/regime",
                       static_cast<double>(static_cast<int>(regime)));
  checkpoint::add_meta(ckpt, "meta/n_colors", config.space.n_colors);
  checkpoint::add_meta(ckpt, "meta/n_shapes", config.space.n_shapes);
  checkpoint::add_meta(ckpt, "meta/vocab_size", config.vocab_size);
  checkpoint::add_meta(ckpt, "meta/message_length", config.message_length);
  checkpoint::add_meta(ckpt, "meta/hidden_dim", config.hidden_dim);
  checkpoint::add_meta(ckpt, "meta/embed_dim", config.embed_dim);
  checkpoint::add_meta(ckpt, "meta/obs_dim", obs_dim);
  checkpoint::add_meta(ckpt, "meta/seed_lo",
                       static_cast<double>(config.master_seed & 0xffffffffull));
  checkpoint::add_meta(ckpt, "meta/seed_hi",
                       static_cast<double>(config.master_seed >> 32));
  {
    checkpoint::Entry obs;
    obs.rank = 2;
    obs.value.resize(obs_dim, static_cast<Index>(dataset.size()));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      obs.value.col(static_cast<Index>(i)) = dataset[i].observation;
    }
    ckpt.emplace("data/observations", std::move(obs));
  }

  const auto elapsed = std::chrono::steady_clock::now() - start;
  outcome.record.wall_ms =
      std::chrono::duration<double, std::milli>(elapsed).count();
  return outcome;
}

// --- Checkpoint reconstruction ------------------------------------------------------

LoadedRun load_run(const checkpoint::EntryMap& entries) {
  LoadedRun run;
  run.regime = static_cast<Regime>(
      static_cast<int>(checkpoint::get_meta(entries, "meta/regime")));
  run.n_colors = static_cast<int>(checkpoint::get_meta(entries, "meta/n_colors"));
  run.n_shapes = static_cast<int>(checkpoint::get_meta(entries, "meta/n_shapes"));
  run.vocab_size =
      static_cast<int>(checkpoint::get_meta(entries, "meta/vocab_size"));
  run.message_length =
      static_cast<int>(checkpoint::get_meta(entries, "meta/message_length"));
  run.hidden_dim =
      static_cast<int>(checkpoint::get_meta(entries, "meta/hidden_dim"));
  run.embed_dim =
      static_cast<int>(checkpoint::get_meta(entries, "meta/embed_dim"));
  run.obs_dim = static_cast<int>(checkpoint::get_meta(entries, "meta/obs_dim"));
  run.seed = static_cast<std::uint64_t>(
                 checkpoint::get_meta(entries, "meta/seed_hi")) << 32 |
             static_cast<std::uint64_t>(
                 checkpoint::get_meta(entries, "meta/seed_lo"));

  auto obs = entries.find("data/observations");
  if (obs == entries.end()) {
    throw IngestError("checkpoint missing data/observations");
  }
  run.observations = obs->second.value;
  if (run.observations.rows() != run.obs_dim ||
      run.observations.cols() != run.n_colors * run.n_shapes) {
    throw IngestError("checkpoint observation matrix has unexpected shape");
  }

  agents::ReceiverConfig rc;
  rc.n_colors = run.n_colors;
  rc.n_shapes = run.n_shapes;
  rc.hidden_dim = run.hidden_dim;
  rc.vocab_size = run.vocab_size;
  rc.embed_dim = run.embed_dim;

  Rng scratch(0);
  if (run.regime == Regime::kObverter) {
    run.obverter_sender.emplace(rc, scratch);
    checkpoint::load_store(entries, "agent1/", run.obverter_sender->params());
    run.receiver.emplace(rc, scratch);
    checkpoint::load_store(entries, "agent2/", run.receiver->params());
  } else {
    agents::SenderConfig sc;
    sc.obs_dim = run.obs_dim;
    sc.hidden_dim = run.hidden_dim;
    sc.vocab_size = run.vocab_size;
    sc.embed_dim = run.embed_dim;
    sc.message_length = run.message_length;
    run.sender.emplace(sc, scratch);
    checkpoint::load_store(entries, "sender/", run.sender->params());
    run.receiver.emplace(rc, scratch);
    checkpoint::load_store(entries, "receiver/", run.receiver->params());
  }
  return run;
}

metrics::DeterministicSender loaded_sender_fn(const LoadedRun& run) {
  if (run.regime == Regime::kObverter) {
    return make_obverter_sender(*run.obverter_sender, run.vocab_size,
                                run.message_length);
  }
  return make_eval_sender(*run.sender);
}

std::vector<core::ObjectInstance> instances_from_loaded(const LoadedRun& run) {
  std::vector<core::ObjectInstance> instances;
  instances.reserve(static_cast<std::size_t>(run.observations.cols()));
  for (Index j = 0; j < run.observations.cols(); ++j) {
    core::ObjectInstance inst;
    inst.color = static_cast<int>(j) / run.n_shapes;
    inst.shape = static_cast<int>(j) % run.n_shapes;
    inst.observation = run.observations.col(j);
    instances.push_back(std::move(inst));
  }
  return instances;
}

TrainedProtocol protocol_from_loaded(const LoadedRun& run) {
  const auto sender_fn = loaded_sender_fn(run);
  TrainedProtocol protocol;
  protocol.n_colors = run.n_colors;
  protocol.n_shapes = run.n_shapes;
  protocol.message_length = run.message_length;
  protocol.regime = regime_name(run.regime);
  protocol.seed = run.seed;
  for (const auto& inst : instances_from_loaded(run)) {
    protocol.table.push_back(sender_fn(inst));
  }
  return protocol;
}

}  // namespace sigcomp::games

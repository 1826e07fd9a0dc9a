#include "sigcomp/agents.hpp"

#include <cmath>

#include "sigcomp/errors.hpp"

namespace sigcomp::agents {

namespace {

// Inverse of tau = floor + softplus(rho) at the requested initial value.
double rho_for_temperature(double tau, double floor) {
  const double sp = tau - floor;
  if (sp <= 0.0) throw DomainError("initial temperature must exceed the floor");
  return std::log(std::expm1(sp));
}

int argmax(const Vector& v) {
  Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

SenderAgent::SenderAgent(const SenderConfig& config, Rng& rng)
    : config_(config) {
  const Index h = config.hidden_dim;
  const Index v = config.vocab_size;
  const Index e = config.embed_dim;
  params_.add_matrix_init("proj_w", h, config.obs_dim, config.obs_dim, rng);
  params_.add_vector_init("proj_b", h, config.obs_dim, rng);
  params_.add_matrix_init("cell_w_ih", h, e, e, rng);
  params_.add_matrix_init("cell_w_hh", h, h, h, rng);
  params_.add_vector_init("cell_b", h, h, rng);
  params_.add_matrix_init("embed", e, v, v, rng);
  params_.add_matrix_init("out_w", v, h, h, rng);
  params_.add_vector_init("out_b", v, h, rng);
  nn::Param& rho = params_.add_vector("temp_rho", 1);
  rho.value(0, 0) =
      rho_for_temperature(config.temperature_init, config.temperature_floor);
}

double SenderAgent::temperature() const {
  const double r = params_.at("temp_rho").value(0, 0);
  const double sp =
      r > 0.0 ? r + std::log1p(std::exp(-r)) : std::log1p(std::exp(r));
  return config_.temperature_floor + sp;
}

ReceiverAgent::ReceiverAgent(const ReceiverConfig& config, Rng& rng)
    : config_(config) {
  const Index h = config.hidden_dim;
  const Index v = config.vocab_size;
  const Index e = config.embed_dim;
  params_.add_matrix_init("embed", e, v, v, rng);
  params_.add_matrix_init("cell_w_ih", h, e, e, rng);
  params_.add_matrix_init("cell_w_hh", h, h, h, rng);
  params_.add_vector_init("cell_b", h, h, rng);
  params_.add_matrix_init("head_w", h, h, h, rng);
  params_.add_vector_init("head_b", h, h, rng);
  params_.add_matrix_init("color_w", config.n_colors, h, h, rng);
  params_.add_vector_init("color_b", config.n_colors, h, rng);
  params_.add_matrix_init("shape_w", config.n_shapes, h, h, rng);
  params_.add_vector_init("shape_b", config.n_shapes, h, rng);
}

RelaxedMessage sender_forward_train(SenderAgent& sender, const Vector& obs,
                                    Rng& rng, nn::Tape& tape) {
  auto& p = sender.params();
  const auto& cfg = sender.config();
  if (obs.size() != cfg.obs_dim) {
    throw ShapeError("sender_forward_train: observation dim mismatch");
  }
  nn::Var x = tape.constant(obs);
  nn::Var hidden = nn::linear(tape, p.at("proj_w"), p.at("proj_b"), x);
  nn::Var tau = nn::softplus_shift(tape, p.at("temp_rho"), cfg.temperature_floor);

  // Autoregressive loop: the RNN consumes the previous symbol's embedding
  // (zero at step 0) before each emission.
  nn::Var input = tape.constant(Vector::Zero(cfg.embed_dim));
  RelaxedMessage symbols;
  symbols.reserve(static_cast<std::size_t>(cfg.message_length));
  for (int t = 0; t < cfg.message_length; ++t) {
    hidden = nn::rnn_cell(tape, p.at("cell_w_ih"), p.at("cell_w_hh"),
                          p.at("cell_b"), input, hidden);
    nn::Var logits = nn::linear(tape, p.at("out_w"), p.at("out_b"), hidden);
    nn::Var symbol = nn::gumbel_softmax_sample(tape, logits, tau, rng);
    symbols.push_back(symbol);
    if (t + 1 < cfg.message_length) {
      input = nn::matvec(tape, p.at("embed"), symbol);
    }
  }
  return symbols;
}

Message sender_forward_eval(const SenderAgent& sender, const Vector& obs) {
  const auto& p = sender.params();
  const auto& cfg = sender.config();
  if (obs.size() != cfg.obs_dim) {
    throw ShapeError("sender_forward_eval: observation dim mismatch");
  }
  const Matrix& proj_w = p.at("proj_w").value;
  const Matrix& embed = p.at("embed").value;
  const Matrix& w_ih = p.at("cell_w_ih").value;
  const Matrix& w_hh = p.at("cell_w_hh").value;
  const Vector cell_b = p.at("cell_b").value.col(0);
  const Matrix& out_w = p.at("out_w").value;
  const Vector out_b = p.at("out_b").value.col(0);

  Vector hidden = proj_w * obs + p.at("proj_b").value.col(0);
  Vector input = Vector::Zero(cfg.embed_dim);
  Message message;
  message.symbols.reserve(static_cast<std::size_t>(cfg.message_length));
  for (int t = 0; t < cfg.message_length; ++t) {
    hidden = (w_ih * input + w_hh * hidden + cell_b).array().tanh().matrix();
    const Vector logits = out_w * hidden + out_b;
    const int symbol = argmax(logits);
    message.symbols.push_back(symbol);
    if (t + 1 < cfg.message_length) {
      input = embed.col(symbol);
    }
  }
  return message;
}

std::pair<nn::Var, nn::Var> receiver_forward(ReceiverAgent& receiver,
                                             const RelaxedMessage& symbols,
                                             nn::Tape& tape) {
  if (symbols.empty()) {
    throw DomainError("receiver_forward: empty message");
  }
  auto& p = receiver.params();
  const auto& cfg = receiver.config();
  nn::Var hidden = tape.constant(Vector::Zero(cfg.hidden_dim));
  for (const nn::Var& symbol : symbols) {
    if (tape.value(symbol).size() != cfg.vocab_size) {
      throw ShapeError("receiver_forward: symbol width mismatch");
    }
    nn::Var embedded = nn::matvec(tape, p.at("embed"), symbol);
    hidden = nn::rnn_cell(tape, p.at("cell_w_ih"), p.at("cell_w_hh"),
                          p.at("cell_b"), embedded, hidden);
  }
  nn::Var features = nn::tanh_activation(
      tape, nn::linear(tape, p.at("head_w"), p.at("head_b"), hidden));
  nn::Var color_logits =
      nn::linear(tape, p.at("color_w"), p.at("color_b"), features);
  nn::Var shape_logits =
      nn::linear(tape, p.at("shape_w"), p.at("shape_b"), features);
  return {nn::log_softmax(tape, color_logits),
          nn::log_softmax(tape, shape_logits)};
}

std::pair<nn::Var, nn::Var> receiver_forward(ReceiverAgent& receiver,
                                             const Message& message,
                                             nn::Tape& tape) {
  return receiver_forward(
      receiver, to_relaxed(message, receiver.config().vocab_size, tape), tape);
}

std::pair<Matrix, Matrix> receiver_eval_batch(
    const ReceiverAgent& receiver, const std::vector<Message>& messages) {
  if (messages.empty()) throw DomainError("receiver_eval_batch: no messages");
  const auto& p = receiver.params();
  const auto& cfg = receiver.config();
  const Index n = static_cast<Index>(messages.size());
  const std::size_t length = messages.front().symbols.size();
  if (length == 0) throw DomainError("receiver_eval_batch: empty message");

  const Matrix& embed = p.at("embed").value;
  const Matrix& w_ih = p.at("cell_w_ih").value;
  const Matrix& w_hh = p.at("cell_w_hh").value;
  const Vector cell_b = p.at("cell_b").value.col(0);

  Matrix hidden = Matrix::Zero(cfg.hidden_dim, n);
  for (std::size_t t = 0; t < length; ++t) {
    Matrix inputs(embed.rows(), n);
    for (Index j = 0; j < n; ++j) {
      const auto& symbols = messages[static_cast<std::size_t>(j)].symbols;
      if (symbols.size() != length) {
        throw ShapeError("receiver_eval_batch: ragged message lengths");
      }
      const int s = symbols[t];
      if (s < 0 || s >= cfg.vocab_size) {
        throw DomainError("receiver_eval_batch: symbol out of vocabulary");
      }
      inputs.col(j) = embed.col(s);
    }
    hidden = ((w_ih * inputs + w_hh * hidden).colwise() + cell_b)
                 .array()
                 .tanh()
                 .matrix();
  }
  Matrix features = ((p.at("head_w").value * hidden).colwise() +
                     Vector(p.at("head_b").value.col(0)))
                        .array()
                        .tanh()
                        .matrix();
  Matrix color = (p.at("color_w").value * features).colwise() +
                 Vector(p.at("color_b").value.col(0));
  Matrix shape = (p.at("shape_w").value * features).colwise() +
                 Vector(p.at("shape_b").value.col(0));
  for (Index j = 0; j < n; ++j) {
    color.col(j) = nn::log_softmax_value(color.col(j));
    shape.col(j) = nn::log_softmax_value(shape.col(j));
  }
  return {std::move(color), std::move(shape)};
}

std::pair<Vector, Vector> receiver_eval(const ReceiverAgent& receiver,
                                        const Message& message) {
  auto [color, shape] = receiver_eval_batch(receiver, {message});
  return {color.col(0), shape.col(0)};
}

nn::Var marginal_log_prob(nn::Tape& tape,
                          const std::pair<nn::Var, nn::Var>& joint,
                          ConceptGroup group, Index target) {
  const nn::Var& selected =
      group == ConceptGroup::kColor ? joint.first : joint.second;
  if (target < 0 || target >= tape.value(selected).size()) {
    throw DomainError("marginal_log_prob: target index out of range");
  }
  return nn::pick(tape, selected, target);
}

Message one_hot_message(const RelaxedMessage& symbols, const nn::Tape& tape) {
  Message message;
  message.symbols.reserve(symbols.size());
  for (const nn::Var& v : symbols) {
    message.symbols.push_back(argmax(tape.value(v)));
  }
  return message;
}

RelaxedMessage to_relaxed(const Message& message, int vocab_size,
                          nn::Tape& tape) {
  RelaxedMessage symbols;
  symbols.reserve(message.symbols.size());
  for (int s : message.symbols) {
    if (s < 0 || s >= vocab_size) {
      throw DomainError("to_relaxed: symbol out of vocabulary");
    }
    Vector one_hot = Vector::Zero(vocab_size);
    one_hot[s] = 1.0;
    symbols.push_back(tape.constant(std::move(one_hot)));
  }
  return symbols;
}

}  // namespace sigcomp::agents

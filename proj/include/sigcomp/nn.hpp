#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sigcomp/rng.hpp"
#include "sigcomp/types.hpp"

namespace sigcomp::nn {

// One named parameter: value plus a same-shaped gradient buffer and Adam
// state. Vectors are stored as n x 1 matrices; `rank` keeps the declared
// shape for serialization.
struct Param {
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  std::int64_t steps = 0;
  int rank = 2;
};

class ParamStore {
 public:
  Param& add_matrix(const std::string& name, Index rows, Index cols);
  Param& add_vector(const std::string& name, Index size);

  // Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) fill.
  Param& add_matrix_init(const std::string& name, Index rows, Index cols,
                         Index fan_in, Rng& rng);
  Param& add_vector_init(const std::string& name, Index size, Index fan_in,
                         Rng& rng);

  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grads();
  std::int64_t total_steps() const;
  Index total_coefficients() const;

  // Sorted by name, so iteration order is deterministic.
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Param> entries_;
};

// Handle to a value recorded on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Record of one forward pass. Backward replays the recorded adjoint closures
// in reverse, accumulating into tape slots and Param::grad buffers. One tape
// serves one forward/backward cycle; build a fresh one per batch.
class Tape {
 public:
  Var constant(Vector value);

  const Vector& value(Var v) const;
  Vector& grad(Var v);

  // Runs adjoints in reverse; `loss` must hold a single coefficient. Grad
  // buffers on the tape are (re)zeroed first; Param::grad accumulates on top
  // of whatever the caller left there (normally zeros).
  void backward(Var loss);

  // Implementation hooks for ops: append a value slot, then append the
  // adjoint closure (which may capture the returned Var).
  Var emit(Vector value, std::function<void(Tape&)> adjoint);
  void record(std::function<void(Tape&)> adjoint);
  std::size_t node_count() const { return adjoints_.size(); }

 private:
  std::vector<Vector> values_;
  std::vector<Vector> grads_;
  std::vector<std::function<void(Tape&)>> adjoints_;
};

// --- Primitive ops ---------------------------------------------------------
// Each op validates shapes (ShapeError), computes the forward value, and
// records the adjoint rule for every differentiable operand.

// w.value * x + b.value
Var linear(Tape& tape, Param& w, Param& b, Var x);
// w.value * x (embedding lookup against a relaxed symbol is this product)
Var matvec(Tape& tape, Param& w, Var x);
// tanh(w_ih * input + w_hh * hidden + b)
Var rnn_cell(Tape& tape, Param& w_ih, Param& w_hh, Param& b, Var input,
             Var hidden);
Var tanh_activation(Tape& tape, Var x);
// Numerically stable log softmax; NumericsError on non-finite input.
Var log_softmax(Tape& tape, Var logits);
// softmax((logits + g) / tau) with Gumbel noise g drawn from rng. Gradient
// flows through logits and tau, not g. DomainError when tau <= 0.
Var gumbel_softmax_sample(Tape& tape, Var logits, Var temperature, Rng& rng);
Var gumbel_softmax_sample(Tape& tape, Var logits, double temperature, Rng& rng);
// floor + softplus(rho): the trainable-temperature parameterization.
Var softplus_shift(Tape& tape, Param& rho, double floor);
// v[index] as a one-coefficient value.
Var pick(Tape& tape, Var v, Index index);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var v, double factor);

// Plain-value counterparts used by evaluation paths (no tape, no gradients).
Vector log_softmax_value(const Vector& logits);
Vector softmax_value(const Vector& z);

// --- Optimizer --------------------------------------------------------------

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every entry; gradients are zeroed and step counts
// incremented afterwards.
void adam_step(ParamStore& store, double lr, const AdamOptions& opts = {});

// --- Gradient checking ------------------------------------------------------

// `loss_fn(compute_grad)` evaluates the loss for the store's current values;
// when compute_grad is true it must also leave analytic gradients in the
// store. Central differences (h = 1e-5) on up to max_coords_per_entry
// coordinates per entry, picked with `rng`. Returns the max relative error
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<double(bool compute_grad)>& loss_fn,
                  ParamStore& store, Rng& rng, int max_coords_per_entry = 40);

}  // namespace sigcomp::nn

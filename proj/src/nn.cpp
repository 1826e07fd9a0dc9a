#include "sigcomp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "sigcomp/errors.hpp"

namespace sigcomp::nn {

namespace {

Param make_param(Index rows, Index cols, int rank) {
  Param p;
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  p.adam_m = Matrix::Zero(rows, cols);
  p.adam_v = Matrix::Zero(rows, cols);
  p.rank = rank;
  return p;
}

void fill_uniform(Matrix& m, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
}

}  // namespace

Param& ParamStore::add_matrix(const std::string& name, Index rows, Index cols) {
  auto [it, inserted] = entries_.emplace(name, make_param(rows, cols, 2));
  if (!inserted) throw DomainError("duplicate parameter name: " + name);
  return it->second;
}

Param& ParamStore::add_vector(const std::string& name, Index size) {
  auto [it, inserted] = entries_.emplace(name, make_param(size, 1, 1));
  if (!inserted) throw DomainError("duplicate parameter name: " + name);
  return it->second;
}

Param& ParamStore::add_matrix_init(const std::string& name, Index rows,
                                   Index cols, Index fan_in, Rng& rng) {
  Param& p = add_matrix(name, rows, cols);
  fill_uniform(p.value, fan_in, rng);
  return p;
}

Param& ParamStore::add_vector_init(const std::string& name, Index size,
                                   Index fan_in, Rng& rng) {
  Param& p = add_vector(name, size);
  fill_uniform(p.value, fan_in, rng);
  return p;
}

Param& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DomainError("no such parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DomainError("no such parameter: " + name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : entries_) p.grad.setZero();
}

std::int64_t ParamStore::total_steps() const {
  std::int64_t total = 0;
  for (const auto& [name, p] : entries_) total += p.steps;
  return total;
}

Index ParamStore::total_coefficients() const {
  Index total = 0;
  for (const auto& [name, p] : entries_) total += p.value.size();
  return total;
}

// --- Tape -------------------------------------------------------------------

Var Tape::constant(Vector value) {
  values_.push_back(std::move(value));
  grads_.emplace_back();
  return Var{static_cast<std::int32_t>(values_.size() - 1)};
}

Var Tape::emit(Vector value, std::function<void(Tape&)> adjoint) {
  Var v = constant(std::move(value));
  adjoints_.push_back(std::move(adjoint));
  return v;
}

void Tape::record(std::function<void(Tape&)> adjoint) {
  adjoints_.push_back(std::move(adjoint));
}

const Vector& Tape::value(Var v) const {
  return values_[static_cast<std::size_t>(v.id)];
}

Vector& Tape::grad(Var v) {
  auto& g = grads_[static_cast<std::size_t>(v.id)];
  if (g.size() == 0) {
    g = Vector::Zero(values_[static_cast<std::size_t>(v.id)].size());
  }
  return g;
}

void Tape::backward(Var loss) {
  if (!loss.valid()) throw DomainError("backward on an invalid Var");
  if (value(loss).size() != 1) throw ShapeError("loss must be a single value");
  for (auto& g : grads_) {
    if (g.size() != 0) g.setZero();
  }
  grad(loss)[0] = 1.0;
  for (auto it = adjoints_.rbegin(); it != adjoints_.rend(); ++it) {
    (*it)(*this);
  }
}

// --- Ops --------------------------------------------------------------------

Var linear(Tape& tape, Param& w, Param& b, Var x) {
  const Vector& xv = tape.value(x);
  if (w.value.cols() != xv.size() || b.value.rows() != w.value.rows()) {
    throw ShapeError("linear: operand shapes disagree");
  }
  Var y = tape.constant(w.value * xv + b.value.col(0));
  Param* wp = &w;
  Param* bp = &b;
  tape.record([wp, bp, x, y](Tape& t) {
    const Vector& gy = t.grad(y);
    wp->grad.noalias() += gy * t.value(x).transpose();
    bp->grad.col(0) += gy;
    t.grad(x).noalias() += wp->value.transpose() * gy;
  });
  return y;
}

Var matvec(Tape& tape, Param& w, Var x) {
  const Vector& xv = tape.value(x);
  if (w.value.cols() != xv.size()) {
    throw ShapeError("matvec: operand shapes disagree");
  }
  Var y = tape.constant(w.value * xv);
  Param* wp = &w;
  tape.record([wp, x, y](Tape& t) {
    const Vector& gy = t.grad(y);
    wp->grad.noalias() += gy * t.value(x).transpose();
    t.grad(x).noalias() += wp->value.transpose() * gy;
  });
  return y;
}

Var rnn_cell(Tape& tape, Param& w_ih, Param& w_hh, Param& b, Var input,
             Var hidden) {
  const Vector& in = tape.value(input);
  const Vector& h = tape.value(hidden);
  if (w_ih.value.cols() != in.size() || w_hh.value.cols() != h.size() ||
      w_ih.value.rows() != w_hh.value.rows() ||
      b.value.rows() != w_hh.value.rows() || w_hh.value.rows() != h.size()) {
    throw ShapeError("rnn_cell: operand shapes disagree");
  }
  Vector pre = w_ih.value * in + w_hh.value * h + b.value.col(0);
  Var out = tape.constant(pre.array().tanh().matrix());
  Param* wip = &w_ih;
  Param* whp = &w_hh;
  Param* bp = &b;
  tape.record([wip, whp, bp, input, hidden, out](Tape& t) {
    const Vector& y = t.value(out);
    // d tanh(a) = 1 - tanh(a)^2
    Vector da = (t.grad(out).array() * (1.0 - y.array().square())).matrix();
    wip->grad.noalias() += da * t.value(input).transpose();
    whp->grad.noalias() += da * t.value(hidden).transpose();
    bp->grad.col(0) += da;
    t.grad(input).noalias() += wip->value.transpose() * da;
    t.grad(hidden).noalias() += whp->value.transpose() * da;
  });
  return out;
}

Var tanh_activation(Tape& tape, Var x) {
  Var y = tape.constant(tape.value(x).array().tanh().matrix());
  tape.record([x, y](Tape& t) {
    const Vector& yv = t.value(y);
    t.grad(x).array() += t.grad(y).array() * (1.0 - yv.array().square());
  });
  return y;
}

Vector log_softmax_value(const Vector& logits) {
  const double max = logits.maxCoeff();
  const Vector shifted = logits.array() - max;
  const double lse = std::log(shifted.array().exp().sum());
  return shifted.array() - lse;
}

Vector softmax_value(const Vector& z) {
  const Vector shifted = z.array() - z.maxCoeff();
  Vector e = shifted.array().exp();
  return e / e.sum();
}

Var log_softmax(Tape& tape, Var logits) {
  const Vector& z = tape.value(logits);
  if (z.size() == 0) throw ShapeError("log_softmax: empty input");
  if (!z.allFinite()) throw NumericsError("log_softmax: non-finite input");
  Var y = tape.constant(log_softmax_value(z));
  tape.record([logits, y](Tape& t) {
    const Vector& gy = t.grad(y);
    const double total = gy.sum();
    t.grad(logits) += gy - total * t.value(y).array().exp().matrix();
  });
  return y;
}

namespace {

Var gumbel_softmax_impl(Tape& tape, Var logits, Var temperature, Rng& rng) {
  const Vector& z = tape.value(logits);
  const double tau = tape.value(temperature)[0];
  if (tau <= 0.0) throw DomainError("gumbel_softmax_sample: temperature <= 0");
  Vector noise(z.size());
  for (Index i = 0; i < noise.size(); ++i) {
    double u = rng.uniform();
    if (u < 1e-12) u = 1e-12;
    if (u > 1.0 - 1e-12) u = 1.0 - 1e-12;
    noise[i] = -std::log(-std::log(u));
  }
  Vector scaled = (z + noise) / tau;
  Vector y = softmax_value(scaled);
  // Keep every coordinate strictly positive: extreme temperatures can
  // underflow exp() to exact zero.
  for (Index i = 0; i < y.size(); ++i) {
    y[i] = std::max(y[i], std::numeric_limits<double>::min());
  }
  Var out = tape.constant(y);
  tape.record([logits, temperature, out, scaled](Tape& t) {
    const Vector& yv = t.value(out);
    const Vector& gy = t.grad(out);
    const double tau_now = t.value(temperature)[0];
    const double dot = gy.dot(yv);
    // Softmax Jacobian applied to the upstream gradient.
    Vector dz = (yv.array() * (gy.array() - dot)).matrix();
    t.grad(logits) += dz / tau_now;
    t.grad(temperature)[0] += -dz.dot(scaled) / tau_now;
  });
  return out;
}

}  // namespace

Var gumbel_softmax_sample(Tape& tape, Var logits, Var temperature, Rng& rng) {
  if (tape.value(temperature).size() != 1) {
    throw ShapeError("gumbel_softmax_sample: temperature must be scalar");
  }
  return gumbel_softmax_impl(tape, logits, temperature, rng);
}

Var gumbel_softmax_sample(Tape& tape, Var logits, double temperature,
                          Rng& rng) {
  Var tau = tape.constant(Vector::Constant(1, temperature));
  return gumbel_softmax_impl(tape, logits, tau, rng);
}

Var softplus_shift(Tape& tape, Param& rho, double floor) {
  if (rho.value.size() != 1) {
    throw ShapeError("softplus_shift: rho must be scalar");
  }
  const double r = rho.value(0, 0);
  // log1p(exp(r)) computed stably on both tails.
  const double sp = r > 0.0 ? r + std::log1p(std::exp(-r)) : std::log1p(std::exp(r));
  Var out = tape.constant(Vector::Constant(1, floor + sp));
  Param* rp = &rho;
  tape.record([rp, out, r](Tape& t) {
    const double sigmoid = 1.0 / (1.0 + std::exp(-r));
    rp->grad(0, 0) += t.grad(out)[0] * sigmoid;
  });
  return out;
}

Var pick(Tape& tape, Var v, Index index) {
  const Vector& value = tape.value(v);
  if (index < 0 || index >= value.size()) {
    throw DomainError("pick: index out of range");
  }
  Var out = tape.constant(Vector::Constant(1, value[index]));
  tape.record([v, out, index](Tape& t) {
    t.grad(v)[index] += t.grad(out)[0];
  });
  return out;
}

Var add(Tape& tape, Var a, Var b) {
  if (tape.value(a).size() != tape.value(b).size()) {
    throw ShapeError("add: size mismatch");
  }
  Var out = tape.constant(tape.value(a) + tape.value(b));
  tape.record([a, b, out](Tape& t) {
    t.grad(a) += t.grad(out);
    t.grad(b) += t.grad(out);
  });
  return out;
}

Var scale(Tape& tape, Var v, double factor) {
  Var out = tape.constant(tape.value(v) * factor);
  tape.record([v, out, factor](Tape& t) {
    t.grad(v) += factor * t.grad(out);
  });
  return out;
}

// --- Optimizer ----------------------------------------------------------------

void adam_step(ParamStore& store, double lr, const AdamOptions& opts) {
  for (auto& [name, p] : store) {
    p.steps += 1;
    const double t = static_cast<double>(p.steps);
    p.adam_m = opts.beta1 * p.adam_m + (1.0 - opts.beta1) * p.grad;
    p.adam_v.array() = opts.beta2 * p.adam_v.array() +
                       (1.0 - opts.beta2) * p.grad.array().square();
    const double m_corr = 1.0 - std::pow(opts.beta1, t);
    const double v_corr = 1.0 - std::pow(opts.beta2, t);
    p.value.array() -= lr * (p.adam_m.array() / m_corr) /
                       ((p.adam_v.array() / v_corr).sqrt() + opts.eps);
    p.grad.setZero();
  }
}

// --- Gradient checking --------------------------------------------------------

double grad_check(const std::function<double(bool compute_grad)>& loss_fn,
                  ParamStore& store, Rng& rng, int max_coords_per_entry) {
  constexpr double kStep = 1e-5;

  store.zero_grads();
  const double base = loss_fn(true);
  if (!std::isfinite(base)) throw NumericsError("grad_check: non-finite loss");

  // Snapshot the analytic gradients before finite differencing overwrites
  // anything.
  std::map<std::string, Matrix> analytic;
  for (auto& [name, p] : store) analytic.emplace(name, p.grad);

  double max_rel_err = 0.0;
  for (auto& [name, p] : store) {
    const Index n = p.value.size();
    std::vector<Index> coords;
    if (n <= max_coords_per_entry) {
      for (Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords_per_entry; ++i) {
        coords.push_back(static_cast<Index>(rng.uniform_int(static_cast<int>(n))));
      }
    }
    double* data = p.value.data();
    const Matrix& g = analytic.at(name);
    for (Index c : coords) {
      const double saved = data[c];
      data[c] = saved + kStep;
      const double up = loss_fn(false);
      data[c] = saved - kStep;
      const double down = loss_fn(false);
      data[c] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericsError("grad_check: non-finite loss during perturbation");
      }
      const double numeric = (up - down) / (2.0 * kStep);
      const double a = g.data()[c];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel_err = std::max(max_rel_err, std::abs(a - numeric) / denom);
    }
  }

  // Leave the analytic gradients in place for callers that inspect them.
  for (auto& [name, p] : store) p.grad = analytic.at(name);
  return max_rel_err;
}

}  // namespace sigcomp::nn

#pragma once

// Shared test helpers.

#include <algorithm>
#include <cstdint>

#include "sigcomp/agents.hpp"
#include "sigcomp/core.hpp"
#include "sigcomp/games.hpp"
#include "sigcomp/nn.hpp"
#include "sigcomp/rng.hpp"

namespace sigcomp::testsupport {

struct CompositeSpec {
  int n_colors = 3;
  int n_shapes = 4;
  int vocab_size = 6;
  int message_length = 2;
  int hidden_dim = 12;
  int embed_dim = 7;
  int batch_size = 2;
  std::uint64_t init_seed = 1;
  std::uint64_t noise_seed = 2;
};

// Max relative grad-check error over sender and receiver parameters for the
// full sampled naming-game loss with frozen Gumbel noise.
inline double composite_grad_check(const CompositeSpec& spec) {
  core::AttributeSpace space{spec.n_colors, spec.n_shapes,
                             core::Encoding::one_hot()};
  auto dataset = core::build_dataset(space);
  std::vector<core::ObjectInstance> batch(
      dataset.begin(),
      dataset.begin() + std::min<std::size_t>(dataset.size(),
                                              (std::size_t)spec.batch_size));

  Rng init(spec.init_seed);
  agents::SenderConfig sc;
  sc.obs_dim = spec.n_colors + spec.n_shapes;
  sc.hidden_dim = spec.hidden_dim;
  sc.vocab_size = spec.vocab_size;
  sc.embed_dim = spec.embed_dim;
  sc.message_length = spec.message_length;
  agents::SenderAgent sender(sc, init);

  agents::ReceiverConfig rc;
  rc.n_colors = spec.n_colors;
  rc.n_shapes = spec.n_shapes;
  rc.hidden_dim = spec.hidden_dim;
  rc.vocab_size = spec.vocab_size;
  rc.embed_dim = spec.embed_dim;
  agents::ReceiverAgent receiver(rc, init);

  auto loss_fn = [&](bool compute_grad) {
    // Fresh tape and identical noise stream per evaluation.
    nn::Tape tape;
    Rng noise(spec.noise_seed);
    nn::Var loss = games::naming_game_loss(sender, receiver, batch, noise, tape);
    if (compute_grad) {
      tape.backward(loss);
    } else {
      // grad_check perturbs one store while the closure also owns the other;
      // clear any grads the value-only pass must not leave behind.
    }
    return tape.value(loss)[0];
  };

  // The analytic pass writes into both stores; check each against finite
  // differences of the shared loss.
  Rng check_a(spec.init_seed ^ 0x9e3779b9ull);
  auto fn_sender = [&](bool g) {
    if (g) receiver.params().zero_grads();
    return loss_fn(g);
  };
  const double err_sender = nn::grad_check(fn_sender, sender.params(), check_a, 12);
  Rng check_b(spec.noise_seed ^ 0x51ed2701ull);
  auto fn_receiver = [&](bool g) {
    if (g) sender.params().zero_grads();
    return loss_fn(g);
  };
  const double err_receiver =
      nn::grad_check(fn_receiver, receiver.params(), check_b, 12);
  return std::max(err_sender, err_receiver);
}

}  // namespace sigcomp::testsupport

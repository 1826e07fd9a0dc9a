#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sigcomp/agents.hpp"
#include "sigcomp/checkpoint.hpp"
#include "sigcomp/errors.hpp"
#include "support.hpp"

using namespace sigcomp;
using agents::Message;
using agents::ReceiverAgent;
using agents::ReceiverConfig;
using agents::SenderAgent;
using agents::SenderConfig;

namespace {

SenderConfig small_sender(int length) {
  SenderConfig sc;
  sc.obs_dim = 10;
  sc.hidden_dim = 16;
  sc.vocab_size = 10;
  sc.embed_dim = 5;
  sc.message_length = length;
  return sc;
}

ReceiverConfig small_receiver() {
  ReceiverConfig rc;
  rc.n_colors = 5;
  rc.n_shapes = 5;
  rc.hidden_dim = 16;
  rc.vocab_size = 10;
  rc.embed_dim = 5;
  return rc;
}

Vector one_hot_obs(int color, int shape) {
  Vector obs = Vector::Zero(10);
  obs[color] = 1.0;
  obs[5 + shape] = 1.0;
  return obs;
}

}  // namespace

TEST_CASE("sender emits T simplex vectors during training") {
  for (int length : {1, 2}) {
    Rng init(3);
    SenderAgent sender(small_sender(length), init);
    Rng noise(4);
    nn::Tape tape;
    const auto message =
        agents::sender_forward_train(sender, one_hot_obs(1, 2), noise, tape);
    REQUIRE(message.size() == static_cast<std::size_t>(length));
    for (const auto& symbol : message) {
      const Vector& y = tape.value(symbol);
      REQUIRE(y.size() == 10);
      CHECK(y.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(y.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("sender training forward is deterministic given the rng seed") {
  Rng init(3);
  SenderAgent sender(small_sender(2), init);
  auto run = [&](std::uint64_t seed) {
    Rng noise(seed);
    nn::Tape tape;
    auto message =
        agents::sender_forward_train(sender, one_hot_obs(0, 0), noise, tape);
    std::vector<Vector> values;
    for (auto symbol : message) values.push_back(tape.value(symbol));
    return values;
  };
  const auto a = run(42);
  const auto b = run(42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  const auto c = run(43);
  CHECK(a[0] != c[0]);
}

TEST_CASE("sender eval decoding is deterministic and in-vocabulary") {
  Rng init(7);
  SenderAgent sender(small_sender(2), init);
  const Message m1 = agents::sender_forward_eval(sender, one_hot_obs(2, 3));
  const Message m2 = agents::sender_forward_eval(sender, one_hot_obs(2, 3));
  CHECK(m1 == m2);
  REQUIRE(m1.symbols.size() == 2);
  for (int s : m1.symbols) {
    CHECK(s >= 0);
    CHECK(s < 10);
  }
}

TEST_CASE("sender temperature starts at 1.0 over a 0.5 floor") {
  Rng init(11);
  SenderAgent sender(small_sender(2), init);
  CHECK(sender.temperature() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("receiver groups are normalized and reject empty messages") {
  Rng init(5);
  ReceiverAgent receiver(small_receiver(), init);
  nn::Tape tape;
  auto [color_lp, shape_lp] =
      agents::receiver_forward(receiver, Message{{3, 7}}, tape);
  CHECK(tape.value(color_lp).array().exp().sum() ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tape.value(shape_lp).array().exp().sum() ==
        doctest::Approx(1.0).epsilon(1e-12));

  nn::Tape tape2;
  CHECK_THROWS_AS(
      agents::receiver_forward(receiver, agents::RelaxedMessage{}, tape2),
      DomainError);
}

TEST_CASE("hard messages equal their relaxed one-hot form") {
  Rng init(5);
  ReceiverAgent receiver(small_receiver(), init);

  nn::Tape tape;
  auto hard = agents::receiver_forward(receiver, Message{{3, 7}}, tape);
  auto relaxed_syms = agents::to_relaxed(Message{{3, 7}}, 10, tape);
  auto relaxed = agents::receiver_forward(receiver, relaxed_syms, tape);
  CHECK(tape.value(hard.first) == tape.value(relaxed.first));
  CHECK(tape.value(hard.second) == tape.value(relaxed.second));

  // Tape-free evaluation agrees with the tape path.
  const auto [color_lp, shape_lp] = agents::receiver_eval(receiver, Message{{3, 7}});
  for (Index i = 0; i < 5; ++i) {
    CHECK(color_lp[i] ==
          doctest::Approx(tape.value(hard.first)[i]).epsilon(1e-12));
    CHECK(shape_lp[i] ==
          doctest::Approx(tape.value(hard.second)[i]).epsilon(1e-12));
  }
}

TEST_CASE("receiver batch evaluation matches single evaluation") {
  Rng init(9);
  ReceiverAgent receiver(small_receiver(), init);
  std::vector<Message> messages{{{0, 0}}, {{3, 7}}, {{9, 1}}, {{5, 5}}};
  const auto [colors, shapes] = agents::receiver_eval_batch(receiver, messages);
  REQUIRE(colors.cols() == 4);
  for (std::size_t j = 0; j < messages.size(); ++j) {
    const auto [c, s] = agents::receiver_eval(receiver, messages[j]);
    for (Index i = 0; i < 5; ++i) {
      CHECK(colors(i, static_cast<Index>(j)) == doctest::Approx(c[i]).epsilon(1e-12));
      CHECK(shapes(i, static_cast<Index>(j)) == doctest::Approx(s[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("receiver gradients pass the finite-difference check") {
  Rng init(13);
  ReceiverConfig rc = small_receiver();
  ReceiverAgent receiver(rc, init);

  auto loss_fn = [&](bool compute_grad) {
    nn::Tape tape;
    auto joint = agents::receiver_forward(receiver, Message{{2, 8}}, tape);
    nn::Var lc = agents::marginal_log_prob(tape, joint,
                                           agents::ConceptGroup::kColor, 1);
    nn::Var ls = agents::marginal_log_prob(tape, joint,
                                           agents::ConceptGroup::kShape, 4);
    nn::Var loss = nn::scale(tape, nn::add(tape, lc, ls), -1.0);
    if (compute_grad) tape.backward(loss);
    return tape.value(loss)[0];
  };
  Rng check(14);
  CHECK(nn::grad_check(loss_fn, receiver.params(), check, 10) < 1e-4);
}

TEST_CASE("marginals agree with explicit summation over the joint") {
  Rng init(21);
  ReceiverAgent receiver(small_receiver(), init);
  nn::Tape tape;
  auto joint = agents::receiver_forward(receiver, Message{{4, 2}}, tape);

  const Vector color_lp = tape.value(joint.first);
  const Vector shape_lp = tape.value(joint.second);
  for (int c = 0; c < 5; ++c) {
    // Sum over shapes of exp(joint log-prob at (c, s)).
    double marginal = 0.0;
    for (int s = 0; s < 5; ++s) marginal += std::exp(color_lp[c] + shape_lp[s]);
    nn::Var picked = agents::marginal_log_prob(
        tape, joint, agents::ConceptGroup::kColor, c);
    CHECK(std::log(marginal) ==
          doctest::Approx(tape.value(picked)[0]).epsilon(1e-12));
  }

  // Marginal color + marginal shape equals the joint at the pair.
  nn::Var lc = agents::marginal_log_prob(tape, joint, agents::ConceptGroup::kColor, 3);
  nn::Var ls = agents::marginal_log_prob(tape, joint, agents::ConceptGroup::kShape, 2);
  CHECK(tape.value(lc)[0] + tape.value(ls)[0] ==
        doctest::Approx(color_lp[3] + shape_lp[2]).epsilon(1e-12));

  CHECK_THROWS_AS(
      agents::marginal_log_prob(tape, joint, agents::ConceptGroup::kColor, 9),
      DomainError);
}

TEST_CASE("uniform color group marginal is -ln k") {
  nn::Tape tape;
  nn::Var color = tape.constant(Vector::Constant(5, -std::log(5.0)));
  nn::Var shape = tape.constant(Vector::Constant(5, -std::log(5.0)));
  for (int c = 0; c < 5; ++c) {
    nn::Var lp = agents::marginal_log_prob(tape, {color, shape},
                                           agents::ConceptGroup::kColor, c);
    CHECK(tape.value(lp)[0] == doctest::Approx(-std::log(5.0)).epsilon(1e-12));
  }
}

TEST_CASE("composite sender-receiver loss passes grad_check") {
  testsupport::CompositeSpec spec;
  CHECK(testsupport::composite_grad_check(spec) < 1e-4);
  spec.message_length = 1;
  spec.init_seed = 5;
  spec.noise_seed = 9;
  CHECK(testsupport::composite_grad_check(spec) < 1e-4);
}

TEST_CASE("checkpoints round-trip stores bitwise") {
  Rng init(33);
  SenderAgent sender(small_sender(2), init);
  ReceiverAgent receiver(small_receiver(), init);

  checkpoint::EntryMap entries;
  checkpoint::add_store(entries, "sender/", sender.params());
  checkpoint::add_store(entries, "receiver/", receiver.params());
  checkpoint::add_meta(entries, "meta/answer", 42.0);

  const auto bytes = checkpoint::serialize(entries);
  REQUIRE(bytes.size() > 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) ==
        std::string("SFCKPT1\0", 8));

  const auto parsed = checkpoint::deserialize(bytes);
  CHECK(parsed.size() == entries.size());
  CHECK(checkpoint::get_meta(parsed, "meta/answer") == 42.0);

  Rng other(99);
  SenderAgent restored(small_sender(2), other);
  checkpoint::load_store(parsed, "sender/", restored.params());
  for (const auto& [name, param] : sender.params()) {
    CHECK(restored.params().at(name).value == param.value);
  }

  // Second serialization of the restored store is byte-identical.
  checkpoint::EntryMap entries2;
  checkpoint::add_store(entries2, "sender/", restored.params());
  checkpoint::add_store(entries2, "receiver/", receiver.params());
  checkpoint::add_meta(entries2, "meta/answer", 42.0);
  CHECK(checkpoint::serialize(entries2) == bytes);
}

TEST_CASE("checkpoint loader rejects missing and misshapen entries") {
  Rng init(3);
  SenderAgent sender(small_sender(2), init);
  checkpoint::EntryMap entries;
  checkpoint::add_store(entries, "sender/", sender.params());

  Rng other(4);
  SenderAgent bigger(small_sender(3), other);  // same shapes, fine
  CHECK_NOTHROW(checkpoint::load_store(entries, "sender/", bigger.params()));

  SenderConfig wide = small_sender(2);
  wide.hidden_dim = 24;
  Rng third(5);
  SenderAgent mismatched(wide, third);
  CHECK_THROWS_AS(checkpoint::load_store(entries, "sender/", mismatched.params()),
                  IngestError);

  checkpoint::EntryMap empty;
  CHECK_THROWS_AS(checkpoint::load_store(empty, "sender/", sender.params()),
                  IngestError);
  CHECK_THROWS_AS(checkpoint::deserialize({1, 2, 3}), IngestError);
}

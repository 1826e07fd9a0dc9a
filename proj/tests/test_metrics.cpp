#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "sigcomp/errors.hpp"
#include "sigcomp/metrics.hpp"
#include "sigcomp/rng.hpp"

using namespace sigcomp;
using agents::Message;

#ifndef SIGCOMP_TEST_DATA_DIR
#define SIGCOMP_TEST_DATA_DIR "tests/data"
#endif

namespace {

// Reference edit distance: full-matrix DP, written independently of the
// production single-row implementation.
int reference_levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<std::vector<int>> d(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 0; i <= m; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= n; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[m][n];
}

// Reference Spearman: average ranks by explicit counting, then Pearson.
double reference_spearman(const std::vector<double>& x,
                          const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0.0, equal = 0.0;
      for (double other : v) {
        if (other < v[i]) ++less;
        if (other == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= rx.size();
  my /= ry.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TrainedProtocol make_protocol(int n_colors, int n_shapes,
                              const std::vector<Message>& table) {
  TrainedProtocol p;
  p.n_colors = n_colors;
  p.n_shapes = n_shapes;
  p.message_length = static_cast<int>(table.front().symbols.size());
  p.table = table;
  return p;
}

// Position 0 encodes color with symbols 0..4, position 1 encodes shape with
// symbols 5..9.
TrainedProtocol perfect_protocol() {
  std::vector<Message> table;
  for (int c = 0; c < 5; ++c) {
    for (int s = 0; s < 5; ++s) table.push_back(Message{{c, 5 + s}});
  }
  return make_protocol(5, 5, table);
}

TrainedProtocol constant_protocol() {
  std::vector<Message> table(25, Message{{0, 0}});
  return make_protocol(5, 5, table);
}

}  // namespace

TEST_CASE("levenshtein on the worked examples") {
  const std::vector<int> a{1, 8}, b{1, 9}, c{8, 1};
  CHECK(metrics::levenshtein(a, a) == 0);
  CHECK(metrics::levenshtein(a, b) == 1);
  CHECK(metrics::levenshtein(a, c) == 2);
  CHECK(metrics::levenshtein(std::vector<int>{}, a) == 2);
  CHECK(metrics::levenshtein(std::vector<int>{1, 2, 3}, std::vector<int>{2, 3}) == 1);
}

TEST_CASE("levenshtein matches the reference DP on 1000 random pairs") {
  Rng rng(71);
  for (int trial = 0; trial < 1000; ++trial) {
    auto draw = [&] {
      std::vector<int> s(static_cast<std::size_t>(rng.uniform_int(7)));
      for (auto& v : s) v = rng.uniform_int(10);
      return s;
    };
    const auto a = draw();
    const auto b = draw();
    CHECK(metrics::levenshtein(a, b) == reference_levenshtein(a, b));
  }
}

TEST_CASE("levenshtein satisfies the metric axioms") {
  Rng rng(73);
  auto draw = [&] {
    std::vector<int> s(static_cast<std::size_t>(rng.uniform_int(7)));
    for (auto& v : s) v = rng.uniform_int(10);
    return s;
  };
  for (int trial = 0; trial < 400; ++trial) {
    const auto a = draw(), b = draw(), c = draw();
    const int ab = metrics::levenshtein(a, b);
    const int ba = metrics::levenshtein(b, a);
    CHECK(ab >= 0);
    CHECK(ab == ba);
    CHECK((ab == 0) == (a == b));
    CHECK(ab <= metrics::levenshtein(a, c) + metrics::levenshtein(c, b));
  }
}

TEST_CASE("spearman on the worked examples") {
  const std::vector<double> x{1, 2, 3}, y{10, 20, 30}, z{3, 2, 1};
  CHECK(metrics::spearman_rho(x, y).value == doctest::Approx(1.0));
  CHECK(metrics::spearman_rho(x, z).value == doctest::Approx(-1.0));

  const std::vector<double> tied_x{0, 1, 1, 2}, tied_y{0, 2, 2, 2};
  CHECK(metrics::spearman_rho(tied_x, tied_y).value ==
        doctest::Approx(0.81649658092772603).epsilon(1e-12));

  const std::vector<double> flat{1, 1, 1};
  const auto degenerate = metrics::spearman_rho(flat, x);
  CHECK(degenerate.degenerate);
  CHECK(degenerate.value == 0.0);

  CHECK_THROWS_AS(metrics::spearman_rho(x, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("spearman matches the reference on 1000 random tied vectors") {
  Rng rng(79);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform_int(12));
    std::vector<double> x(n), y(n);
    bool xs_const = true, ys_const = true;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse integer values force ties.
      x[i] = rng.uniform_int(4);
      y[i] = rng.uniform_int(4);
      if (x[i] != x[0]) xs_const = false;
      if (y[i] != y[0]) ys_const = false;
    }
    if (xs_const || ys_const) continue;
    const auto got = metrics::spearman_rho(x, y);
    REQUIRE(!got.degenerate);
    CHECK(got.value == doctest::Approx(reference_spearman(x, y)).epsilon(1e-9));
  }
}

TEST_CASE("spearman of x with itself and monotone transforms") {
  Rng rng(83);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(10);
    for (auto& v : x) v = rng.uniform(-5.0, 5.0);
    CHECK(metrics::spearman_rho(x, x).value == doctest::Approx(1.0));
    std::vector<double> y(x);
    for (auto& v : y) v = std::exp(0.5 * v) + 3.0;  // strictly monotone
    CHECK(metrics::spearman_rho(x, y).value == doctest::Approx(1.0));
  }
}

TEST_CASE("topographic similarity of the fixture protocols") {
  const auto t2b = metrics::read_protocol_path(
      std::string(SIGCOMP_TEST_DATA_DIR) + "/table2b.protocol");
  const auto t2a = metrics::read_protocol_path(
      std::string(SIGCOMP_TEST_DATA_DIR) + "/table2a.protocol");
  const auto high = metrics::topographic_similarity(t2b);
  const auto low = metrics::topographic_similarity(t2a);
  REQUIRE(!high.degenerate);
  REQUIRE(!low.degenerate);
  // Values are pinned to this implementation's estimator (all 300 unordered
  // pairs, tie-corrected Spearman), cross-checked against scipy.
  CHECK(high.value == doctest::Approx(0.87936487510041556).epsilon(1e-9));
  CHECK(low.value == doctest::Approx(0.28006431170837312).epsilon(1e-9));
  CHECK(high.value > low.value);
}

TEST_CASE("perfectly compositional protocols reach topo 1") {
  const auto result = metrics::topographic_similarity(perfect_protocol());
  REQUIRE(!result.degenerate);
  CHECK(result.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant protocols are degenerate for topo") {
  const auto result = metrics::topographic_similarity(constant_protocol());
  CHECK(result.degenerate);
  CHECK(result.value == 0.0);
}

TEST_CASE("pair distances have the right count and L_t range") {
  const auto d = metrics::pair_distances(perfect_protocol());
  CHECK(d.target.size() == 300);
  CHECK(d.message.size() == 300);
  for (std::size_t i = 0; i < d.target.size(); ++i) {
    CHECK(d.target[i] >= 1.0);
    CHECK(d.target[i] <= 2.0);
    CHECK(d.message[i] >= 0.0);
    CHECK(d.message[i] <= 2.0);
  }
}

TEST_CASE("topographic similarity is invariant to symbol relabeling") {
  Rng rng(89);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Message> table;
    for (int i = 0; i < 25; ++i) {
      table.push_back(Message{{rng.uniform_int(10), rng.uniform_int(10)}});
    }
    const auto protocol = make_protocol(5, 5, table);

    std::vector<int> perm(10);
    for (int i = 0; i < 10; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    auto relabeled = protocol;
    for (auto& m : relabeled.table) {
      for (auto& s : m.symbols) s = perm[static_cast<std::size_t>(s)];
    }
    const auto a = metrics::topographic_similarity(protocol);
    const auto b = metrics::topographic_similarity(relabeled);
    CHECK(a.degenerate == b.degenerate);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
  }
}

TEST_CASE("context independence of the canonical protocols") {
  // Token-level counting with p(k|v) normalized over all of v's concept
  // co-occurrences: the color token is 1 of 2 tokens (p(v|k) = 0.5) and half
  // of its co-occurrence mass sits on its color (p(k|v) = 0.5).
  CHECK(metrics::context_independence(perfect_protocol(), 10) ==
        doctest::Approx(0.25).epsilon(1e-12));
  // Constant protocol: p(0|k) = 1 and p(k|0) = 1/10 across the 10 concepts.
  CHECK(metrics::context_independence(constant_protocol(), 10) ==
        doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("context independence stays in [0,1] on random protocols") {
  Rng rng(97);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Message> table;
    for (int i = 0; i < 25; ++i) {
      table.push_back(Message{{rng.uniform_int(10), rng.uniform_int(10)}});
    }
    const double ci = metrics::context_independence(make_protocol(5, 5, table), 10);
    CHECK(ci >= 0.0);
    CHECK(ci <= 1.0);
  }
}

TEST_CASE("concept stats distributions normalize") {
  const auto stats = metrics::concept_stats(perfect_protocol(), 10);
  for (int k = 0; k < stats.n_concepts; ++k) {
    double sum = 0.0;
    for (int v = 0; v < stats.vocab_size; ++v) {
      sum += stats.p_symbol_given_concept(v, k);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int v = 0; v < stats.vocab_size; ++v) {
    double sum = 0.0;
    for (int k = 0; k < stats.n_concepts; ++k) {
      sum += stats.p_concept_given_symbol(k, v);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("protocol file round-trips") {
  const auto original = metrics::read_protocol_path(
      std::string(SIGCOMP_TEST_DATA_DIR) + "/table2b.protocol");
  const auto text = metrics::write_protocol_file(original);
  const auto reparsed = metrics::read_protocol_file(text);
  CHECK(reparsed.n_colors == original.n_colors);
  CHECK(reparsed.n_shapes == original.n_shapes);
  CHECK(reparsed.table == original.table);

  CHECK_THROWS_AS(metrics::read_protocol_file("5,5\n"), IngestError);
  CHECK_THROWS_AS(metrics::read_protocol_file("2,2,1\n0,0,1\n"), IngestError);
  CHECK_THROWS_AS(metrics::read_protocol_path("missing.protocol"), IngestError);
}

TEST_CASE("grid renderings round-trip the fixture") {
  const auto original = metrics::read_protocol_path(
      std::string(SIGCOMP_TEST_DATA_DIR) + "/table2b.protocol");
  core::AttributeSpace space{5, 5, core::Encoding::one_hot()};

  const std::string csv = metrics::render_protocol_csv(original, space);
  const auto reparsed = metrics::parse_protocol_csv(csv);
  CHECK(reparsed.n_colors == 5);
  CHECK(reparsed.n_shapes == 5);
  CHECK(reparsed.table == original.table);

  // 5 data rows + header.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

  const std::string text = metrics::render_protocol_text(original, space);
  CHECK(text.find('*') != std::string::npos);
}

TEST_CASE("zero-shot accuracy counts argmax hits") {
  Rng rng(101);
  agents::ReceiverConfig rc;
  rc.n_colors = 5;
  rc.n_shapes = 5;
  rc.hidden_dim = 16;
  rc.vocab_size = 10;
  rc.embed_dim = 5;
  agents::ReceiverAgent receiver(rc, rng);

  core::AttributeSpace space{5, 5, core::Encoding::one_hot()};
  const auto split = core::diagonal_split(core::build_dataset(space), space);

  // A sender that always says the same thing can match at most one cell.
  metrics::DeterministicSender constant_sender =
      [](const core::ObjectInstance&) { return Message{{0, 0}}; };
  const auto acc = metrics::zero_shot_eval(constant_sender, receiver, split);
  CHECK(acc.train_both <= 1.0 / 20.0 + 1e-12);

  // Rigged receiver that always decodes (2, 0): zero out everything so the
  // output biases alone pick the argmax, then check the exact hit counts.
  Rng rng2(1);
  agents::ReceiverAgent rigged(rc, rng2);
  for (auto& [name, param] : rigged.params()) param.value.setZero();
  rigged.params().at("color_b").value(2, 0) = 5.0;
  rigged.params().at("shape_b").value(0, 0) = 5.0;
  const auto rigged_acc = metrics::zero_shot_eval(constant_sender, rigged, split);
  // (2, 0) is a train cell; exactly one of 20 train instances matches both,
  // 4 match the color and 4 the shape.
  CHECK(rigged_acc.train_both == doctest::Approx(1.0 / 20.0).epsilon(1e-12));
  CHECK(rigged_acc.test_both == 0.0);
  CHECK(rigged_acc.test_avg ==
        doctest::Approx(0.5 * (1.0 / 5.0 + 1.0 / 5.0)).epsilon(1e-12));
}

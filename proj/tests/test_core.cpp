#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "sigcomp/core.hpp"
#include "sigcomp/errors.hpp"
#include "sigcomp/rng.hpp"

using namespace sigcomp;
using core::AttributeSpace;
using core::Encoding;

TEST_CASE("one-hot dataset covers the 5x5 grid") {
  AttributeSpace space{5, 5, Encoding::one_hot()};
  const auto dataset = core::build_dataset(space);
  REQUIRE(dataset.size() == 25);
  for (const auto& inst : dataset) {
    CHECK(inst.observation.size() == 10);
    int ones = 0;
    for (Index i = 0; i < inst.observation.size(); ++i) {
      if (inst.observation[i] == 1.0) ++ones;
      else CHECK(inst.observation[i] == 0.0);
    }
    CHECK(ones == 2);
    CHECK(inst.observation[inst.color] == 1.0);
    CHECK(inst.observation[5 + inst.shape] == 1.0);
  }
  // Row-major order by (color, shape).
  CHECK(dataset[7].color == 1);
  CHECK(dataset[7].shape == 2);
}

TEST_CASE("2x2 dataset enumerates exhaustively") {
  AttributeSpace space{2, 2, Encoding::one_hot()};
  const auto dataset = core::build_dataset(space);
  REQUIRE(dataset.size() == 4);
  std::set<std::pair<int, int>> pairs;
  for (const auto& inst : dataset) pairs.insert({inst.color, inst.shape});
  CHECK(pairs.size() == 4);
}

TEST_CASE("diagonal split on 5x5 holds out the diagonal") {
  AttributeSpace space{5, 5, Encoding::one_hot()};
  const auto split = core::diagonal_split(core::build_dataset(space), space);
  REQUIRE(split.test.size() == 5);
  REQUIRE(split.train.size() == 20);
  for (const auto& inst : split.test) CHECK(inst.color == inst.shape);
}

TEST_CASE("diagonal split on 2x2 and 3x2") {
  {
    AttributeSpace space{2, 2, Encoding::one_hot()};
    const auto split = core::diagonal_split(core::build_dataset(space), space);
    CHECK(split.test.size() == 2);
    CHECK(split.train.size() == 2);
  }
  {
    AttributeSpace space{3, 2, Encoding::one_hot()};
    const auto split = core::diagonal_split(core::build_dataset(space), space);
    REQUIRE(split.test.size() == 2);
    CHECK(split.train.size() == 4);
    std::set<std::pair<int, int>> test_pairs;
    for (const auto& inst : split.test) test_pairs.insert({inst.color, inst.shape});
    CHECK(test_pairs == std::set<std::pair<int, int>>{{0, 0}, {1, 1}});
  }
}

TEST_CASE("split invariants hold for all grid sizes in [2,8]^2") {
  for (int nc = 2; nc <= 8; ++nc) {
    for (int ns = 2; ns <= 8; ++ns) {
      AttributeSpace space{nc, ns, Encoding::one_hot()};
      const auto dataset = core::build_dataset(space);
      const auto split = core::diagonal_split(dataset, space);

      // Coverage and disjointness.
      std::set<std::pair<int, int>> seen;
      for (const auto& inst : split.train) seen.insert({inst.color, inst.shape});
      for (const auto& inst : split.test) {
        const bool fresh = seen.insert({inst.color, inst.shape}).second;
        CHECK(fresh);
      }
      CHECK(seen.size() == static_cast<std::size_t>(nc * ns));

      // Every test color and shape appears in train.
      std::set<int> train_colors, train_shapes;
      for (const auto& inst : split.train) {
        train_colors.insert(inst.color);
        train_shapes.insert(inst.shape);
      }
      for (const auto& inst : split.test) {
        CHECK(train_colors.count(inst.color) == 1);
        CHECK(train_shapes.count(inst.shape) == 1);
      }

      if (nc == ns) {
        CHECK(split.test.size() == static_cast<std::size_t>(nc));
        CHECK(split.train.size() == static_cast<std::size_t>(nc * nc - nc));
      }
    }
  }
}

TEST_CASE("entangled encoding is deterministic and injective") {
  const Vector a = core::encode_entangled(1, 3, 5, 5, 16, 7);
  const Vector b = core::encode_entangled(1, 3, 5, 5, 16, 7);
  REQUIRE(a.size() == 16);
  CHECK(a == b);

  // All 25 codes pairwise distinct in L-infinity.
  std::vector<Vector> codes;
  for (int c = 0; c < 5; ++c) {
    for (int s = 0; s < 5; ++s) {
      codes.push_back(core::encode_entangled(c, s, 5, 5, 16, 7));
    }
  }
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (std::size_t j = i + 1; j < codes.size(); ++j) {
      CHECK((codes[i] - codes[j]).lpNorm<Eigen::Infinity>() > 1e-9);
    }
  }
}

TEST_CASE("rebuilding an entangled dataset reproduces observations exactly") {
  AttributeSpace space{4, 3, Encoding::entangled(16, 7)};
  const auto first = core::build_dataset(space);
  const auto second = core::build_dataset(space);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].observation == second[i].observation);
  }
}

TEST_CASE("attribute space validation") {
  CHECK_THROWS_AS(core::build_dataset(AttributeSpace{1, 5, Encoding::one_hot()}),
                  ConfigError);
  CHECK_THROWS_AS(core::build_dataset(AttributeSpace{5, 1, Encoding::one_hot()}),
                  ConfigError);
}

TEST_CASE("embedding ingestion round-trips and rejects bad files") {
  const char* path = "test_embeddings.csv";
  {
    std::ofstream out(path);
    out << "2,2,3\n";
    out << "0,0,1.5,2.5,3.5\n";
    out << "0,1,-1,0,1\n";
    out << "1,0,0.25,0.5,0.75\n";
    out << "1,1,9,8,7\n";
  }
  AttributeSpace space{2, 2, Encoding::precomputed(path)};
  const auto dataset = core::build_dataset(space);
  REQUIRE(dataset.size() == 4);
  CHECK(dataset[0].observation[0] == 1.5);
  CHECK(dataset[3].observation[2] == 7.0);
  CHECK(space.observation_dim() == 3);

  {
    std::ofstream out(path);
    out << "2,2,3\n";
    out << "0,0,1,2,3\n";  // missing rows
  }
  CHECK_THROWS_AS(core::build_dataset(space), IngestError);

  {
    std::ofstream out(path);
    out << "3,2,3\n";  // grid mismatch
  }
  CHECK_THROWS_AS(core::build_dataset(space), IngestError);

  AttributeSpace missing{2, 2, Encoding::precomputed("does_not_exist.csv")};
  CHECK_THROWS_AS(core::build_dataset(missing), IngestError);
  std::remove(path);
}

TEST_CASE("child seed derivation is injective over indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 4096; ++i) {
    seen.insert(derive_child_seed(0xabcdef1234567890ull, i));
  }
  CHECK(seen.size() == 4096);
}

TEST_CASE("rng uniform_int(2) is balanced") {
  Rng rng(99);
  int heads = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) heads += rng.uniform_int(2);
  const double frac = static_cast<double>(heads) / n;
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);
}

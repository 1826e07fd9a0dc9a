#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigcomp/types.hpp"

namespace sigcomp::core {

enum class EncodingKind {
  kOneHotDisentangled,
  kEntangledProjection,
  kPrecomputedEmbedding,
};

struct Encoding {
  EncodingKind kind = EncodingKind::kOneHotDisentangled;
  // EntangledProjection parameters.
  int dim = 16;
  std::uint64_t seed = 0;
  // PrecomputedEmbedding source.
  std::string path;

  static Encoding one_hot() { return Encoding{}; }
  static Encoding entangled(int dim, std::uint64_t seed) {
    return Encoding{EncodingKind::kEntangledProjection, dim, seed, {}};
  }
  static Encoding precomputed(std::string path) {
    return Encoding{EncodingKind::kPrecomputedEmbedding, 0, 0, std::move(path)};
  }
};

// The game world: a grid of (color, shape) attribute pairs plus the rule that
// turns a pair into the sender's observation vector.
struct AttributeSpace {
  int n_colors = 5;
  int n_shapes = 5;
  Encoding encoding;

  int size() const { return n_colors * n_shapes; }

  // Throws ConfigError when the grid is too small for the diagonal split or
  // the encoding parameters are out of range.
  void validate() const;

  // Observation width under this encoding (precomputed encodings report the
  // file's dim; call after ingestion).
  int observation_dim() const;
};

struct ObjectInstance {
  int color = 0;
  int shape = 0;
  Vector observation;
};

struct DatasetSplit {
  std::vector<ObjectInstance> train;
  std::vector<ObjectInstance> test;
};

// Dense entangled code for one attribute pair: P * onehot(color, shape) with
// P a seeded standard-normal matrix shared by every pair with the same
// (n_colors, n_shapes, dim, seed).
Vector encode_entangled(int color, int shape, int n_colors, int n_shapes,
                        int dim, std::uint64_t seed);

// One instance per (color, shape) pair, row-major by (color, shape).
// Throws IngestError when a precomputed embedding file is missing rows or
// disagrees with the space.
std::vector<ObjectInstance> build_dataset(const AttributeSpace& space);

// Held-out set { (i, i mod n_shapes) : i < min(n_colors, n_shapes) }; the
// remainder trains. Every color and shape in test also appears in train.
DatasetSplit diagonal_split(const std::vector<ObjectInstance>& dataset,
                            const AttributeSpace& space);

bool is_held_out(int color, int shape, const AttributeSpace& space);

// Precomputed embedding file: header "n_colors,n_shapes,dim", then one row
// "color,shape,v_0,...,v_{dim-1}" per pair, decimal text, any row order.
std::vector<Vector> load_embedding_file(const std::string& path,
                                        const AttributeSpace& space);

}  // namespace sigcomp::core

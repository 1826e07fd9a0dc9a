#include "sigcomp/core.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sigcomp/errors.hpp"
#include "sigcomp/rng.hpp"

namespace sigcomp::core {

void AttributeSpace::validate() const {
  if (n_colors < 2 || n_shapes < 2) {
    throw ConfigError("attribute space needs n_colors >= 2 and n_shapes >= 2");
  }
  if (encoding.kind == EncodingKind::kEntangledProjection && encoding.dim < 2) {
    throw ConfigError("entangled encoding needs dim >= 2");
  }
  if (encoding.kind == EncodingKind::kPrecomputedEmbedding &&
      encoding.path.empty()) {
    throw ConfigError("precomputed encoding needs a file path");
  }
}

int AttributeSpace::observation_dim() const {
  switch (encoding.kind) {
    case EncodingKind::kOneHotDisentangled:
      return n_colors + n_shapes;
    case EncodingKind::kEntangledProjection:
      return encoding.dim;
    case EncodingKind::kPrecomputedEmbedding: {
      const auto rows = load_embedding_file(encoding.path, *this);
      return static_cast<int>(rows.front().size());
    }
  }
  return 0;
}

Vector encode_entangled(int color, int shape, int n_colors, int n_shapes,
                        int dim, std::uint64_t seed) {
  if (color < 0 || color >= n_colors || shape < 0 || shape >= n_shapes) {
    throw DomainError("attribute index out of range");
  }
  // The projection is regenerated per call; the matrix is tiny and a fixed
  // row-major fill order makes the result a pure function of the arguments.
  Rng rng(seed);
  Matrix projection(dim, n_colors + n_shapes);
  for (Index r = 0; r < projection.rows(); ++r) {
    for (Index c = 0; c < projection.cols(); ++c) {
      projection(r, c) = rng.normal();
    }
  }
  return projection.col(color) + projection.col(n_colors + shape);
}

namespace {

Vector encode_one_hot(int color, int shape, const AttributeSpace& space) {
  Vector obs = Vector::Zero(space.n_colors + space.n_shapes);
  obs[color] = 1.0;
  obs[space.n_colors + shape] = 1.0;
  return obs;
}

}  // namespace

std::vector<Vector> load_embedding_file(const std::string& path,
                                        const AttributeSpace& space) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open embedding file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty embedding file: " + path);

  auto split_csv = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
  };

  const auto header = split_csv(line);
  if (header.size() != 3) throw IngestError("embedding header must be n_colors,n_shapes,dim");
  int fc = 0, fs = 0, fd = 0;
  try {
    fc = std::stoi(header[0]);
    fs = std::stoi(header[1]);
    fd = std::stoi(header[2]);
  } catch (const std::exception&) {
    throw IngestError("malformed embedding header: " + line);
  }
  if (fc != space.n_colors || fs != space.n_shapes) {
    throw IngestError("embedding file grid does not match the attribute space");
  }
  if (fd < 1) throw IngestError("embedding dim must be positive");

  std::vector<Vector> rows(static_cast<std::size_t>(space.size()));
  std::vector<bool> seen(rows.size(), false);
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != static_cast<std::size_t>(fd) + 2) {
      throw IngestError("embedding row has wrong field count: " + line);
    }
    int color = 0, shape = 0;
    try {
      color = std::stoi(fields[0]);
      shape = std::stoi(fields[1]);
    } catch (const std::exception&) {
      throw IngestError("malformed embedding row: " + line);
    }
    if (color < 0 || color >= fc || shape < 0 || shape >= fs) {
      throw IngestError("embedding row indices out of range: " + line);
    }
    const std::size_t slot = static_cast<std::size_t>(color * fs + shape);
    if (seen[slot]) throw IngestError("duplicate embedding row for a pair");
    Vector v(fd);
    try {
      for (int i = 0; i < fd; ++i) v[i] = std::stod(fields[static_cast<std::size_t>(i) + 2]);
    } catch (const std::exception&) {
      throw IngestError("malformed embedding value in row: " + line);
    }
    rows[slot] = std::move(v);
    seen[slot] = true;
    ++count;
  }
  if (count != rows.size()) {
    throw IngestError("embedding file row count does not cover every pair");
  }
  return rows;
}

std::vector<ObjectInstance> build_dataset(const AttributeSpace& space) {
  space.validate();
  std::vector<ObjectInstance> dataset;
  dataset.reserve(static_cast<std::size_t>(space.size()));

  std::vector<Vector> precomputed;
  if (space.encoding.kind == EncodingKind::kPrecomputedEmbedding) {
    precomputed = load_embedding_file(space.encoding.path, space);
  }

  for (int color = 0; color < space.n_colors; ++color) {
    for (int shape = 0; shape < space.n_shapes; ++shape) {
      ObjectInstance inst;
      inst.color = color;
      inst.shape = shape;
      switch (space.encoding.kind) {
        case EncodingKind::kOneHotDisentangled:
          inst.observation = encode_one_hot(color, shape, space);
          break;
        case EncodingKind::kEntangledProjection:
          inst.observation =
              encode_entangled(color, shape, space.n_colors, space.n_shapes,
                               space.encoding.dim, space.encoding.seed);
          break;
        case EncodingKind::kPrecomputedEmbedding:
          inst.observation =
              precomputed[static_cast<std::size_t>(color * space.n_shapes + shape)];
          break;
      }
      dataset.push_back(std::move(inst));
    }
  }
  return dataset;
}

bool is_held_out(int color, int shape, const AttributeSpace& space) {
  const int diag = std::min(space.n_colors, space.n_shapes);
  return color < diag && shape == color % space.n_shapes;
}

DatasetSplit diagonal_split(const std::vector<ObjectInstance>& dataset,
                            const AttributeSpace& space) {
  DatasetSplit split;
  for (const auto& inst : dataset) {
    if (is_held_out(inst.color, inst.shape, space)) {
      split.test.push_back(inst);
    } else {
      split.train.push_back(inst);
    }
  }
  return split;
}

}  // namespace sigcomp::core

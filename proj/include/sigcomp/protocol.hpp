#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigcomp/agents.hpp"
#include "sigcomp/errors.hpp"

namespace sigcomp {

// Deterministic map from every (color, shape) pair to the message the
// evaluation-mode sender emits, plus provenance for bookkeeping.
struct TrainedProtocol {
  int n_colors = 0;
  int n_shapes = 0;
  int message_length = 0;
  // Row-major by (color, shape).
  std::vector<agents::Message> table;

  std::string regime;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  const agents::Message& at(int color, int shape) const {
    if (color < 0 || color >= n_colors || shape < 0 || shape >= n_shapes) {
      throw DomainError("protocol lookup out of range");
    }
    return table[static_cast<std::size_t>(color * n_shapes + shape)];
  }
};

}  // namespace sigcomp

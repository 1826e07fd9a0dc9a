#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sigcomp/nn.hpp"
#include "sigcomp/types.hpp"

namespace sigcomp::checkpoint {

// Binary checkpoint layout:
//   magic "SFCKPT1\0" (8 bytes)
//   u32 LE entry count
//   per entry: u32 LE name length, UTF-8 name, u32 LE rank,
//              rank x u32 LE dims, row-major f64 LE coefficients
// Optimizer state is not persisted; checkpoints exist for evaluation.

struct Entry {
  int rank = 2;
  Matrix value;  // vectors carried as n x 1
};

using EntryMap = std::map<std::string, Entry>;

std::vector<std::uint8_t> serialize(const EntryMap& entries);
EntryMap deserialize(const std::vector<std::uint8_t>& bytes);

void write_file(const std::string& path, const EntryMap& entries);
EntryMap read_file(const std::string& path);

// Store contents under "prefix/name" keys.
void add_store(EntryMap& entries, const std::string& prefix,
               const nn::ParamStore& store);
// Copies values back into an existing store; every store entry must be
// present with a matching shape.
void load_store(const EntryMap& entries, const std::string& prefix,
                nn::ParamStore& store);
// One double-valued scalar, used for self-describing metadata entries.
void add_meta(EntryMap& entries, const std::string& name, double value);
double get_meta(const EntryMap& entries, const std::string& name);

}  // namespace sigcomp::checkpoint

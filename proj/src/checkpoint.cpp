#include "sigcomp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "sigcomp/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace sigcomp::checkpoint {

namespace {

constexpr char kMagic[8] = {'S', 'F', 'C', 'K', 'P', 'T', '1', '\0'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 8);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw IngestError("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize(const EntryMap& entries) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, entry] : entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(entry.rank));
    if (entry.rank == 1) {
      put_u32(out, static_cast<std::uint32_t>(entry.value.rows()));
    } else {
      put_u32(out, static_cast<std::uint32_t>(entry.value.rows()));
      put_u32(out, static_cast<std::uint32_t>(entry.value.cols()));
    }
    for (Index r = 0; r < entry.value.rows(); ++r) {
      for (Index c = 0; c < entry.value.cols(); ++c) {
        put_f64(out, entry.value(r, c));
      }
    }
  }
  return out;
}

EntryMap deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader in{bytes};
  if (in.str(8) != std::string(kMagic, 8)) {
    throw IngestError("bad checkpoint magic");
  }
  const std::uint32_t count = in.u32();
  EntryMap entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = in.u32();
    std::string name = in.str(name_len);
    Entry entry;
    entry.rank = static_cast<int>(in.u32());
    if (entry.rank != 1 && entry.rank != 2) {
      throw IngestError("unsupported entry rank in checkpoint");
    }
    std::uint32_t rows = in.u32();
    std::uint32_t cols = entry.rank == 2 ? in.u32() : 1;
    entry.value.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        entry.value(r, c) = in.f64();
      }
    }
    entries.emplace(std::move(name), std::move(entry));
  }
  return entries;
}

void write_file(const std::string& path, const EntryMap& entries) {
  const auto bytes = serialize(entries);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot open checkpoint for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IngestError("failed to write checkpoint: " + path);
}

EntryMap read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void add_store(EntryMap& entries, const std::string& prefix,
               const nn::ParamStore& store) {
  for (const auto& [name, param] : store) {
    Entry e;
    e.rank = param.rank;
    e.value = param.value;
    entries.emplace(prefix + name, std::move(e));
  }
}

void load_store(const EntryMap& entries, const std::string& prefix,
                nn::ParamStore& store) {
  for (auto& [name, param] : store) {
    auto it = entries.find(prefix + name);
    if (it == entries.end()) {
      throw IngestError("checkpoint missing entry: " + prefix + name);
    }
    if (it->second.value.rows() != param.value.rows() ||
        it->second.value.cols() != param.value.cols()) {
      throw IngestError("checkpoint shape mismatch for: " + prefix + name);
    }
    param.value = it->second.value;
  }
}

void add_meta(EntryMap& entries, const std::string& name, double value) {
  Entry e;
  e.rank = 1;
  e.value = Matrix::Constant(1, 1, value);
  entries.emplace(name, std::move(e));
}

double get_meta(const EntryMap& entries, const std::string& name) {
  auto it = entries.find(name);
  if (it == entries.end()) throw IngestError("checkpoint missing meta: " + name);
  return it->second.value(0, 0);
}

}  // namespace sigcomp::checkpoint

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentmatch/io.hpp"
#include "sentmatch/model.hpp"

namespace sentmatch {

// Layout, all integers little-endian:
//   magic[8] "SMCHKPT\0" | u32 version | u64 config_len | config text
//   u64 vocab fingerprint | u32 tensor count
//   per tensor: u32 name_len | name | u32 rank | u64 extents[rank] | f64 values[]

inline constexpr char checkpoint_magic[8] = {'S', 'M', 'C', 'H', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t checkpoint_version = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::uint32_t version = checkpoint_version;
  std::string config_text;
  std::uint64_t vocab_fingerprint = 0;
  std::vector<NamedTensor> tensors;
};

namespace detail {

template <class U>
void put_le(std::ostream &out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char *>(b), sizeof(U));
}

template <class U>
U get_le(std::istream &in, const char *what) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char *>(b), sizeof(U))) throw CheckpointError(std::string("truncated checkpoint reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

inline std::string get_bytes(std::istream &in, std::uint64_t n, const char *what) {
  if (n > (std::uint64_t{1} << 32)) throw CheckpointError(std::string("implausible length for ") + what);
  std::string s(static_cast<std::size_t>(n), '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError(std::string("truncated checkpoint reading ") + what);
  return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream &out, const Checkpoint &ck) {
  out.write(checkpoint_magic, sizeof checkpoint_magic);
  detail::put_le<std::uint32_t>(out, ck.version);
  detail::put_le<std::uint64_t>(out, ck.config_text.size());
  out.write(ck.config_text.data(), static_cast<std::streamsize>(ck.config_text.size()));
  detail::put_le<std::uint64_t>(out, ck.vocab_fingerprint);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto &[name, t] : ck.tensors) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) detail::put_le<std::uint64_t>(out, e);
    for (double v : t.data) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
}

inline Checkpoint read_checkpoint(std::istream &in) {
  char magic[sizeof checkpoint_magic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  Checkpoint ck;
  ck.version = detail::get_le<std::uint32_t>(in, "version");
  if (ck.version != checkpoint_version)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ck.version) + " (expected " +
                          std::to_string(checkpoint_version) + ")");
  ck.config_text = detail::get_bytes(in, detail::get_le<std::uint64_t>(in, "config length"), "config");
  ck.vocab_fingerprint = detail::get_le<std::uint64_t>(in, "vocabulary fingerprint");
  const auto count = detail::get_le<std::uint32_t>(in, "tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor nt;
    nt.name = detail::get_bytes(in, detail::get_le<std::uint32_t>(in, "name length"), "tensor name");
    const auto rank = detail::get_le<std::uint32_t>(in, "rank");
    if (rank == 0 || rank > 8) throw CheckpointError("tensor " + nt.name + ": bad rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto &e : shape) {
      e = static_cast<std::size_t>(detail::get_le<std::uint64_t>(in, "extent"));
      if (e == 0 || e > (std::uint64_t{1} << 32)) throw CheckpointError("tensor " + nt.name + ": bad extent");
      total *= e;
      if (total > (std::uint64_t{1} << 32)) throw CheckpointError("tensor " + nt.name + ": too large");
    }
    std::vector<double> values(static_cast<std::size_t>(total));
    for (auto &v : values) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(in, "tensor values"));
    nt.tensor = Tensor(std::move(shape), std::move(values));
    ck.tensors.push_back(std::move(nt));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after last tensor");
  return ck;
}

inline Checkpoint snapshot(Model &model) {
  Checkpoint ck;
  ck.config_text = model.config().to_text();
  ck.vocab_fingerprint = model.word_embeddings().fingerprint();
  for (auto *p : model.parameters()) ck.tensors.push_back({p->name, p->value});
  return ck;
}

/// Copies tensors into the model. Every parameter must be present exactly
/// once with a matching shape.
inline void restore(Model &model, const Checkpoint &ck) {
  if (ck.vocab_fingerprint != model.word_embeddings().fingerprint())
    throw CheckpointError("checkpoint was trained against different word embeddings");
  auto params = model.parameters();
  if (params.size() != ck.tensors.size())
    throw CheckpointError("checkpoint holds " + std::to_string(ck.tensors.size()) + " tensors, model expects " +
                          std::to_string(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto &nt = ck.tensors[k];
    if (nt.name != params[k]->name)
      throw CheckpointError("tensor " + std::to_string(k) + " is '" + nt.name + "', model expects '" +
                            params[k]->name + "'");
    if (nt.tensor.shape != params[k]->value.shape)
      throw CheckpointError("tensor '" + nt.name + "' has shape " + shape_str(nt.tensor.shape) + ", model expects " +
                            shape_str(params[k]->value.shape));
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value.data = ck.tensors[k].tensor.data;
}

inline void save_checkpoint(const std::string &path, Model &model) {
  const auto ck = snapshot(model);
  write_atomically(path, [&](std::ostream &out) { write_checkpoint(out, ck); });
}

inline Checkpoint load_checkpoint_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  try {
    return read_checkpoint(in);
  } catch (const CheckpointError &e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

/// Rebuilds the model described by a checkpoint. Word embeddings are
/// recreated from the stored config unless supplied.
inline std::unique_ptr<Model> load_model(const std::string &path, std::shared_ptr<WordEmbeddings> words = nullptr) {
  const auto ck = load_checkpoint_file(path);
  const Config cfg = Config::parse(ck.config_text);
  if (!words) words = make_word_embeddings(cfg);
  auto model = std::make_unique<Model>(cfg, std::move(words));
  restore(*model, ck);
  return model;
}

}  // namespace sentmatch

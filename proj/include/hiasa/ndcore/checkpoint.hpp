#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiasa/ndcore/params.hpp"

// Checkpoint archive layout (all integers little-endian):
//
//   magic        8 bytes  "HIASACKP"
//   version      u32      1
//   config_hash  u64
//   step         u64
//   n_meta       u32      then n_meta × (u32 key_len, key, u32 val_len, val)
//   n_tensors    u32      then n_tensors × record:
//     u32 name_len, name bytes, u32 rank, rank × u64 extent, size × f64 (IEEE-754)

namespace hiasa::nd {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  std::map<std::string, std::string> fields;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

inline constexpr char kCheckpointMagic[8] = {'H', 'I', 'A', 'S', 'A', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}
inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    return bytes(n);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw CheckpointError("checkpoint truncated");
  }
  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const CheckpointMeta& meta, const ParameterStore& params) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, meta.config_hash);
  detail::put_u64(out, meta.step);
  detail::put_u32(out, static_cast<std::uint32_t>(meta.fields.size()));
  for (const auto& [k, v] : meta.fields) {
    detail::put_str(out, k);
    detail::put_str(out, v);
  }
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params) {
    detail::put_str(out, e.name);
    detail::put_u32(out, 2);
    detail::put_u64(out, e.tensor.rows());
    detail::put_u64(out, e.tensor.cols());
    for (double v : e.tensor.values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& buf) {
  detail::Reader rd(buf);
  if (rd.bytes(8) != std::string(kCheckpointMagic, 8)) throw CheckpointError("bad checkpoint magic");
  if (const auto ver = rd.u32(); ver != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ver));
  Checkpoint ck;
  ck.meta.config_hash = rd.u64();
  ck.meta.step = rd.u64();
  const std::uint32_t n_meta = rd.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = rd.str();
    ck.meta.fields[k] = rd.str();
  }
  const std::uint32_t n = rd.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = rd.str();
    const std::uint32_t rank = rd.u32();
    if (rank != 2) throw CheckpointError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    const std::uint64_t r = rd.u64();
    const std::uint64_t c = rd.u64();
    std::vector<double> v(r * c);
    for (double& x : v) x = std::bit_cast<double>(rd.u64());
    ck.tensors.emplace_back(std::move(name), Tensor({r, c}, std::move(v)));
  }
  if (!rd.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                            const ParameterStore& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open '" + path + "' for writing");
  const std::string bytes = encode_checkpoint(meta, params);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(buf);
}

/// Copies archived tensors into a store with the same names and shapes.
inline void restore_parameters(const Checkpoint& ck, ParameterStore& params) {
  if (ck.tensors.size() != params.size())
    throw CheckpointError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  for (const auto& [name, t] : ck.tensors) {
    Tensor* dst = params.find(name);
    if (dst == nullptr) throw CheckpointError("unexpected tensor '" + name + "' in checkpoint");
    if (dst->shape() != t.shape())
      throw CheckpointError("shape mismatch for '" + name + "': " + to_string(t.shape()) + " vs " +
                            to_string(dst->shape()));
    dst->buffer() = t.buffer();
  }
}

}  // namespace hiasa::nd

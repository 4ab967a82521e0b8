#include "usaa/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <iterator>

#include "usaa/error.hpp"

namespace usaa::nn {
namespace {

constexpr char kMagic[4] = {'U', 'S', 'A', 'A'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  std::size_t size() const { return bytes_.size(); }
  void patch_u32(std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kTruncated, "checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& store,
                                            const nlohmann::json& meta) {
  Writer w;
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.raw(std::span<const std::uint8_t>(&kCheckpointVersion, 1));
  w.u64(store.init_seed());
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& [key, entry] : store.entries()) {
    const std::size_t length_at = w.size();
    w.u32(0);
    for (int part : {key.cell, key.edge, key.op, key.role}) w.i32(part);
    const Shape s = entry.value.shape;
    for (int d : {s.n, s.c, s.h, s.w}) w.u32(static_cast<std::uint32_t>(d));
    for (float v : entry.value.data) w.f32(v);
    for (float v : entry.momentum.data) w.f32(v);
    w.patch_u32(length_at, static_cast<std::uint32_t>(w.size() - length_at - 4));
  }
  const std::string text = meta.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (head > 0 && std::memcmp(bytes.data(), kMagic, head) != 0) {
    throw Error(ErrorCode::kFormat, "not a checkpoint: bad magic");
  }
  if (bytes.size() < 5) throw Error(ErrorCode::kTruncated, "checkpoint truncated");
  if (bytes[4] != kCheckpointVersion) {
    throw Error(ErrorCode::kVersion,
                fmt::format("checkpoint version {} unsupported (expected {})", bytes[4],
                            kCheckpointVersion));
  }
  Reader r(bytes.subspan(5));
  Checkpoint out{ParamStore<float>(r.u64()), {}};
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t length = r.u32();
    const std::size_t begin = r.position();
    ParamKey key;
    key.cell = r.i32();
    key.edge = r.i32();
    key.op = r.i32();
    key.role = r.i32();
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    if (length != 32 + 8 * s.numel()) {
      throw Error(ErrorCode::kFormat, fmt::format("record {} length mismatch", i));
    }
    auto& entry = out.store.ensure(key, s);
    for (auto& v : entry.value.data) v = r.f32();
    for (auto& v : entry.momentum.data) v = r.f32();
    if (r.position() - begin != length) throw Error(ErrorCode::kFormat, "record overrun");
  }
  const std::uint32_t meta_length = r.u32();
  const auto text = r.take(meta_length);
  if (r.remaining() != 0) throw Error(ErrorCode::kFormat, "trailing bytes after checkpoint");
  try {
    out.meta = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("checkpoint metadata: ") + e.what());
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store,
                     const nlohmann::json& meta) {
  const auto bytes = encode_checkpoint(store, meta);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace usaa::nn

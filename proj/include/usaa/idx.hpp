#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace usaa::io {

// Classic IDX container: 00 00 <dtype> <ndim>, big-endian u32 dims, payload.
// Only the unsigned 8-bit dtype (0x08) is supported.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
  bool operator==(const IdxTensor&) const = default;
};

inline constexpr std::uint8_t kIdxU8 = 0x08;

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor);
IdxTensor decode_idx(std::span<const std::uint8_t> bytes);

IdxTensor read_idx(const std::filesystem::path& path);
void write_idx(const IdxTensor& tensor, const std::filesystem::path& path);

}  // namespace usaa::io

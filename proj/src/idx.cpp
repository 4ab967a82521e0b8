#include "usaa/idx.hpp"

#include <fmt/format.h>
#include <fstream>
#include <iterator>

#include "usaa/error.hpp"

namespace usaa::io {

std::size_t IdxTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > 255) {
    throw Error(ErrorCode::kShape, "IDX tensors need 1..255 dimensions");
  }
  if (tensor.data.size() != tensor.element_count()) {
    throw Error(ErrorCode::kShape, "IDX payload does not match dimensions");
  }
  std::vector<std::uint8_t> out{0x00, 0x00, kIdxU8,
                                static_cast<std::uint8_t>(tensor.dims.size())};
  for (std::uint32_t d : tensor.dims) {
    out.push_back(static_cast<std::uint8_t>(d >> 24));
    out.push_back(static_cast<std::uint8_t>(d >> 16));
    out.push_back(static_cast<std::uint8_t>(d >> 8));
    out.push_back(static_cast<std::uint8_t>(d));
  }
  out.insert(out.end(), tensor.data.begin(), tensor.data.end());
  return out;
}

IdxTensor decode_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || bytes[0] != 0x00 || bytes[1] != 0x00) {
    throw Error(ErrorCode::kFormat, "bad IDX magic");
  }
  if (bytes[2] != kIdxU8) {
    throw Error(ErrorCode::kUnsupported,
                fmt::format("unsupported IDX dtype 0x{:02x}", bytes[2]));
  }
  const std::size_t ndim = bytes[3];
  if (ndim == 0) throw Error(ErrorCode::kFormat, "IDX tensor with zero dimensions");
  if (bytes.size() < 4 + 4 * ndim) {
    throw Error(ErrorCode::kTruncated, "truncated IDX header");
  }
  IdxTensor tensor;
  for (std::size_t i = 0; i < ndim; ++i) {
    const auto* p = bytes.data() + 4 + 4 * i;
    tensor.dims.push_back((std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                          (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]});
  }
  const std::size_t header = 4 + 4 * ndim;
  const std::size_t count = tensor.element_count();
  if (bytes.size() - header < count) {
    throw Error(ErrorCode::kTruncated,
                fmt::format("truncated payload: expected {} bytes, found {}", count,
                            bytes.size() - header));
  }
  if (bytes.size() - header > count) {
    throw Error(ErrorCode::kFormat, "trailing bytes after IDX payload");
  }
  tensor.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return tensor;
}

IdxTensor read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_idx(bytes);
}

void write_idx(const IdxTensor& tensor, const std::filesystem::path& path) {
  const auto bytes = encode_idx(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace usaa::io

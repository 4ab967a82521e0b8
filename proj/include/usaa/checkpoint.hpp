#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "usaa/param_store.hpp"

namespace usaa::nn {

// Layout, all little-endian:
//   "USAA" 0x01 | u64 init seed | u32 record count |
//   per record: u32 byte length, i32 key[4], u32 dims[4], f32 value[], f32 momentum[] |
//   u32 byte length, JSON metadata.
inline constexpr std::uint8_t kCheckpointVersion = 0x01;

struct Checkpoint {
  ParamStore<float> store;
  nlohmann::json meta = nlohmann::json::object();
};

std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& store,
                                            const nlohmann::json& meta);
// Parses into fresh objects; on any error nothing is returned.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& store,
                     const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace usaa::nn

#pragma once

// Binary tensor checkpoint:
//   "CMIG" | u32 version=1 | u32 count |
//   count x ( u16 name_len | name bytes | u8 rank | rank x u64 dim | f64 payload )
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmig/autodiff/value.hpp"

namespace cmig::ad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace cmig::ad

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kicl/backbone/params.hpp"

namespace kicl {

// Binary layout, all integers 32-bit little-endian:
//   "KICL" | version | metadata length | metadata (UTF-8 JSON)
//   then per tensor: name length | name | rank | dims... | row-major float64 LE payload
// Records run to end of file in ModelParameters order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParameters params;
    // Free-form annotations, e.g. the kernel a model was trained with.
    std::map<std::string, std::string> annotations;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kicl

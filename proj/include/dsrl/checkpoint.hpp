#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dsrl/model.hpp"

namespace dsrl {

// Binary checkpoint layout, all integers and floats little-endian:
//
//   "DSRL"                       4 bytes magic
//   version                      u32 (currently 1)
//   layers, width, heads, ffn_width, max_context, vocab_size, parameter_count
//                                7 x u32
//   parameters                   parameter_count x f32, ParamLayout order
//   optional optimizer section:
//     "OPT1"                     4 bytes tag
//     optimizer_step             u64, Adam update counter
//     train_step                 u64, last completed training step
//     first_moment               parameter_count x f32
//     second_moment              parameter_count x f32
//
// Nothing may follow the last section.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct OptimizerState {
  std::vector<float> first_moment;
  std::vector<float> second_moment;
  std::uint64_t optimizer_step = 0;
  std::uint64_t train_step = 0;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct Checkpoint {
  PolicyParams<float> params;
  std::optional<OptimizerState> optimizer;
};

std::vector<std::byte> encode_checkpoint(const PolicyParams<float>& params,
                                         const OptimizerState* optimizer = nullptr);

// Throws CheckpointError. When `expected` is given the stored architecture
// must match it.
Checkpoint decode_checkpoint(std::span<const std::byte> bytes,
                             const Architecture* expected = nullptr);

// Writes to a temporary sibling and renames it into place, so an existing
// checkpoint at `path` survives a failed write.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams<float>& params,
                     const OptimizerState* optimizer = nullptr);

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const Architecture* expected = nullptr);

}  // namespace dsrl

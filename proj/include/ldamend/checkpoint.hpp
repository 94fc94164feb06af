#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "ldamend/amendment.hpp"

namespace ldamend {

// Binary layout, all integers u64 and all reals f64, little-endian:
//   magic "LDAMCKPT", u32 version
//   dims: c, d_in, d_sem, d_f
//   vocabulary words (length-prefixed) and c x d_sem vectors, row-major
//   encoder, decoder, backbone, head networks
//   prototypes: mode byte, c valid bytes, c x d_f centers
//   alpha scale (c), engine config as length-prefixed JSON
inline constexpr char kCheckpointMagic[8] = {'L', 'D', 'A', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const TrainedPipeline& pipeline, std::ostream& out);
TrainedPipeline read_checkpoint(std::istream& in);

// Writes to a sibling temporary file, then renames over the target.
void save_checkpoint(const TrainedPipeline& pipeline, const std::filesystem::path& path);
TrainedPipeline load_checkpoint(const std::filesystem::path& path);

}  // namespace ldamend

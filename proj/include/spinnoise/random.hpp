// Counter-based Philox4x32-10 generator and a seeded normal-deviate stream
// with independent substreams.
#pragma once

#include <array>
#include <cstdint>

namespace spinnoise {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Ten-round Philox 4x32 block function.
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

/// Sequential view of the block function. The key holds the 64-bit seed;
/// counter words 0-1 enumerate blocks and word 2 selects the substream, so
/// distinct (seed, substream) pairs never share a block.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t substream);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform();
  /// Standard normal via Box-Muller; deviates are produced in pairs.
  double normal();

 private:
  PhiloxKey key_;
  std::uint64_t block_ = 0;
  std::uint32_t substream_;
  PhiloxCounter buffer_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace spinnoise

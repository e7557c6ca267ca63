#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

#include "bdlat/site.hpp"

namespace bdlat {

/// Philox4x32-10 block function: 128-bit counter, 64-bit key.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
  }
  return ctr;
}

/// 64-bit mix used to fold stream keys into a single identifier.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t stream_id(std::initializer_list<std::uint64_t> parts);

/// Noise channels. Site streams use Birth/Death; the Gillespie holding-time
/// and selection draws use a per-replicate Engine stream.
enum class Channel : std::uint8_t { Engine = 0, Birth = 1, Death = 2 };

/// Identifier for one independent stream: a pure function of its key parts.
std::uint64_t site_stream_id(const Site& x, Channel channel, std::uint64_t replicate, std::uint64_t layer,
                             std::uint64_t block);
std::uint64_t replicate_stream_id(std::uint64_t replicate, std::uint64_t purpose = 0);

/// Counter-based random stream. The sequence is determined by (seed, id);
/// position i is computed directly, so streams need no shared state.
class NoiseStream {
 public:
  using result_type = std::uint32_t;

  NoiseStream() = default;
  NoiseStream(std::uint64_t seed, std::uint64_t id) : seed_(seed), id_(id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t id() const { return id_; }

  std::array<std::uint32_t, 4> block(std::uint64_t index) const {
    return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                       static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)},
                      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  }

  /// Two doubles in [0,1) from the next block.
  std::array<double, 2> next_pair() {
    auto b = block(counter_++);
    return {to_unit(b[0], b[1]), to_unit(b[2], b[3])};
  }

  /// One double in [0,1); the remaining half of the block is kept.
  double uniform() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    auto p = next_pair();
    spare_ = p[1];
    has_spare_ = true;
    return p[0];
  }

  /// Exponential(rate) from a [0,1) uniform u.
  static double exponential(double u, double rate) { return -std::log1p(-u) / rate; }

  // UniformRandomBitGenerator interface, for std:: distributions.
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    if (word_ == 4) {
      words_ = block(counter_++);
      word_ = 0;
    }
    return words_[word_++];
  }

  /// (w + 1/2) 2^-32, strictly inside (0,1).
  static double to_unit32(std::uint32_t w) { return (static_cast<double>(w) + 0.5) * 0x1.0p-32; }

  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t id_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
  std::array<std::uint32_t, 4> words_{};
  int word_ = 4;
};

}  // namespace bdlat

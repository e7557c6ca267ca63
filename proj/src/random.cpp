#include "bdlat/random.hpp"

namespace bdlat {

std::uint64_t stream_id(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

std::uint64_t site_stream_id(const Site& x, Channel channel, std::uint64_t replicate, std::uint64_t layer,
                             std::uint64_t block) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(x.dim()));
  for (int c : x.coords()) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)));
  return stream_id({h, static_cast<std::uint64_t>(channel), replicate, layer, block});
}

std::uint64_t replicate_stream_id(std::uint64_t replicate, std::uint64_t purpose) {
  return stream_id({0xE9617E5ULL, static_cast<std::uint64_t>(Channel::Engine), replicate, purpose});
}

}  // namespace bdlat

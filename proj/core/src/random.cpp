#include "qtherm/random.hpp"

#include <array>

namespace qtherm {

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_index) {
  std::uint64_t state = splitmix64(master_seed) ^ splitmix64(~stream_index);
  std::array<std::uint32_t, 8> words{};
  for (std::size_t i = 0; i < words.size(); i += 2) {
    state = splitmix64(state + stream_index);
    words[i] = static_cast<std::uint32_t>(state);
    words[i + 1] = static_cast<std::uint32_t>(state >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

}  // namespace qtherm

#include "nelson/random.hpp"

namespace nelson {

namespace {

std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t index) {
  // Fixed tag keeps these streams disjoint from a plain seed_seq{seed}.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x6e656c73u};
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t index)
    : seed_(master_seed), index_(index), engine_(keyed_engine(master_seed, index)) {}

}  // namespace nelson

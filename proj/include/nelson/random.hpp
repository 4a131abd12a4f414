#pragma once

#include <cstdint>
#include <random>

namespace nelson {

/// Independent random stream keyed by (master seed, stream index).
///
/// Streams for different indices are seeded through std::seed_seq from the
/// full 128-bit key, so trajectory i draws the same numbers no matter which
/// thread runs it or in what order.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t index);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t index() const { return index_; }

 private:
  std::uint64_t seed_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace nelson

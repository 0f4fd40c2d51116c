#pragma once

#include <cstdint>
#include <string_view>

namespace rlstm {

// Counter-based pseudo-random generator. Output i of a stream is the
// SplitMix64 finalizer applied to key + (i+1) * 0x9E3779B97F4A7C15, where
// the key is derived from (seed, stream label). Every draw is a pure
// function of (seed, label, counter), so sequences reproduce bit-identically
// across platforms and independent streams never interleave.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01();
  double uniform(double lo, double hi);
  // Inclusive integer range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Box-Muller; both draws of a pair are consumed from this stream.
  double normal(double mean = 0.0, double stddev = 1.0);
  // Knuth product-of-uniforms method; suitable for mean up to ~700.
  std::int64_t poisson(double mean);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rlstm

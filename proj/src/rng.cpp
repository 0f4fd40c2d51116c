#include "rlstm/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace rlstm {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::string_view stream)
    : key_(splitmix64_finalize(seed ^ fnv1a(stream))) {}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return splitmix64_finalize(key_ + counter_ * kGamma);
}

double CounterRng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

std::int64_t CounterRng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Multiply-shift rejection-free mapping; bias is below 2^-64 * span.
  const std::uint64_t r = next_u64();
  const auto wide = static_cast<unsigned __int128>(r) * span;
  return lo + static_cast<std::int64_t>(wide >> 64);
}

double CounterRng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  // u1 in (0,1] so the log is finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return mean + stddev * radius * std::cos(angle);
}

std::int64_t CounterRng::poisson(double mean) {
  if (mean < 0) throw std::invalid_argument("poisson: negative mean");
  if (mean == 0) return 0;
  if (mean > 700) throw std::invalid_argument("poisson: mean too large");
  const double threshold = std::exp(-mean);
  std::int64_t count = -1;
  double product = 1.0;
  do {
    product *= (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    ++count;
  } while (product > threshold);
  return count;
}

}  // namespace rlstm

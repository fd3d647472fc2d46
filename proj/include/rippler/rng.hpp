#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace rippler {

/// Counter-based random number generator (Philox4x32-10).
///
/// A stream is identified by (seed, stream) and the whole generator state
/// is a single 64-bit draw counter, so a chain's random position can be
/// checkpointed and restored exactly. Independent chains use the same seed
/// with distinct stream ids.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "philox4x32-10";

  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), pos_(0), cached_block_(~std::uint64_t{0}) {}

  std::uint64_t seed_value() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Number of 64-bit draws consumed so far; restoring it replays the stream.
  std::uint64_t position() const { return pos_; }
  void set_position(std::uint64_t pos) { pos_ = pos; }

  std::uint64_t next_u64() {
    const std::uint64_t block = pos_ >> 1;
    const unsigned half = static_cast<unsigned>(pos_ & 1u);
    ++pos_;
    if (block != cached_block_) {
      fill_block(block);
      cached_block_ = block;
    }
    return out_[half];
  }

  /// Uniform on [0,1), 53-bit resolution.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on [a,b); the upper end is excluded even under rounding.
  double uniform(double a, double b) {
    double v = a + (b - a) * unit();
    return v < b ? v : std::nextafter(b, a);
  }

  /// Uniform integer in [0,n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return unit() < p; }

  /// Two independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair() {
    const double u1 = 1.0 - unit();  // (0,1]
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * kPi * u2;
    return {r * std::cos(th), r * std::sin(th)};
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void fill_block(std::uint64_t block) {
    std::uint32_t c0 = static_cast<std::uint32_t>(block);
    std::uint32_t c1 = static_cast<std::uint32_t>(block >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
    std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
    std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, c0, hi0, lo0);
      mulhilo(0xCD9E8D57u, c2, hi1, lo1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    out_[0] = (static_cast<std::uint64_t>(c1) << 32) | c0;
    out_[1] = (static_cast<std::uint64_t>(c3) << 32) | c2;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t pos_;
  std::uint64_t cached_block_;
  std::uint64_t out_[2] = {0, 0};
};

}  // namespace rippler

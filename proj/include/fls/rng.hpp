#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>

namespace fls {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// A stream is fully determined by (seed, stream, purpose); paths keyed by
// their index are reproducible regardless of which worker runs them.
class PhiloxEngine {
 public:
  using result_type = std::uint32_t;

  PhiloxEngine(std::uint64_t seed, std::uint64_t stream, std::uint32_t purpose = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream), (static_cast<std::uint32_t>(stream >> 32) & 0xFFFFu) |
                                                           (purpose << 16)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return out_[pos_++];
  }

  void discard(std::uint64_t n) {
    for (; n > 0; --n) (*this)();
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    std::uint64_t hi = (*this)() >> 5;
    std::uint64_t lo = (*this)() >> 6;
    return (static_cast<double>(hi) * 67108864.0 + static_cast<double>(lo)) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9;
  static constexpr std::uint32_t kW1 = 0xBB67AE85;

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void refill() {
    std::array<std::uint32_t, 4> x = ctr_;
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(kM0, x[0], hi0, lo0);
      mulhilo(kM1, x[2], hi1, lo1);
      x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
      k[0] += kW0;
      k[1] += kW1;
    }
    out_ = x;
    pos_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> out_{};
  int pos_ = 4;
};

/// Path-local randomness: standard normal pairs and uniforms from one stream.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t stream, std::uint32_t purpose = 0) : engine_(seed, stream, purpose) {}

  double uniform() { return engine_.uniform(); }
  double normal() { return normal_(engine_); }
  std::pair<double, double> normal_pair() {
    double a = normal();
    return {a, normal()};
  }

  PhiloxEngine& engine() { return engine_; }

 private:
  PhiloxEngine engine_;
  std::normal_distribution<double> normal_;
};

/// Stream purposes sharing one (seed, path) key.
enum StreamPurpose : std::uint32_t { kPathNoise = 0, kAcceptance = 1, kAuxiliary = 2 };

}  // namespace fls

// Counter-based random streams (Philox4x32-10) and inverse-CDF normals.
//
// A stream is identified by (seed, stream id); draw k of stream s depends
// only on (seed, s, k), so ensembles are reproducible regardless of how
// paths are scheduled across workers.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace spider {

class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  Block operator()(Block ctr) const {
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  std::array<std::uint32_t, 2> key_;
};

/// Inverse of the standard normal CDF (Wichura, AS 241, ~1e-16 relative).
double normal_quantile(double p);

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// SplitMix64 finalizer, used to derive per-path seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Sequential draws from one counter-based stream.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) : gen_(seed), stream_(stream_id) {}

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    const std::uint64_t bits = next64();
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile(uniform()); }

  /// Index in [0, weights.size()) drawn with the given probabilities
  /// (assumed to sum to one; the last index absorbs rounding).
  template <class Weights>
  int categorical(const Weights& w) {
    const double u = uniform();
    double acc = 0.0;
    const int n = static_cast<int>(w.size());
    for (int k = 0; k + 1 < n; ++k) {
      acc += w[k];
      if (u < acc) return k;
    }
    return n - 1;
  }

  std::uint64_t draws() const { return counter_ * 2 - buffered_; }

 private:
  std::uint64_t next64() {
    if (buffered_ == 0) {
      const Philox4x32::Block out =
          gen_({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)});
      ++counter_;
      buf_[0] = (std::uint64_t{out[0]} << 32) | out[1];
      buf_[1] = (std::uint64_t{out[2]} << 32) | out[3];
      buffered_ = 2;
    }
    return buf_[2 - buffered_--];
  }

  Philox4x32 gen_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int buffered_ = 0;
};

}  // namespace spider

#ifndef TRUSTNET_RANDOM_HPP
#define TRUSTNET_RANDOM_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>
#include <algorithm>
#include <unordered_set>
#include <cmath>

namespace trustnet {

/// Derives an independent stream seed from a master seed and a stream index.
/// splitmix64 finalizer over master xor (golden-ratio * (index+1)); distinct
/// indices give statistically unrelated streams for any master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
  z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27; z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// Seeded RNG with hand-rolled transforms so that draws are bit-stable across
/// standard-library implementations. All simulation randomness flows through
/// this class; identical seeds give identical sequences.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, exactly unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t v;
    do { v = eng_(); } while (v >= limit);
    return v % n;
  }

  /// Standard normal via the Marsaglia polar method. Caches the spare value.
  double gaussian() {
    if (has_spare_) { has_spare_ = false; return spare_; }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// k distinct integers drawn uniformly from {lo, ..., hi}, returned sorted.
  std::vector<long> sample_distinct(long lo, long hi, long k) {
    const long span = hi - lo + 1;
    if (k < 0 || k > span) throw std::invalid_argument("sample_distinct: k exceeds range size");
    std::vector<long> out;
    out.reserve(static_cast<std::size_t>(k));
    if (3 * k >= span) {
      // dense case: partial Fisher-Yates over the whole range
      std::vector<long> pool(static_cast<std::size_t>(span));
      for (long i = 0; i < span; ++i) pool[static_cast<std::size_t>(i)] = lo + i;
      for (long i = 0; i < k; ++i) {
        const long j = i + static_cast<long>(uniform_int(static_cast<std::uint64_t>(span - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      }
      out.assign(pool.begin(), pool.begin() + k);
    } else {
      // sparse case: Floyd's algorithm
      std::unordered_set<long> seen;
      seen.reserve(static_cast<std::size_t>(k) * 2);
      for (long r = span - k; r < span; ++r) {
        const long t = lo + static_cast<long>(uniform_int(static_cast<std::uint64_t>(r + 1)));
        if (!seen.insert(t).second) seen.insert(lo + r), out.push_back(lo + r);
        else out.push_back(t);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::uint64_t raw() { return eng_(); }

private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace trustnet

#endif

#pragma once

#include <bit>
#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace pointseg {

// SplitMix64 step (Steele, Lea & Flood 2014). Chosen because the update and
// output functions are fully specified by the algorithm, so streams are
// identical on every platform, unlike std:: distributions.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on (0, 1]; never returns 0 so log() is always safe.
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) via masked rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = ~0ULL >> std::countl_zero(n - 1 | 1);
    std::uint64_t v;
    do {
      v = next_u64() & mask;
    } while (v >= n);
    return v;
  }

  int bernoulli_bit() { return static_cast<int>(next_u64() & 1ULL); }

  // Box-Muller; consumes two uniforms per call.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // n distinct indices from [0, pool) via partial Fisher-Yates.
  std::vector<int> sample_without_replacement(int pool, int n) {
    std::vector<int> idx(static_cast<std::size_t>(pool));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) {
      int j = i + static_cast<int>(uniform_int(static_cast<std::uint64_t>(pool - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(n));
    return idx;
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from (seed, tags...). Streams keyed by
// structural tags (epoch, sample index, purpose) never shift when an
// unrelated consumer is skipped, which keeps runs reproducible under
// ablation flags and thread counts.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = seed;
  splitmix64(s);
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    splitmix64(s);
  }
  return s;
}

inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(seed, tags));
}

// Purpose tags for derived streams.
namespace rng_tag {
constexpr std::uint64_t kShape = 0x01;
constexpr std::uint64_t kMask = 0x02;
constexpr std::uint64_t kTransform = 0x03;
constexpr std::uint64_t kInit = 0x04;
constexpr std::uint64_t kBatchOrder = 0x05;
constexpr std::uint64_t kStudy = 0x06;
constexpr std::uint64_t kBudget = 0x07;
}  // namespace rng_tag

}  // namespace pointseg

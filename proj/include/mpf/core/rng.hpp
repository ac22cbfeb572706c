#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mpf {

// Derives independent substream seeds so that generation order never leaks
// between subjects/clips/stages.
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
  auto splitmix = [](uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  uint64_t s = a;
  uint64_t out = splitmix(s);
  s ^= b * 0xff51afd7ed558ccdULL;
  out ^= splitmix(s);
  s ^= c * 0xc4ceb9fe1a85ec53ULL;
  out ^= splitmix(s);
  s ^= d * 0x2545f4914f6cdd1dULL;
  out ^= splitmix(s);
  return out;
}

// mt19937_64 with hand-rolled distributions. The standard distribution
// objects are implementation-defined, which would break the byte-identical
// reproducibility contracts across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range, rejection sampled
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return lo + static_cast<int>(v % span);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates
  template <class Vec>
  void shuffle(Vec& v) {
    if (v.empty()) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i)));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mpf

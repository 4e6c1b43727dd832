#ifndef DIRSEL_RNG_HPP
#define DIRSEL_RNG_HPP

#include <cstdint>
#include <string_view>

namespace dirsel {

// splitmix64 finalizer: bijective 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a over the stream name; combined with the user seed this gives every
// module its own independent stream for the same seed.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Key derivation: key = mix64(fnv1a64(name) ^ mix64(seed)) folded with an
// optional stream index (epoch, restart, ...). Fully reproducible: the n-th
// draw of a given (name, seed, stream) never depends on other streams.
inline std::uint64_t derive_key(std::string_view name, std::uint64_t seed,
                                std::uint64_t stream = 0) {
  std::uint64_t k = mix64(fnv1a64(name) ^ mix64(seed));
  if (stream != 0) k = mix64(k ^ (stream * 0x9E3779B97F4A7C15ULL));
  return k;
}

// Counter-based generator: output i is mix64(key + i*golden). Stateless apart
// from the counter, so draws are position-addressable and order-independent.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::string_view name, std::uint64_t seed, std::uint64_t stream = 0)
      : key_(derive_key(name, seed, stream)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  // Uniform in the open interval (0,1); never returns 0 or 1 exactly.
  double next_uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; consumes two uniforms per draw.
  double next_gaussian();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace dirsel

#endif  // DIRSEL_RNG_HPP

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace ratecost {

/// splitmix64 finalizer; used to derive independent seeds from
/// (base seed, stream name, indices).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                 std::initializer_list<std::uint64_t> idx = {}) {
  std::uint64_t s = mix64(base ^ mix64(hash_name(stream)));
  for (std::uint64_t i : idx) s = mix64(s ^ mix64(i + 0x632be59bd9b4e019ULL));
  return s;
}

/// Portable random stream. std::mt19937_64 has a fully specified output
/// sequence; the distributions below avoid the implementation-defined ones in
/// <random> so that results are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Unit-rate exponential.
  double exponential() { return -std::log1p(-uniform()); }

  /// Draws an index from an unnormalized-safe pmf by inverse CDF. Entries with
  /// zero mass are never returned.
  std::size_t categorical(std::span<const double> pmf) {
    const double u = uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      if (pmf[i] <= 0.0) continue;
      acc += pmf[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ratecost

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace sks {

/// Identifier of the random number scheme, recorded in run manifests so a
/// stream can be regenerated from its seed: the standard-specified
/// mt19937_64 engine, 53-bit uniforms in (0,1], Box-Muller normals.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64+box-muller-53";

/// splitmix64 finalizer; a bijective avalanche mix on 64 bits.
constexpr uint64_t mix64(uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the seed of one stream from the master seed, an experiment tag,
/// and a path index. The map is deterministic and collision-resistant, so
/// per-path streams are reproducible independently of scheduling.
constexpr uint64_t derive_seed(uint64_t master, uint64_t tag, uint64_t index) noexcept {
  uint64_t s = mix64(master + 0x9e3779b97f4a7c15ULL);
  s = mix64(s ^ mix64(tag + 0x3c6ef372fe94f82aULL));
  s = mix64(s ^ mix64(index + 0x61c8864680b583ebULL));
  return s;
}

/// Standard normal variates from an explicitly seeded engine.
///
/// std::normal_distribution is implementation-defined, so the normal
/// transform is spelled out here to keep streams identical for a given
/// seed regardless of the standard library in use.
class NormalGenerator {
 public:
  explicit NormalGenerator(uint64_t seed) : engine_(seed) {}

  /// Uniform in (0,1], 53 significant bits, never zero.
  double uniform() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal variate (Box-Muller; pairs are cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sks

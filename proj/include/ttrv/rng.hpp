#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace ttrv {

// FNV-1a; stable across platforms, used to fold string ids into seeds.
std::uint64_t hash_string(std::string_view s) noexcept;

// Derives an independent substream seed from a base seed and a list of tags
// (step, prompt hash, rollout index, ...) via splitmix64 chaining.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> tags) noexcept;

// mt19937_64 plus hand-rolled distributions. The standard library's
// distributions are implementation-defined, which would break byte-identical
// outputs across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                  // [0, 1)
  double normal();                   // standard normal, Box-Muller
  std::size_t below(std::size_t n);  // uniform integer in [0, n)
  std::size_t categorical(std::span<const double> probs);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ttrv

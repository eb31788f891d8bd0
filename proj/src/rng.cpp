#include "ttrv/rng.hpp"

#include <cmath>
#include <numbers>

namespace ttrv {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t));
  return h;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::size_t Rng::below(std::size_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t bound = n;
  const std::uint64_t limit = -bound % bound;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= limit) return static_cast<std::size_t>(x % bound);
  }
}

std::size_t Rng::categorical(std::span<const double> probs) {
  const double u = uniform();
  double cdf = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cdf += probs[i];
    if (u < cdf) return i;
  }
  // Rounding left u above the final cdf; take the last nonzero entry.
  for (std::size_t i = probs.size(); i > 0; --i) {
    if (probs[i - 1] > 0.0) return i - 1;
  }
  return probs.size() - 1;
}

}  // namespace ttrv

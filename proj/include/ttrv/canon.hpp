#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ttrv {

enum class Scheme { verbatim, trim_casefold, mcq_letter, boxed };

Scheme parse_scheme(std::string_view name);
std::string_view to_string(Scheme scheme);

inline constexpr std::string_view kUnparsed = "<UNPARSED>";
inline constexpr std::string_view kDefaultAlphabet = "ABCD";

// One sampled response. tokens/token_logprobs are only populated for
// sequence-policy rollouts; total_logprob is log pi(y|x) at temperature 1.
struct RawResponse {
  std::string text;
  std::vector<int> tokens;
  std::vector<double> token_logprobs;
  double total_logprob = 0.0;
};

struct CanonicalAnswer {
  std::string key;
  Scheme scheme = Scheme::verbatim;

  friend bool operator==(const CanonicalAnswer&,
                         const CanonicalAnswer&) = default;
};

struct CanonOptions {
  Scheme scheme = Scheme::mcq_letter;
  // Option letters for mcq_letter, matched case-insensitively.
  std::string alphabet = std::string(kDefaultAlphabet);
};

// Total and pure: unparseable input maps to kUnparsed (mcq_letter) or to the
// trim-casefold form (boxed), never to an error.
CanonicalAnswer canonicalize(std::string_view text, const CanonOptions& opts);
CanonicalAnswer canonicalize(const RawResponse& raw, const CanonOptions& opts);

struct DistributionEntry {
  std::string key;
  std::size_t count = 0;
  double p = 0.0;
};

// Empirical distribution over the unique canonical answers of one group.
// Entries are sorted by descending count, then ascending key.
struct EmpiricalDistribution {
  std::vector<DistributionEntry> entries;
  std::size_t n = 0;

  std::size_t m() const { return entries.size(); }
  // Null when the key is absent.
  const DistributionEntry* find(std::string_view key) const;
};

EmpiricalDistribution build_distribution(
    std::span<const CanonicalAnswer> answers);

}  // namespace ttrv

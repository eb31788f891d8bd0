#include "ttrv/canon.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "ttrv/error.hpp"

namespace ttrv {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// ASCII-only folding; multi-byte UTF-8 sequences pass through untouched.
char fold(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || static_cast<unsigned char>(c) >= 0x80;
}

std::string trim_casefold(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  std::string out(text.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(), fold);
  return out;
}

std::string mcq_letter(std::string_view text, std::string_view alphabet) {
  const std::string folded = trim_casefold(text);
  for (std::size_t i = 0; i < folded.size(); ++i) {
    const char c = folded[i];
    const bool left_ok = i == 0 || !is_alnum(folded[i - 1]);
    const bool right_ok = i + 1 == folded.size() || !is_alnum(folded[i + 1]);
    if (!left_ok || !right_ok) continue;
    for (char a : alphabet) {
      if (fold(a) == c) return std::string(1, a);
    }
  }
  return std::string(kUnparsed);
}

// Payload of the \boxed{...} starting at `open` (index of '{'), or npos when
// the braces never balance.
std::size_t matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

std::string boxed(std::string_view text) {
  constexpr std::string_view tag = "\\boxed{";
  std::string_view cur = text;
  bool found = false;
  for (;;) {
    const auto at = cur.find(tag);
    if (at == std::string_view::npos) break;
    const std::size_t open = at + tag.size() - 1;
    const auto close = matching_brace(cur, open);
    if (close == std::string_view::npos) break;
    cur = cur.substr(open + 1, close - open - 1);
    found = true;
  }
  return trim_casefold(found ? cur : text);
}

}  // namespace

Scheme parse_scheme(std::string_view name) {
  if (name == "verbatim") return Scheme::verbatim;
  if (name == "trim-casefold") return Scheme::trim_casefold;
  if (name == "mcq-letter") return Scheme::mcq_letter;
  if (name == "boxed") return Scheme::boxed;
  fail(Errc::invalid_argument, "unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::verbatim: return "verbatim";
    case Scheme::trim_casefold: return "trim-casefold";
    case Scheme::mcq_letter: return "mcq-letter";
    case Scheme::boxed: return "boxed";
  }
  return "verbatim";
}

CanonicalAnswer canonicalize(std::string_view text, const CanonOptions& opts) {
  CanonicalAnswer out;
  out.scheme = opts.scheme;
  switch (opts.scheme) {
    case Scheme::verbatim: out.key = std::string(text); break;
    case Scheme::trim_casefold: out.key = trim_casefold(text); break;
    case Scheme::mcq_letter: out.key = mcq_letter(text, opts.alphabet); break;
    case Scheme::boxed: out.key = boxed(text); break;
  }
  return out;
}

CanonicalAnswer canonicalize(const RawResponse& raw, const CanonOptions& opts) {
  return canonicalize(raw.text, opts);
}

const DistributionEntry* EmpiricalDistribution::find(
    std::string_view key) const {
  for (const auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

EmpiricalDistribution build_distribution(
    std::span<const CanonicalAnswer> answers) {
  if (answers.empty()) fail(Errc::invalid_argument, "empty rollout group");
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& a : answers) {
    if (a.scheme != answers.front().scheme) {
      fail(Errc::invalid_argument, "mixed canonicalization schemes in group");
    }
    ++counts[a.key];
  }
  EmpiricalDistribution dist;
  dist.n = answers.size();
  for (auto& [key, count] : counts) {
    dist.entries.push_back({key, count,
                            static_cast<double>(count) /
                                static_cast<double>(dist.n)});
  }
  // std::map iteration is already key-ascending, so a stable sort on count
  // yields (count desc, key asc).
  std::stable_sort(dist.entries.begin(), dist.entries.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  return dist;
}

}  // namespace ttrv

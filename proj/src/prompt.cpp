#include "ttrv/prompt.hpp"

#include <algorithm>
#include <cmath>

#include "ttrv/error.hpp"

namespace ttrv {

PromptKind parse_prompt_kind(std::string_view name) {
  if (name == "choice") return PromptKind::choice;
  if (name == "sequence") return PromptKind::sequence;
  fail(Errc::invalid_argument, "unknown prompt kind '" + std::string(name) + "'");
}

std::string_view to_string(PromptKind kind) {
  return kind == PromptKind::choice ? "choice" : "sequence";
}

std::vector<PromptInput> strip_labels(std::span<const Prompt> prompts) {
  std::vector<PromptInput> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) out.push_back(p.input);
  return out;
}

void validate_prompt(const Prompt& prompt) {
  const auto& in = prompt.input;
  const std::string where = "prompt '" + in.id + "': ";
  if (in.id.empty()) fail(Errc::invalid_argument, "prompt with empty id");
  if (in.kind == PromptKind::choice) {
    if (in.options.size() < 2) {
      fail(Errc::invalid_argument, where + "choice prompts need >= 2 options");
    }
    for (double f : in.features) {
      if (!std::isfinite(f)) fail(Errc::invalid_argument, where + "non-finite feature");
    }
    if (prompt.label &&
        std::find(in.options.begin(), in.options.end(), *prompt.label) ==
            in.options.end()) {
      fail(Errc::invalid_argument, where + "label is not one of the options");
    }
  } else {
    for (int t : in.context) {
      if (t < 0) fail(Errc::invalid_argument, where + "negative token id");
    }
  }
}

}  // namespace ttrv

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ttrv {

enum class PromptKind { choice, sequence };

PromptKind parse_prompt_kind(std::string_view name);
std::string_view to_string(PromptKind kind);

// Everything a policy may see about a prompt. There is deliberately no label
// here: the adaptation path only ever receives PromptInput values.
struct PromptInput {
  std::string id;
  PromptKind kind = PromptKind::choice;
  std::vector<double> features;     // choice
  std::vector<std::string> options;  // choice
  std::vector<int> context;          // sequence

  bool operator==(const PromptInput&) const = default;
};

struct Prompt {
  PromptInput input;
  // Option key (choice) or space-joined token ids (sequence). Evaluation only.
  std::optional<std::string> label;

  bool operator==(const Prompt&) const = default;
};

std::vector<PromptInput> strip_labels(std::span<const Prompt> prompts);

// Checks the per-kind invariants; throws Errc::invalid_argument.
void validate_prompt(const Prompt& prompt);

}  // namespace ttrv

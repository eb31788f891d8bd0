#pragma once

#include <string>
#include <vector>

#include "ttrv/canon.hpp"
#include "ttrv/prompt.hpp"

namespace ttrv {

struct Rollout {
  RawResponse response;
  CanonicalAnswer answer;
  // log pi_old(y|x) at the sampling temperature; per-token for sequences.
  double behavior_logprob = 0.0;
  std::vector<double> behavior_token_logprobs;
};

// N rollouts for one prompt; the unit of empirical probabilities and, under
// per-group scope, of advantage normalization.
struct RolloutGroup {
  PromptInput prompt;
  std::vector<Rollout> rollouts;
  double temperature = 1.0;

  const std::string& prompt_id() const { return prompt.id; }
  std::vector<CanonicalAnswer> answers() const;
};

}  // namespace ttrv

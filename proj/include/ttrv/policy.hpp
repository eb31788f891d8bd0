#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ttrv/canon.hpp"
#include "ttrv/prompt.hpp"
#include "ttrv/rng.hpp"

namespace ttrv {

enum class PolicyKind { tabular, linear_softmax, ngram_seq };

PolicyKind parse_policy_kind(std::string_view name);
std::string_view to_string(PolicyKind kind);

// Token 0 doubles as end-of-sequence and as left padding for short contexts.
inline constexpr int kEndToken = 0;

struct PolicyShape {
  PolicyKind kind = PolicyKind::linear_softmax;
  std::size_t num_options = 0;  // K (tabular, linear_softmax)
  std::size_t feature_dim = 0;  // d (linear_softmax)
  std::size_t vocab = 0;        // V (ngram_seq)
  std::size_t order = 0;        // context length (ngram_seq)
  std::size_t max_len = 0;      // L (ngram_seq)
  std::vector<std::string> prompt_ids;  // one logit row each (tabular)

  std::size_t param_count() const;
  bool operator==(const PolicyShape&) const = default;
};

// Parameter vector plus its shape. Layouts:
//   tabular         rows[prompt][K]
//   linear_softmax  W[K][d] followed by b[K]; logits = W x + b
//   ngram_seq       table[context][V], context = sum_i tok_{t-order+i} V^i
class Policy {
 public:
  Policy(PolicyShape shape, std::vector<double> theta);

  static Policy zeros(PolicyShape shape);

  const PolicyShape& shape() const { return shape_; }
  PolicyKind kind() const { return shape_.kind; }
  std::span<const double> params() const { return theta_; }
  std::span<double> params() { return theta_; }

  // Row index for a tabular prompt; throws "unseen prompt".
  std::size_t row_of(std::string_view prompt_id) const;

  bool operator==(const Policy& other) const {
    return shape_ == other.shape_ && theta_ == other.theta_;
  }

 private:
  PolicyShape shape_;
  std::vector<double> theta_;
  std::unordered_map<std::string, std::size_t> rows_;
};

// Frozen copy used as the reference policy.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(Policy policy) : policy_(std::move(policy)) {}
  const Policy& policy() const { return policy_; }

 private:
  Policy policy_;
};

inline PolicySnapshot snapshot(const Policy& policy) {
  return PolicySnapshot(policy);
}
inline Policy restore(const PolicySnapshot& snap) { return snap.policy(); }

// Numerically stable softmax of logits / temperature.
std::vector<double> softmax(std::span<const double> logits,
                            double temperature = 1.0);
std::vector<double> log_softmax(std::span<const double> logits,
                                double temperature = 1.0);
double categorical_entropy(std::span<const double> probs);
double categorical_kl(std::span<const double> p, std::span<const double> q);

// Logits for a choice prompt (size K), or next-token logits for a sequence
// prompt given the tokens generated so far (size V).
std::vector<double> action_logits(const Policy& policy,
                                  const PromptInput& prompt,
                                  std::span<const int> generated = {});

RawResponse sample(const Policy& policy, const PromptInput& prompt,
                   double temperature, Rng& rng);

RawResponse greedy_response(const Policy& policy, const PromptInput& prompt);
CanonicalAnswer greedy(const Policy& policy, const PromptInput& prompt,
                       const CanonOptions& canon);

struct LogprobResult {
  double total = 0.0;
  std::vector<double> per_token;  // one entry for choice prompts
};

// Exact log pi(y|x) of the response at the given temperature.
LogprobResult logprob(const Policy& policy, const PromptInput& prompt,
                      const RawResponse& response, double temperature = 1.0);

std::vector<double> grad_logprob(const Policy& policy,
                                 const PromptInput& prompt,
                                 const RawResponse& response,
                                 double temperature = 1.0);

// Adds scale * d log pi(y_t | ...) / d theta for one step t into grad.
// For choice prompts the only valid step is 0.
void accumulate_token_grad(const Policy& policy, const PromptInput& prompt,
                           const RawResponse& response, std::size_t step,
                           double temperature, double scale,
                           std::span<double> grad);

// KL(pi_theta(.|x) || pi_ref(.|x)) at temperature 1. Choice prompts are exact.
// Sequence prompts sum the per-step KL along the contexts visited by
// `along`; an empty `along` uses the current policy's greedy path.
double kl_divergence(const Policy& policy, const PolicySnapshot& ref,
                     const PromptInput& prompt,
                     std::span<const RawResponse> along = {});

// Adds scale * d KL / d theta (same conventions as kl_divergence).
void accumulate_kl_grad(const Policy& policy, const PolicySnapshot& ref,
                        const PromptInput& prompt,
                        std::span<const RawResponse> along, double scale,
                        std::span<double> grad);

// Key under which a response is compared to labels: the option key for
// choice prompts, space-joined non-end tokens for sequence prompts.
std::string response_text(const PromptInput& prompt,
                          std::span<const int> tokens);

}  // namespace ttrv

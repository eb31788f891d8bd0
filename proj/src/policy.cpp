#include "ttrv/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ttrv/error.hpp"

namespace ttrv {

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "tabular") return PolicyKind::tabular;
  if (name == "linear_softmax") return PolicyKind::linear_softmax;
  if (name == "ngram_seq") return PolicyKind::ngram_seq;
  fail(Errc::invalid_argument, "unknown policy kind '" + std::string(name) + "'");
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::tabular: return "tabular";
    case PolicyKind::linear_softmax: return "linear_softmax";
    case PolicyKind::ngram_seq: return "ngram_seq";
  }
  return "tabular";
}

std::size_t PolicyShape::param_count() const {
  switch (kind) {
    case PolicyKind::tabular: return prompt_ids.size() * num_options;
    case PolicyKind::linear_softmax: return num_options * (feature_dim + 1);
    case PolicyKind::ngram_seq: {
      std::size_t rows = 1;
      for (std::size_t i = 0; i < order; ++i) rows *= vocab;
      return rows * vocab;
    }
  }
  return 0;
}

Policy::Policy(PolicyShape shape, std::vector<double> theta)
    : shape_(std::move(shape)), theta_(std::move(theta)) {
  switch (shape_.kind) {
    case PolicyKind::tabular:
    case PolicyKind::linear_softmax:
      if (shape_.num_options < 2) {
        fail(Errc::invalid_argument, "policy needs at least 2 options");
      }
      break;
    case PolicyKind::ngram_seq:
      if (shape_.vocab < 2 || shape_.max_len == 0) {
        fail(Errc::invalid_argument, "ngram policy needs V >= 2 and L >= 1");
      }
      if (std::pow(static_cast<double>(shape_.vocab),
                   static_cast<double>(shape_.order + 1)) > 1e8) {
        fail(Errc::invalid_argument, "ngram table too large");
      }
      break;
  }
  if (theta_.size() != shape_.param_count()) {
    fail(Errc::invalid_argument,
         "parameter count " + std::to_string(theta_.size()) +
             " does not match shape (" + std::to_string(shape_.param_count()) +
             ")");
  }
  for (double v : theta_) {
    if (!std::isfinite(v)) fail(Errc::invalid_argument, "non-finite parameter");
  }
  for (std::size_t i = 0; i < shape_.prompt_ids.size(); ++i) {
    if (!rows_.emplace(shape_.prompt_ids[i], i).second) {
      fail(Errc::invalid_argument,
           "duplicate prompt id '" + shape_.prompt_ids[i] + "'");
    }
  }
}

Policy Policy::zeros(PolicyShape shape) {
  const std::size_t n = shape.param_count();
  return Policy(std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t Policy::row_of(std::string_view prompt_id) const {
  const auto it = rows_.find(std::string(prompt_id));
  if (it == rows_.end()) {
    fail(Errc::invalid_argument, "unseen prompt '" + std::string(prompt_id) + "'");
  }
  return it->second;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits,
                                double temperature) {
  std::vector<double> out(logits.size());
  // log1p over the non-maximal terms keeps full relative precision when one
  // option dominates (log p close to 0).
  const auto top = std::max_element(logits.begin(), logits.end());
  const double mx = *top;
  double rest = 0.0;
  for (auto it = logits.begin(); it != logits.end(); ++it) {
    if (it != top) rest += std::exp((*it - mx) / temperature);
  }
  const double lz = std::log1p(rest);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = (logits[i] - mx) / temperature - lz;
  }
  return out;
}

double categorical_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return std::max(kl, 0.0);
}

namespace {

bool is_choice(const Policy& policy) {
  return policy.kind() != PolicyKind::ngram_seq;
}

void check_compatible(const Policy& policy, const PromptInput& prompt) {
  const auto& s = policy.shape();
  if (is_choice(policy)) {
    if (prompt.kind != PromptKind::choice) {
      fail(Errc::invalid_argument, "choice policy given a sequence prompt");
    }
    if (prompt.options.size() != s.num_options) {
      fail(Errc::invalid_argument,
           "prompt '" + prompt.id + "' has " +
               std::to_string(prompt.options.size()) + " options, policy has " +
               std::to_string(s.num_options));
    }
    if (policy.kind() == PolicyKind::linear_softmax &&
        prompt.features.size() != s.feature_dim) {
      fail(Errc::invalid_argument,
           "prompt '" + prompt.id + "' feature dimension mismatch");
    }
  } else if (prompt.kind != PromptKind::sequence) {
    fail(Errc::invalid_argument, "sequence policy given a choice prompt");
  }
}

// Table row for the next token given prompt context plus generated prefix.
std::size_t ngram_row(const PolicyShape& s, const PromptInput& prompt,
                      std::span<const int> generated) {
  std::size_t row = 0;
  std::size_t mult = 1;
  const std::size_t hist = prompt.context.size() + generated.size();
  // Most recent token carries the highest place value.
  for (std::size_t i = 0; i < s.order; ++i) {
    const std::size_t back = s.order - i;  // distance from the end
    int tok = kEndToken;
    if (back <= hist) {
      const std::size_t pos = hist - back;
      tok = pos < prompt.context.size()
                ? prompt.context[pos]
                : generated[pos - prompt.context.size()];
    }
    if (tok < 0 || static_cast<std::size_t>(tok) >= s.vocab) {
      fail(Errc::invalid_argument, "token id out of vocabulary");
    }
    row += static_cast<std::size_t>(tok) * mult;
    mult *= s.vocab;
  }
  return row;
}

std::size_t option_index(const PromptInput& prompt, std::string_view text) {
  const auto it = std::find(prompt.options.begin(), prompt.options.end(), text);
  if (it == prompt.options.end()) {
    fail(Errc::invalid_argument, "response '" + std::string(text) +
                                     "' is not an option of prompt '" +
                                     prompt.id + "'");
  }
  return static_cast<std::size_t>(it - prompt.options.begin());
}

// Chain rule from d/dlogits into d/dtheta for one decision.
void backprop_logits(const Policy& policy, const PromptInput& prompt,
                     std::span<const int> generated,
                     std::span<const double> dlogits, double scale,
                     std::span<double> grad) {
  const auto& s = policy.shape();
  switch (policy.kind()) {
    case PolicyKind::tabular: {
      const std::size_t off = policy.row_of(prompt.id) * s.num_options;
      for (std::size_t k = 0; k < s.num_options; ++k) {
        grad[off + k] += scale * dlogits[k];
      }
      break;
    }
    case PolicyKind::linear_softmax: {
      const std::size_t d = s.feature_dim;
      const std::size_t bias = s.num_options * d;
      for (std::size_t k = 0; k < s.num_options; ++k) {
        const double g = scale * dlogits[k];
        for (std::size_t j = 0; j < d; ++j) grad[k * d + j] += g * prompt.features[j];
        grad[bias + k] += g;
      }
      break;
    }
    case PolicyKind::ngram_seq: {
      const std::size_t off = ngram_row(s, prompt, generated) * s.vocab;
      for (std::size_t k = 0; k < s.vocab; ++k) grad[off + k] += scale * dlogits[k];
      break;
    }
  }
}

std::size_t step_count(const PromptInput& prompt, const RawResponse& response) {
  return prompt.kind == PromptKind::choice ? 1 : response.tokens.size();
}

std::size_t chosen_at(const PromptInput& prompt, const RawResponse& response,
                      std::size_t step) {
  if (prompt.kind == PromptKind::choice) return option_index(prompt, response.text);
  return static_cast<std::size_t>(response.tokens[step]);
}

std::span<const int> prefix(const PromptInput& prompt,
                            const RawResponse& response, std::size_t step) {
  if (prompt.kind == PromptKind::choice) return {};
  return std::span<const int>(response.tokens).first(step);
}

void check_sequence(const Policy& policy, const RawResponse& response) {
  const auto& s = policy.shape();
  if (response.tokens.size() > s.max_len) {
    fail(Errc::invalid_argument, "sequence longer than max length");
  }
  for (std::size_t i = 0; i < response.tokens.size(); ++i) {
    const int t = response.tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= s.vocab) {
      fail(Errc::invalid_argument, "token id out of vocabulary");
    }
    if (t == kEndToken && i + 1 != response.tokens.size()) {
      fail(Errc::invalid_argument, "end token before the end of a sequence");
    }
  }
}

// Token path along which sequence KL is evaluated when none is given.
RawResponse greedy_path(const Policy& policy, const PromptInput& prompt) {
  return greedy_response(policy, prompt);
}

}  // namespace

std::vector<double> action_logits(const Policy& policy,
                                  const PromptInput& prompt,
                                  std::span<const int> generated) {
  check_compatible(policy, prompt);
  const auto& s = policy.shape();
  const auto theta = policy.params();
  switch (policy.kind()) {
    case PolicyKind::tabular: {
      const std::size_t off = policy.row_of(prompt.id) * s.num_options;
      return {theta.begin() + off, theta.begin() + off + s.num_options};
    }
    case PolicyKind::linear_softmax: {
      const std::size_t d = s.feature_dim;
      std::vector<double> z(s.num_options);
      for (std::size_t k = 0; k < s.num_options; ++k) {
        double acc = theta[s.num_options * d + k];
        for (std::size_t j = 0; j < d; ++j) acc += theta[k * d + j] * prompt.features[j];
        z[k] = acc;
      }
      return z;
    }
    case PolicyKind::ngram_seq: {
      const std::size_t off = ngram_row(s, prompt, generated) * s.vocab;
      return {theta.begin() + off, theta.begin() + off + s.vocab};
    }
  }
  return {};
}

std::string response_text(const PromptInput& prompt,
                          std::span<const int> tokens) {
  (void)prompt;
  std::string out;
  for (int t : tokens) {
    if (t == kEndToken) break;
    if (!out.empty()) out += ' ';
    out += std::to_string(t);
  }
  return out;
}

RawResponse sample(const Policy& policy, const PromptInput& prompt,
                   double temperature, Rng& rng) {
  if (!(temperature > 0.0)) fail(Errc::invalid_argument, "temperature must be > 0");
  RawResponse out;
  if (is_choice(policy)) {
    const auto z = action_logits(policy, prompt);
    const auto k = rng.categorical(softmax(z, temperature));
    out.text = prompt.options[k];
    out.total_logprob = log_softmax(z)[k];
    return out;
  }
  const auto& s = policy.shape();
  while (out.tokens.size() < s.max_len) {
    const auto z = action_logits(policy, prompt, out.tokens);
    const auto k = rng.categorical(softmax(z, temperature));
    out.tokens.push_back(static_cast<int>(k));
    out.token_logprobs.push_back(log_softmax(z)[k]);
    if (static_cast<int>(k) == kEndToken) break;
  }
  out.total_logprob = std::accumulate(out.token_logprobs.begin(),
                                      out.token_logprobs.end(), 0.0);
  out.text = response_text(prompt, out.tokens);
  return out;
}

RawResponse greedy_response(const Policy& policy, const PromptInput& prompt) {
  RawResponse out;
  auto argmax = [](const std::vector<double>& z) {
    // First maximal index.
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  };
  if (is_choice(policy)) {
    const auto z = action_logits(policy, prompt);
    const auto k = argmax(z);
    out.text = prompt.options[k];
    out.total_logprob = log_softmax(z)[k];
    return out;
  }
  const auto& s = policy.shape();
  while (out.tokens.size() < s.max_len) {
    const auto z = action_logits(policy, prompt, out.tokens);
    const auto k = argmax(z);
    out.tokens.push_back(static_cast<int>(k));
    out.token_logprobs.push_back(log_softmax(z)[k]);
    if (static_cast<int>(k) == kEndToken) break;
  }
  out.total_logprob = std::accumulate(out.token_logprobs.begin(),
                                      out.token_logprobs.end(), 0.0);
  out.text = response_text(prompt, out.tokens);
  return out;
}

CanonicalAnswer greedy(const Policy& policy, const PromptInput& prompt,
                       const CanonOptions& canon) {
  return canonicalize(greedy_response(policy, prompt), canon);
}

LogprobResult logprob(const Policy& policy, const PromptInput& prompt,
                      const RawResponse& response, double temperature) {
  check_compatible(policy, prompt);
  if (!is_choice(policy)) check_sequence(policy, response);
  LogprobResult out;
  const std::size_t steps = step_count(prompt, response);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto z = action_logits(policy, prompt, prefix(prompt, response, t));
    const double lp = log_softmax(z, temperature)[chosen_at(prompt, response, t)];
    out.per_token.push_back(lp);
    out.total += lp;
  }
  return out;
}

void accumulate_token_grad(const Policy& policy, const PromptInput& prompt,
                           const RawResponse& response, std::size_t step,
                           double temperature, double scale,
                           std::span<double> grad) {
  const auto pre = prefix(prompt, response, step);
  const auto z = action_logits(policy, prompt, pre);
  auto dz = softmax(z, temperature);
  const std::size_t y = chosen_at(prompt, response, step);
  // d/dz log softmax(z/T)_y = (onehot(y) - softmax(z/T)) / T
  for (double& v : dz) v = -v / temperature;
  dz[y] += 1.0 / temperature;
  backprop_logits(policy, prompt, pre, dz, scale, grad);
}

std::vector<double> grad_logprob(const Policy& policy,
                                 const PromptInput& prompt,
                                 const RawResponse& response,
                                 double temperature) {
  check_compatible(policy, prompt);
  if (!is_choice(policy)) check_sequence(policy, response);
  std::vector<double> grad(policy.params().size(), 0.0);
  const std::size_t steps = step_count(prompt, response);
  for (std::size_t t = 0; t < steps; ++t) {
    accumulate_token_grad(policy, prompt, response, t, temperature, 1.0, grad);
  }
  return grad;
}

namespace {

template <typename Fn>
void for_each_kl_context(const Policy& policy, const PromptInput& prompt,
                         std::span<const RawResponse> along, Fn&& fn) {
  if (is_choice(policy)) {
    fn(std::span<const int>{}, 1.0);
    return;
  }
  if (along.empty()) {
    const auto path = greedy_path(policy, prompt);
    for (std::size_t t = 0; t < path.tokens.size(); ++t) {
      fn(std::span<const int>(path.tokens).first(t), 1.0);
    }
    return;
  }
  const double w = 1.0 / static_cast<double>(along.size());
  for (const auto& r : along) {
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      fn(std::span<const int>(r.tokens).first(t), w);
    }
  }
}

}  // namespace

double kl_divergence(const Policy& policy, const PolicySnapshot& ref,
                     const PromptInput& prompt,
                     std::span<const RawResponse> along) {
  check_compatible(policy, prompt);
  double kl = 0.0;
  for_each_kl_context(policy, prompt, along,
                      [&](std::span<const int> pre, double w) {
                        const auto p = softmax(action_logits(policy, prompt, pre));
                        const auto q = softmax(action_logits(ref.policy(), prompt, pre));
                        kl += w * categorical_kl(p, q);
                      });
  return kl;
}

void accumulate_kl_grad(const Policy& policy, const PolicySnapshot& ref,
                        const PromptInput& prompt,
                        std::span<const RawResponse> along, double scale,
                        std::span<double> grad) {
  check_compatible(policy, prompt);
  for_each_kl_context(
      policy, prompt, along, [&](std::span<const int> pre, double w) {
        const auto lp = log_softmax(action_logits(policy, prompt, pre));
        const auto lq = log_softmax(action_logits(ref.policy(), prompt, pre));
        std::vector<double> p(lp.size());
        double kl = 0.0;
        for (std::size_t i = 0; i < lp.size(); ++i) {
          p[i] = std::exp(lp[i]);
          kl += p[i] * (lp[i] - lq[i]);
        }
        // dKL/dz_k = p_k (log p_k - log q_k - KL)
        std::vector<double> dz(lp.size());
        for (std::size_t i = 0; i < lp.size(); ++i) dz[i] = p[i] * (lp[i] - lq[i] - kl);
        backprop_logits(policy, prompt, pre, dz, scale * w, grad);
      });
}

}  // namespace ttrv

#include "ttrv/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "ttrv/error.hpp"

namespace ttrv {

AdvantageScope parse_advantage_scope(std::string_view name) {
  if (name == "per_group") return AdvantageScope::per_group;
  if (name == "per_batch") return AdvantageScope::per_batch;
  fail(Errc::invalid_argument,
       "unknown advantage scope '" + std::string(name) + "'");
}

std::string_view to_string(AdvantageScope scope) {
  return scope == AdvantageScope::per_group ? "per_group" : "per_batch";
}

Objective parse_objective(std::string_view name) {
  if (name == "reinforce") return Objective::reinforce;
  if (name == "clipped") return Objective::clipped;
  fail(Errc::invalid_argument, "unknown objective '" + std::string(name) + "'");
}

std::string_view to_string(Objective objective) {
  return objective == Objective::reinforce ? "reinforce" : "clipped";
}

void AdaptConfig::validate() const {
  auto bad = [](const char* what) { fail(Errc::invalid_argument, what); };
  if (n_rollouts == 0) bad("n_rollouts must be positive");
  if (!std::isfinite(temperature) || temperature <= 0.0) bad("temperature must be > 0");
  if (!std::isfinite(lr) || lr <= 0.0) bad("lr must be > 0");
  if (!std::isfinite(kl_beta) || kl_beta < 0.0) bad("kl_beta must be >= 0");
  if (!std::isfinite(clip_eps) || clip_eps <= 0.0) bad("clip_eps must be > 0");
  if (inner_epochs == 0) bad("inner_epochs must be positive");
  if (!std::isfinite(std_guard) || std_guard <= 0.0) bad("std_guard must be > 0");
  if (batch_prompts == 0) bad("batch_prompts must be positive");
  if (eval_interval == 0) bad("eval_interval must be positive");
  reward.validate();
}

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

// Population (divide-by-n) moments, two-pass.
template <typename Range>
Moments moments(const Range& groups) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    for (double v : g) {
      sum += v;
      ++n;
    }
  }
  Moments m;
  m.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& g : groups) {
    for (double v : g) ss += (v - m.mean) * (v - m.mean);
  }
  m.std = std::sqrt(ss / static_cast<double>(n));
  return m;
}

AdvantageVector standardize(const std::vector<double>& r, const Moments& m,
                            AdvantageScope scope, double guard) {
  AdvantageVector a;
  a.scope = scope;
  a.values.assign(r.size(), 0.0);
  if (m.std < guard) {
    a.degenerate = true;
    return a;
  }
  for (std::size_t i = 0; i < r.size(); ++i) a.values[i] = (r[i] - m.mean) / m.std;
  return a;
}

}  // namespace

std::vector<AdvantageVector> advantages(
    std::span<const std::vector<double>> rewards, AdvantageScope scope,
    double std_guard) {
  for (const auto& r : rewards) {
    if (r.empty()) fail(Errc::invalid_argument, "empty rollout group");
  }
  std::vector<AdvantageVector> out;
  out.reserve(rewards.size());
  if (scope == AdvantageScope::per_group) {
    for (const auto& r : rewards) {
      const std::span<const double> one[] = {r};
      out.push_back(standardize(r, moments(one), scope, std_guard));
    }
    return out;
  }
  if (rewards.empty()) return out;
  const auto m = moments(rewards);
  for (const auto& r : rewards) out.push_back(standardize(r, m, scope, std_guard));
  return out;
}

std::vector<AdvantageVector> advantages(std::span<const RewardVector> rewards,
                                        AdvantageScope scope,
                                        double std_guard) {
  std::vector<std::vector<double>> values;
  values.reserve(rewards.size());
  for (const auto& r : rewards) values.push_back(r.values);
  return advantages(std::span<const std::vector<double>>(values), scope,
                    std_guard);
}

double clipped_term(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

void check_aligned(std::span<const RolloutGroup> groups,
                   std::span<const AdvantageVector> adv) {
  if (groups.size() != adv.size()) {
    fail(Errc::invalid_argument, "advantages not aligned with groups");
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].rollouts.size() != adv[g].values.size()) {
      fail(Errc::invalid_argument, "advantages not aligned with groups");
    }
  }
}

std::size_t total_rollouts(std::span<const RolloutGroup> groups) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.rollouts.size();
  return n;
}

std::vector<RawResponse> responses_of(const RolloutGroup& group) {
  std::vector<RawResponse> out;
  out.reserve(group.rollouts.size());
  for (const auto& r : group.rollouts) out.push_back(r.response);
  return out;
}

// Behavior log-prob of step t of a rollout.
double behavior_at(const Rollout& r, std::size_t t) {
  if (r.behavior_token_logprobs.empty()) return r.behavior_logprob;
  return r.behavior_token_logprobs[t];
}

}  // namespace

double objective_value(const Policy& policy, const PolicySnapshot& ref,
                       std::span<const RolloutGroup> groups,
                       std::span<const AdvantageVector> adv,
                       const AdaptConfig& config, Objective objective) {
  check_aligned(groups, adv);
  const double inv_t = 1.0 / static_cast<double>(total_rollouts(groups));
  double surrogate = 0.0;
  double kl = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    for (std::size_t j = 0; j < group.rollouts.size(); ++j) {
      const auto& r = group.rollouts[j];
      const double a = adv[g].values[j];
      const auto lp = logprob(policy, group.prompt, r.response, group.temperature);
      if (objective == Objective::reinforce) {
        surrogate += a * lp.total;
      } else {
        for (std::size_t t = 0; t < lp.per_token.size(); ++t) {
          const double ratio = std::exp(lp.per_token[t] - behavior_at(r, t));
          surrogate += clipped_term(ratio, a, config.clip_eps);
        }
      }
    }
    if (config.kl_beta > 0.0) {
      const auto along = responses_of(group);
      kl += kl_divergence(policy, ref, group.prompt, along);
    }
  }
  const double mean_kl = groups.empty() ? 0.0 : kl / static_cast<double>(groups.size());
  return surrogate * inv_t - config.kl_beta * mean_kl;
}

std::vector<double> objective_gradient(const Policy& policy,
                                       const PolicySnapshot& ref,
                                       std::span<const RolloutGroup> groups,
                                       std::span<const AdvantageVector> adv,
                                       const AdaptConfig& config,
                                       Objective objective) {
  check_aligned(groups, adv);
  std::vector<double> grad(policy.params().size(), 0.0);
  if (groups.empty()) return grad;
  const double inv_t = 1.0 / static_cast<double>(total_rollouts(groups));
  const double eps = config.clip_eps;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (!adv[g].degenerate) {
      for (std::size_t j = 0; j < group.rollouts.size(); ++j) {
        const auto& r = group.rollouts[j];
        const double a = adv[g].values[j];
        if (a == 0.0) continue;
        if (objective == Objective::reinforce) {
          const std::size_t steps =
              group.prompt.kind == PromptKind::choice ? 1 : r.response.tokens.size();
          for (std::size_t t = 0; t < steps; ++t) {
            accumulate_token_grad(policy, group.prompt, r.response, t,
                                  group.temperature, a * inv_t, grad);
          }
          continue;
        }
        const auto lp = logprob(policy, group.prompt, r.response, group.temperature);
        for (std::size_t t = 0; t < lp.per_token.size(); ++t) {
          const double ratio = std::exp(lp.per_token[t] - behavior_at(r, t));
          // The clipped branch is flat in theta; only the unclipped branch
          // carries gradient A * rho * dlog pi.
          const bool clipped_out = (a > 0.0 && ratio > 1.0 + eps) ||
                                   (a < 0.0 && ratio < 1.0 - eps);
          if (clipped_out) continue;
          accumulate_token_grad(policy, group.prompt, r.response, t,
                                group.temperature, a * ratio * inv_t, grad);
        }
      }
    }
    if (config.kl_beta > 0.0) {
      const auto along = responses_of(group);
      accumulate_kl_grad(policy, ref, group.prompt, along,
                         -config.kl_beta / static_cast<double>(groups.size()),
                         grad);
    }
  }
  return grad;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Leaves the policy untouched when the update would overflow.
void apply(Policy& policy, std::span<const double> grad, double lr) {
  auto theta = policy.params();
  std::vector<double> next(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    next[i] = theta[i] + lr * grad[i];
    if (!std::isfinite(next[i])) fail(Errc::divergence, "divergence");
  }
  std::copy(next.begin(), next.end(), theta.begin());
}

StepStats base_stats(std::span<const RewardVector> rewards,
                     std::span<const AdvantageVector> adv) {
  StepStats s;
  double rsum = 0.0;
  double asum = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < adv.size(); ++g) {
    if (adv[g].degenerate) ++s.degenerate_groups;
    for (double a : adv[g].values) asum += a;
    n += adv[g].values.size();
    if (g < rewards.size()) {
      for (double r : rewards[g].values) rsum += r;
    }
  }
  if (n > 0) {
    s.mean_reward = rsum / static_cast<double>(n);
    s.mean_advantage = asum / static_cast<double>(n);
  }
  return s;
}

double checked_norm(std::span<const double> grad) {
  const double gn = norm(grad);
  if (!std::isfinite(gn) || gn > kMaxGradNorm) fail(Errc::divergence, "divergence");
  return gn;
}

}  // namespace

StepStats reinforce_step(Policy& policy, const PolicySnapshot& ref,
                         std::span<const RolloutGroup> groups,
                         std::span<const RewardVector> rewards,
                         std::span<const AdvantageVector> adv,
                         const AdaptConfig& config) {
  auto stats = base_stats(rewards, adv);
  const auto grad =
      objective_gradient(policy, ref, groups, adv, config, Objective::reinforce);
  stats.grad_norm = checked_norm(grad);
  apply(policy, grad, config.lr);
  return stats;
}

StepStats clipped_step(Policy& policy, const PolicySnapshot& ref,
                       std::span<const RolloutGroup> groups,
                       std::span<const RewardVector> rewards,
                       std::span<const AdvantageVector> adv,
                       const AdaptConfig& config) {
  auto stats = base_stats(rewards, adv);
  for (std::size_t epoch = 0; epoch < config.inner_epochs; ++epoch) {
    const auto grad =
        objective_gradient(policy, ref, groups, adv, config, Objective::clipped);
    const double gn = checked_norm(grad);
    if (epoch == 0) stats.grad_norm = gn;
    apply(policy, grad, config.lr);
  }
  return stats;
}

}  // namespace ttrv

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ttrv/canon.hpp"
#include "ttrv/policy.hpp"
#include "ttrv/reward.hpp"
#include "ttrv/rollout.hpp"

namespace ttrv {

enum class AdvantageScope { per_group, per_batch };
enum class Objective { reinforce, clipped };

AdvantageScope parse_advantage_scope(std::string_view name);
std::string_view to_string(AdvantageScope scope);
Objective parse_objective(std::string_view name);
std::string_view to_string(Objective objective);

struct AdaptConfig {
  std::size_t n_rollouts = 32;
  double temperature = 1.0;
  double lr = 0.05;
  double kl_beta = 0.01;
  double clip_eps = 0.2;
  std::size_t inner_epochs = 1;
  AdvantageScope advantage_scope = AdvantageScope::per_batch;
  Objective objective = Objective::clipped;
  double std_guard = 1e-8;
  std::size_t steps = 100;
  std::size_t batch_prompts = 8;
  std::size_t eval_interval = 5;
  std::uint64_t seed = 0;
  RewardSpec reward{RewardMode::ttrv, 0.75, 0};
  CanonOptions canon{};

  // Throws Errc::invalid_argument naming the offending field.
  void validate() const;
};

struct AdvantageVector {
  std::vector<double> values;
  AdvantageScope scope = AdvantageScope::per_group;
  bool degenerate = false;  // std guard fired; values are all exactly zero
};

// Standardizes rewards with population mean/std, either within each group or
// jointly over the batch. One output per input group.
std::vector<AdvantageVector> advantages(std::span<const RewardVector> rewards,
                                        AdvantageScope scope,
                                        double std_guard);
std::vector<AdvantageVector> advantages(
    std::span<const std::vector<double>> rewards, AdvantageScope scope,
    double std_guard);

struct StepStats {
  double grad_norm = 0.0;
  double mean_reward = 0.0;
  double mean_advantage = 0.0;
  std::size_t degenerate_groups = 0;
};

// Scalar objective whose gradient drives the update (maximized):
//   reinforce  (1/T) sum_j A_j log pi(y_j) - beta * mean_g KL_g
//   clipped    (1/T) sum_j sum_t min(rho A, clip(rho) A) - beta * mean_g KL_g
// with T the number of rollouts in the batch and rho = pi / pi_behavior per
// token.
double objective_value(const Policy& policy, const PolicySnapshot& ref,
                       std::span<const RolloutGroup> groups,
                       std::span<const AdvantageVector> adv,
                       const AdaptConfig& config, Objective objective);

std::vector<double> objective_gradient(const Policy& policy,
                                       const PolicySnapshot& ref,
                                       std::span<const RolloutGroup> groups,
                                       std::span<const AdvantageVector> adv,
                                       const AdaptConfig& config,
                                       Objective objective);

// Single term of the clipped surrogate.
double clipped_term(double ratio, double advantage, double eps);

// theta <- theta + lr * gradient. Throws Errc::divergence ("divergence") on a
// non-finite gradient or a gradient norm above kMaxGradNorm.
inline constexpr double kMaxGradNorm = 1e6;

StepStats reinforce_step(Policy& policy, const PolicySnapshot& ref,
                         std::span<const RolloutGroup> groups,
                         std::span<const RewardVector> rewards,
                         std::span<const AdvantageVector> adv,
                         const AdaptConfig& config);

// inner_epochs gradient steps on the clipped surrogate; behavior log-probs
// come from the rollouts themselves (captured at sampling time).
StepStats clipped_step(Policy& policy, const PolicySnapshot& ref,
                       std::span<const RolloutGroup> groups,
                       std::span<const RewardVector> rewards,
                       std::span<const AdvantageVector> adv,
                       const AdaptConfig& config);

}  // namespace ttrv

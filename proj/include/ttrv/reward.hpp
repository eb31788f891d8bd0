#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ttrv/canon.hpp"
#include "ttrv/rollout.hpp"

namespace ttrv {

enum class RewardMode { ttrv, freq_only, entropy_only, majority, random };

RewardMode parse_reward_mode(std::string_view name);
std::string_view to_string(RewardMode mode);

struct RewardSpec {
  RewardMode mode = RewardMode::ttrv;
  double alpha = 0.75;
  std::uint64_t random_seed = 0;

  void validate() const;
};

struct RewardVector {
  std::vector<double> values;
  RewardMode mode = RewardMode::ttrv;
  double entropy = 0.0;  // H(P) of the group, nats; recorded for every mode
};

// r1: the empirical probability of the rollout's own answer.
double frequency_reward(const EmpiricalDistribution& dist,
                        const CanonicalAnswer& answer);

// Shannon entropy of the empirical distribution, natural log.
double entropy(const EmpiricalDistribution& dist);

RewardVector combined_rewards(std::string_view prompt_id,
                              std::span<const CanonicalAnswer> answers,
                              const RewardSpec& spec);
RewardVector combined_rewards(const RolloutGroup& group,
                              const RewardSpec& spec);

}  // namespace ttrv

#include "ttrv/reward.hpp"

#include <cmath>

#include "ttrv/error.hpp"
#include "ttrv/rng.hpp"

namespace ttrv {

RewardMode parse_reward_mode(std::string_view name) {
  if (name == "ttrv") return RewardMode::ttrv;
  if (name == "freq_only") return RewardMode::freq_only;
  if (name == "entropy_only") return RewardMode::entropy_only;
  if (name == "majority") return RewardMode::majority;
  if (name == "random") return RewardMode::random;
  fail(Errc::invalid_argument,
       "unknown reward mode '" + std::string(name) + "'");
}

std::string_view to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::ttrv: return "ttrv";
    case RewardMode::freq_only: return "freq_only";
    case RewardMode::entropy_only: return "entropy_only";
    case RewardMode::majority: return "majority";
    case RewardMode::random: return "random";
  }
  return "ttrv";
}

void RewardSpec::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    fail(Errc::invalid_argument, "alpha must be finite and >= 0");
  }
}

std::vector<CanonicalAnswer> RolloutGroup::answers() const {
  std::vector<CanonicalAnswer> out;
  out.reserve(rollouts.size());
  for (const auto& r : rollouts) out.push_back(r.answer);
  return out;
}

double frequency_reward(const EmpiricalDistribution& dist,
                        const CanonicalAnswer& answer) {
  const auto* e = dist.find(answer.key);
  if (e == nullptr) fail(Errc::invalid_argument, "answer not in distribution");
  return e->p;
}

double entropy(const EmpiricalDistribution& dist) {
  double h = 0.0;
  for (const auto& e : dist.entries) {
    if (e.p > 0.0) h -= e.p * std::log(e.p);
  }
  return h;
}

RewardVector combined_rewards(std::string_view prompt_id,
                              std::span<const CanonicalAnswer> answers,
                              const RewardSpec& spec) {
  const auto dist = build_distribution(answers);
  RewardVector out;
  out.mode = spec.mode;
  out.entropy = entropy(dist);
  out.values.reserve(answers.size());

  switch (spec.mode) {
    case RewardMode::ttrv:
      for (const auto& a : answers) {
        out.values.push_back(frequency_reward(dist, a) - spec.alpha * out.entropy);
      }
      break;
    case RewardMode::freq_only:
      for (const auto& a : answers) out.values.push_back(frequency_reward(dist, a));
      break;
    case RewardMode::entropy_only:
      out.values.assign(answers.size(), -out.entropy);
      break;
    case RewardMode::majority: {
      // entries[0] is the modal key with the smallest key among ties.
      const std::string& modal = dist.entries.front().key;
      for (const auto& a : answers) out.values.push_back(a.key == modal ? 1.0 : 0.0);
      break;
    }
    case RewardMode::random: {
      const std::uint64_t pid = hash_string(prompt_id);
      for (std::size_t j = 0; j < answers.size(); ++j) {
        Rng rng(derive_seed(spec.random_seed, {pid, j}));
        out.values.push_back(rng.uniform());
      }
      break;
    }
  }
  return out;
}

RewardVector combined_rewards(const RolloutGroup& group,
                              const RewardSpec& spec) {
  const auto answers = group.answers();
  return combined_rewards(group.prompt_id(), answers, spec);
}

}  // namespace ttrv

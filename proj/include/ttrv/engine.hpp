#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttrv/grpo.hpp"
#include "ttrv/policy.hpp"
#include "ttrv/prompt.hpp"
#include "ttrv/tasks.hpp"

namespace ttrv {

struct StepLog {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_group_entropy = 0.0;  // empirical H(P), nats
  double kl_to_ref = 0.0;
  double grad_norm = 0.0;
  std::optional<double> eval_accuracy;
  std::size_t degenerate_groups = 0;
  std::int64_t wall_ms = 0;
  // Exact mean policy entropy over the groups of the row (choice prompts);
  // not part of trajectory.csv.
  std::optional<double> policy_entropy;
};

enum class RunStatus { ok, diverged };

struct Trajectory {
  AdaptConfig config;
  std::vector<StepLog> steps;  // row 0 is the pre-adaptation state
  Policy final_policy;
  RunStatus status = RunStatus::ok;
  std::string error;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_rollout_entropy = 0.0;  // empirical H over n_rollouts samples
  std::optional<double> mean_policy_entropy;  // exact, choice prompts only
};

// Greedy accuracy plus the empirical rollout entropy at temperature 1.
// Prompts without labels count as incorrect.
EvalResult evaluate(const Policy& policy, std::span<const Prompt> prompts,
                    std::size_t n_rollouts, std::uint64_t seed,
                    const CanonOptions& canon);

struct AdaptOptions {
  bool record_wall_time = false;  // wall_ms stays 0 otherwise
};

// Test-time adaptation loop. The adaptation set is label-free by type; labels
// only enter through eval_set.
Trajectory adapt(Policy policy, std::span<const PromptInput> adapt_set,
                 const AdaptConfig& config,
                 std::span<const Prompt> eval_set = {},
                 const AdaptOptions& options = {});

struct AblationRow {
  RewardMode mode = RewardMode::ttrv;
  std::vector<std::uint64_t> seeds;
  std::vector<double> initial_accuracy;
  std::vector<double> final_accuracy;
  double mean_delta = 0.0;
  double std_delta = 0.0;  // population std over seeds
  double mean_final = 0.0;
};

// Paired comparison: every mode sees the same data and the same seeds.
std::vector<AblationRow> run_ablation_suite(
    const TaskSpec& task, std::size_t adapt_size,
    std::span<const RewardSpec> rewards, const AdaptConfig& shared,
    std::span<const std::uint64_t> seeds);

}  // namespace ttrv

#include "ttrv/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ttrv/error.hpp"
#include "ttrv/rng.hpp"

namespace ttrv {

namespace {

enum StreamTag : std::uint64_t {
  kBatchOrder = 10,
  kRollout = 11,
  kProbe = 12,
  kEval = 13,
  kRandomReward = 14,
};

RolloutGroup rollout_group(const Policy& policy, const PromptInput& prompt,
                           const AdaptConfig& config, std::uint64_t seed_base,
                           std::initializer_list<std::uint64_t> tags) {
  RolloutGroup group;
  group.prompt = prompt;
  group.temperature = config.temperature;
  group.rollouts.reserve(config.n_rollouts);
  const std::uint64_t base = derive_seed(seed_base, tags);
  for (std::size_t j = 0; j < config.n_rollouts; ++j) {
    Rng rng(derive_seed(base, {j}));
    Rollout r;
    r.response = sample(policy, prompt, config.temperature, rng);
    r.answer = canonicalize(r.response, config.canon);
    if (config.temperature == 1.0) {
      r.behavior_logprob = r.response.total_logprob;
      r.behavior_token_logprobs = r.response.token_logprobs;
    } else {
      auto lp = logprob(policy, prompt, r.response, config.temperature);
      r.behavior_logprob = lp.total;
      if (prompt.kind == PromptKind::sequence) {
        r.behavior_token_logprobs = std::move(lp.per_token);
      }
    }
    group.rollouts.push_back(std::move(r));
  }
  return group;
}

std::optional<double> exact_entropy(const Policy& policy,
                                    std::span<const PromptInput> prompts) {
  if (policy.kind() == PolicyKind::ngram_seq || prompts.empty()) return std::nullopt;
  double h = 0.0;
  for (const auto& p : prompts) h += categorical_entropy(softmax(action_logits(policy, p)));
  return h / static_cast<double>(prompts.size());
}

double mean_kl(const Policy& policy, const PolicySnapshot& ref,
               std::span<const PromptInput> prompts) {
  double kl = 0.0;
  for (const auto& p : prompts) kl += kl_divergence(policy, ref, p);
  return kl / static_cast<double>(prompts.size());
}

struct GroupSummary {
  std::vector<RewardVector> rewards;
  std::vector<AdvantageVector> adv;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
  std::size_t degenerate = 0;
};

GroupSummary score(std::span<const RolloutGroup> groups,
                   const AdaptConfig& config, std::size_t step) {
  GroupSummary s;
  RewardSpec spec = config.reward;
  spec.random_seed = derive_seed(config.reward.random_seed, {kRandomReward, step});
  double rsum = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    s.rewards.push_back(combined_rewards(g, spec));
    for (double r : s.rewards.back().values) rsum += r;
    n += g.rollouts.size();
    s.mean_entropy += s.rewards.back().entropy;
  }
  s.mean_reward = rsum / static_cast<double>(n);
  s.mean_entropy /= static_cast<double>(groups.size());
  s.adv = advantages(std::span<const RewardVector>(s.rewards),
                     config.advantage_scope, config.std_guard);
  for (const auto& a : s.adv) s.degenerate += a.degenerate ? 1 : 0;
  return s;
}

}  // namespace

EvalResult evaluate(const Policy& policy, std::span<const Prompt> prompts,
                    std::size_t n_rollouts, std::uint64_t seed,
                    const CanonOptions& canon) {
  EvalResult out;
  if (prompts.empty()) return out;
  std::size_t correct = 0;
  double h = 0.0;
  std::vector<CanonicalAnswer> answers;
  for (const auto& p : prompts) {
    if (p.label && greedy(policy, p.input, canon) == canonicalize(*p.label, canon)) {
      ++correct;
    }
    if (n_rollouts > 0) {
      answers.clear();
      const std::uint64_t base = derive_seed(seed, {kEval, hash_string(p.input.id)});
      for (std::size_t j = 0; j < n_rollouts; ++j) {
        Rng rng(derive_seed(base, {j}));
        answers.push_back(canonicalize(sample(policy, p.input, 1.0, rng), canon));
      }
      h += entropy(build_distribution(answers));
    }
  }
  const double n = static_cast<double>(prompts.size());
  out.accuracy = static_cast<double>(correct) / n;
  out.mean_rollout_entropy = h / n;
  const auto inputs = strip_labels(prompts);
  out.mean_policy_entropy = exact_entropy(policy, inputs);
  return out;
}

Trajectory adapt(Policy policy, std::span<const PromptInput> adapt_set,
                 const AdaptConfig& config, std::span<const Prompt> eval_set,
                 const AdaptOptions& options) {
  config.validate();
  if (adapt_set.empty()) fail(Errc::invalid_argument, "empty adaptation set");
  using Clock = std::chrono::steady_clock;

  const PolicySnapshot ref = snapshot(policy);
  Trajectory traj{config, {}, policy, RunStatus::ok, {}};
  const std::uint64_t seed = config.seed;

  auto eval_accuracy = [&](std::size_t step) -> std::optional<double> {
    if (eval_set.empty()) return std::nullopt;
    // Independent stream: evaluation never touches adaptation randomness.
    return evaluate(policy, eval_set, 0, derive_seed(seed, {kEval, step}),
                    config.canon)
        .accuracy;
  };

  // Row 0: the initial policy probed on every adaptation prompt.
  {
    const auto t0 = Clock::now();
    std::vector<RolloutGroup> probe;
    for (const auto& p : adapt_set) {
      probe.push_back(rollout_group(policy, p, config, seed,
                                    {kProbe, hash_string(p.id)}));
    }
    const auto s = score(probe, config, 0);
    StepLog row;
    row.step = 0;
    row.mean_reward = s.mean_reward;
    row.mean_group_entropy = s.mean_entropy;
    row.kl_to_ref = 0.0;
    row.degenerate_groups = s.degenerate;
    row.eval_accuracy = eval_accuracy(0);
    row.policy_entropy = exact_entropy(policy, adapt_set);
    if (options.record_wall_time) {
      row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        Clock::now() - t0).count();
    }
    traj.steps.push_back(std::move(row));
  }

  const std::size_t n = adapt_set.size();
  const std::size_t batch = std::min(config.batch_prompts, n);
  Rng order_rng(derive_seed(seed, {kBatchOrder}));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  order_rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto t0 = Clock::now();
    std::vector<RolloutGroup> groups;
    groups.reserve(batch);
    for (std::size_t slot = 0; slot < batch; ++slot) {
      if (cursor == n) {
        order_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const auto& p = adapt_set[order[cursor++]];
      groups.push_back(rollout_group(policy, p, config, seed,
                                     {kRollout, step, slot, hash_string(p.id)}));
    }
    const auto s = score(groups, config, step);

    StepLog row;
    row.step = step;
    row.mean_reward = s.mean_reward;
    row.mean_group_entropy = s.mean_entropy;
    row.degenerate_groups = s.degenerate;
    try {
      const auto stats =
          config.objective == Objective::reinforce
              ? reinforce_step(policy, ref, groups, s.rewards, s.adv, config)
              : clipped_step(policy, ref, groups, s.rewards, s.adv, config);
      row.grad_norm = stats.grad_norm;
    } catch (const Error& e) {
      if (e.code() != Errc::divergence) throw;
      traj.status = RunStatus::diverged;
      traj.error = e.what();
      break;
    }
    row.kl_to_ref = mean_kl(policy, ref, adapt_set);
    std::vector<PromptInput> batch_prompts;
    for (const auto& g : groups) batch_prompts.push_back(g.prompt);
    row.policy_entropy = exact_entropy(policy, batch_prompts);
    if (step % config.eval_interval == 0 || step == config.steps) {
      row.eval_accuracy = eval_accuracy(step);
    }
    if (options.record_wall_time) {
      row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        Clock::now() - t0).count();
    }
    traj.steps.push_back(std::move(row));
  }
  traj.final_policy = std::move(policy);
  return traj;
}

std::vector<AblationRow> run_ablation_suite(
    const TaskSpec& task, std::size_t adapt_size,
    std::span<const RewardSpec> rewards, const AdaptConfig& shared,
    std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) fail(Errc::invalid_argument, "ablation needs at least one seed");
  const auto inst = make_instance(task, adapt_size);
  const auto adapt_inputs = strip_labels(inst.adapt_set);
  std::vector<AblationRow> rows;
  for (const auto& spec : rewards) {
    AblationRow row;
    row.mode = spec.mode;
    for (auto seed : seeds) {
      AdaptConfig cfg = shared;
      cfg.reward = spec;
      cfg.seed = seed;
      cfg.canon = inst.canon;
      const auto traj = adapt(inst.base_policy, adapt_inputs, cfg, inst.eval_set);
      row.seeds.push_back(seed);
      row.initial_accuracy.push_back(traj.steps.front().eval_accuracy.value_or(0.0));
      row.final_accuracy.push_back(traj.steps.back().eval_accuracy.value_or(0.0));
    }
    const double k = static_cast<double>(seeds.size());
    double sum = 0.0;
    double final_sum = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      sum += row.final_accuracy[i] - row.initial_accuracy[i];
      final_sum += row.final_accuracy[i];
    }
    row.mean_delta = sum / k;
    row.mean_final = final_sum / k;
    double ss = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const double dlt = row.final_accuracy[i] - row.initial_accuracy[i];
      ss += (dlt - row.mean_delta) * (dlt - row.mean_delta);
    }
    row.std_delta = std::sqrt(ss / k);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ttrv

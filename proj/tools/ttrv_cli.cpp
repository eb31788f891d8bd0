// Command-line front end. Everything goes through the C API in ttrv.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ttrv/ttrv.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using ConfigPtr = std::unique_ptr<ttrv_config, Deleter<ttrv_config, ttrv_config_destroy>>;
using PolicyPtr = std::unique_ptr<ttrv_policy, Deleter<ttrv_policy, ttrv_policy_destroy>>;
using DatasetPtr = std::unique_ptr<ttrv_dataset, Deleter<ttrv_dataset, ttrv_dataset_destroy>>;
using TaskPtr = std::unique_ptr<ttrv_task, Deleter<ttrv_task, ttrv_task_destroy>>;
using TrajectoryPtr =
    std::unique_ptr<ttrv_trajectory, Deleter<ttrv_trajectory, ttrv_trajectory_destroy>>;

struct Failure {
  int exit_code;
  std::string message;
};

void check(ttrv_status status, const std::string& what) {
  if (status == TTRV_OK) return;
  const int code = status == TTRV_ERR_DIVERGENCE ? kExitDiverged : kExitConfig;
  throw Failure{code, what + ": " + ttrv_last_error()};
}

// Flag values that map onto ttrv_config keys. Only flags actually given (or
// provided through TTRV_* environment variables) are forwarded, so library
// defaults apply otherwise. Flags win over environment variables.
class Settings {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    auto& slot = values_[key];
    std::string env = "TTRV_";
    for (char c : key) env += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    app->add_option("--" + flag, slot, help)->envname(env);
  }

  ConfigPtr build() const {
    ttrv_config* raw = nullptr;
    check(ttrv_config_create(&raw), "config");
    ConfigPtr cfg(raw);
    for (const auto& [key, value] : values_) {
      if (value) check(ttrv_config_set(cfg.get(), key.c_str(), value->c_str()), "--" + key);
    }
    return cfg;
  }

  void set_default(const std::string& key, const std::string& value) {
    auto& slot = values_[key];
    if (!slot) slot = value;
  }

 private:
  std::map<std::string, std::optional<std::string>> values_;
};

void add_adapt_flags(CLI::App* app, Settings& s) {
  s.add(app, "n-rollouts", "n_rollouts", "rollouts per prompt (default 32)");
  s.add(app, "alpha", "alpha", "entropy reward weight (default 0.75)");
  s.add(app, "temperature", "temperature", "sampling temperature (default 1.0)");
  s.add(app, "lr", "lr", "learning rate (default 0.05)");
  s.add(app, "steps", "steps", "optimizer steps (default 100)");
  s.add(app, "seed", "seed", "run seed (default 0)");
  s.add(app, "reward-mode", "reward_mode",
        "ttrv | freq_only | entropy_only | majority | random");
  s.add(app, "reward-seed", "reward_seed", "seed for the random reward mode");
  s.add(app, "advantage-scope", "advantage_scope", "per_batch | per_group");
  s.add(app, "objective", "objective", "clipped | reinforce");
  s.add(app, "clip-eps", "clip_eps", "clip range (default 0.2)");
  s.add(app, "kl-beta", "kl_beta", "KL weight (default 0.01)");
  s.add(app, "batch-prompts", "batch_prompts", "prompts per step (default 8)");
  s.add(app, "inner-epochs", "inner_epochs", "gradient steps per batch (default 1)");
  s.add(app, "std-guard", "std_guard", "advantage std guard (default 1e-8)");
  s.add(app, "eval-interval", "eval_interval", "evaluate every k steps (default 5)");
  s.add(app, "scheme", "scheme", "verbatim | trim-casefold | mcq-letter | boxed");
  s.add(app, "alphabet", "alphabet", "option letters for mcq-letter");
  s.add(app, "record-wall-time", "record_wall_time",
        "fill wall_ms (makes trajectory.csv run-dependent)");
}

std::string status_line(const char* what, size_t a, size_t b, const char* a_name,
                        const char* b_name) {
  std::ostringstream os;
  os << what << ": " << a << " " << a_name << ", " << b << " " << b_name;
  return os.str();
}


bool is_task_spec_name(const std::string& task) {
  return !std::filesystem::exists(task) &&
         (task.find(':') != std::string::npos ||
          task == "latent_knowledge" || task == "adversarial_majority" ||
          task == "cross_distribution" || task == "biased_classes");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time reinforcement learning with self-consistency rewards"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ttrv_version()));

  // adapt
  Settings adapt_settings;
  std::string adapt_task;
  std::string adapt_policy;
  std::string adapt_eval;
  std::string adapt_out;
  std::size_t adapt_size = 20;
  auto* adapt = app.add_subcommand("adapt", "run test-time adaptation");
  adapt->add_option("--task", adapt_task,
                    "generator:key=value,... or a dataset file")->required();
  adapt->add_option("--policy", adapt_policy, "policy file (dataset tasks)");
  adapt->add_option("--eval-dataset", adapt_eval, "labeled evaluation dataset");
  adapt->add_option("--adapt-size", adapt_size, "prompts used for adaptation")
      ->envname("TTRV_ADAPT_SIZE")->capture_default_str();
  adapt->add_option("--out", adapt_out, "output directory")->required();
  add_adapt_flags(adapt, adapt_settings);

  // label
  Settings label_settings;
  std::string label_in;
  std::string label_out;
  auto* label = app.add_subcommand("label", "attach rewards and advantages to rollouts");
  label->add_option("input", label_in, "rollout file (line-delimited JSON)")->required();
  label->add_option("-o,--out", label_out, "labeled output file")->required();
  label_settings.add(label, "reward-mode", "reward_mode", "reward mode (default ttrv)");
  label_settings.add(label, "alpha", "alpha", "entropy reward weight (default 0.75)");
  label_settings.add(label, "advantage-scope", "advantage_scope", "per_batch | per_group");
  label_settings.add(label, "std-guard", "std_guard", "advantage std guard");
  label_settings.add(label, "reward-seed", "reward_seed", "seed for random rewards");
  label_settings.add(label, "scheme", "scheme", "canonicalization scheme");
  label_settings.add(label, "alphabet", "alphabet", "option letters for mcq-letter");

  // collect
  Settings collect_settings;
  std::string collect_prompts;
  std::string collect_out;
  auto* collect = app.add_subcommand("collect", "sample rollouts from a chat-completion endpoint");
  collect->add_option("--prompts", collect_prompts, "{prompt_id,text} lines")->required();
  collect->add_option("-o,--out", collect_out, "rollout file")->required();
  collect_settings.add(collect, "endpoint", "endpoint", "base URL, e.g. http://localhost:8000");
  collect_settings.add(collect, "path", "path", "request path (default /v1/chat/completions)");
  collect_settings.add(collect, "model", "model", "model name");
  collect_settings.add(collect, "api-key", "api_key", "bearer token");
  collect_settings.add(collect, "n-rollouts", "n_rollouts", "responses per prompt (default 32)");
  collect_settings.add(collect, "temperature", "temperature", "sampling temperature (default 1.0)");
  collect_settings.add(collect, "max-tokens", "max_tokens", "completion length limit");
  collect_settings.add(collect, "single-requests", "single_requests", "one request per response");
  collect_settings.add(collect, "attempts", "attempts", "tries per request (default 3)");
  collect_settings.add(collect, "backoff-ms", "backoff_ms", "first retry delay (default 500)");
  collect_settings.add(collect, "timeout-s", "timeout_s", "per-request timeout (default 60)");

  // ablate
  Settings ablate_settings;
  std::string ablate_task;
  std::string ablate_out;
  std::string ablate_modes = "ttrv,freq_only,entropy_only,majority,random";
  std::vector<std::uint64_t> ablate_seeds{0, 1, 2, 3, 4};
  std::size_t ablate_adapt_size = 20;
  auto* ablate = app.add_subcommand("ablate", "paired comparison of reward modes");
  ablate->add_option("--task", ablate_task, "generator:key=value,...")->required();
  ablate->add_option("--modes", ablate_modes, "comma-separated reward modes")
      ->capture_default_str();
  ablate->add_option("--seeds", ablate_seeds, "run seeds")->delimiter(',')
      ->capture_default_str();
  ablate->add_option("--adapt-size", ablate_adapt_size, "prompts used for adaptation")
      ->envname("TTRV_ADAPT_SIZE")->capture_default_str();
  ablate->add_option("--out", ablate_out, "comparison table (CSV)")->required();
  add_adapt_flags(ablate, ablate_settings);

  // gen
  std::string gen_task;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "materialize a synthetic task");
  gen->add_option("--task", gen_task, "generator:key=value,...")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  // eval
  Settings eval_settings;
  std::string eval_policy;
  std::string eval_dataset;
  auto* eval = app.add_subcommand("eval", "greedy accuracy and rollout entropy");
  eval->add_option("--policy", eval_policy, "policy file")->required();
  eval->add_option("--dataset", eval_dataset, "labeled dataset file")->required();
  eval_settings.add(eval, "n-rollouts", "n_rollouts", "samples for the entropy estimate");
  eval_settings.add(eval, "seed", "seed", "sampling seed");
  eval_settings.add(eval, "scheme", "scheme", "canonicalization scheme");
  eval_settings.add(eval, "alphabet", "alphabet", "option letters for mcq-letter");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*adapt) {
      auto cfg = adapt_settings.build();
      PolicyPtr policy;
      DatasetPtr adapt_set;
      DatasetPtr eval_set;
      ttrv_policy* p = nullptr;
      ttrv_dataset* d = nullptr;
      if (is_task_spec_name(adapt_task)) {
        ttrv_task* t = nullptr;
        check(ttrv_task_create(adapt_task.c_str(), adapt_size, &t), "--task");
        TaskPtr task(t);
        check(ttrv_task_base_policy(task.get(), &p), "task");
        policy.reset(p);
        check(ttrv_task_adapt_set(task.get(), &d), "task");
        adapt_set.reset(d);
        check(ttrv_task_eval_set(task.get(), &d), "task");
        eval_set.reset(d);
      } else {
        if (adapt_policy.empty()) throw Failure{kExitConfig, "--policy is required for dataset tasks"};
        check(ttrv_policy_load(adapt_policy.c_str(), &p), "--policy");
        policy.reset(p);
        check(ttrv_dataset_load(adapt_task.c_str(), &d), "--task");
        adapt_set.reset(d);
        if (!adapt_eval.empty()) {
          check(ttrv_dataset_load(adapt_eval.c_str(), &d), "--eval-dataset");
          eval_set.reset(d);
        }
      }
      ttrv_trajectory* tr = nullptr;
      const auto status = ttrv_adapt(policy.get(), adapt_set.get(), eval_set.get(),
                                     cfg.get(), &tr);
      TrajectoryPtr traj(tr);
      if (status != TTRV_OK && status != TTRV_ERR_DIVERGENCE) check(status, "adapt");
      if (traj) {
        check(ttrv_trajectory_write(traj.get(), adapt_out.c_str(), adapt_task.c_str()),
              "--out");
      }
      if (status == TTRV_ERR_DIVERGENCE) {
        std::fprintf(stderr, "adapt: diverged (%s); partial trajectory written\n",
                     ttrv_last_error());
        return kExitDiverged;
      }
      const size_t rows = ttrv_trajectory_rows(traj.get());
      ttrv_step_row first{};
      ttrv_step_row last{};
      check(ttrv_trajectory_row(traj.get(), 0, &first), "trajectory");
      check(ttrv_trajectory_row(traj.get(), rows - 1, &last), "trajectory");
      std::printf("steps %zu\nentropy %.6f -> %.6f\n", rows - 1,
                  first.mean_group_entropy, last.mean_group_entropy);
      if (first.has_eval_accuracy && last.has_eval_accuracy) {
        std::printf("accuracy %.4f -> %.4f\n", first.eval_accuracy, last.eval_accuracy);
      }
      return kExitOk;
    }

    if (*label) {
      label_settings.set_default("scheme", "trim-casefold");
      auto cfg = label_settings.build();
      size_t labeled = 0;
      size_t skipped = 0;
      check(ttrv_label_file(label_in.c_str(), label_out.c_str(), cfg.get(), &labeled,
                            &skipped),
            "label");
      std::fprintf(stderr, "%s\n",
                   status_line("label", labeled, skipped, "records labeled", "skipped").c_str());
      return kExitOk;
    }

    if (*collect) {
      auto cfg = collect_settings.build();
      size_t prompts = 0;
      size_t failed = 0;
      const auto status = ttrv_collect_file(collect_prompts.c_str(), collect_out.c_str(),
                                            cfg.get(), &prompts, &failed);
      if (status != TTRV_OK && status != TTRV_ERR_NETWORK) check(status, "collect");
      std::fprintf(stderr, "%s\n",
                   status_line("collect", prompts, failed, "prompts", "failed").c_str());
      return status == TTRV_OK ? kExitOk : kExitConfig;
    }

    if (*ablate) {
      auto cfg = ablate_settings.build();
      check(ttrv_ablate(ablate_task.c_str(), ablate_adapt_size, ablate_modes.c_str(),
                        ablate_seeds.data(), ablate_seeds.size(), cfg.get(),
                        ablate_out.c_str()),
            "ablate");
      return kExitOk;
    }

    if (*gen) {
      ttrv_task* t = nullptr;
      check(ttrv_task_create(gen_task.c_str(), 0, &t), "--task");
      TaskPtr task(t);
      check(ttrv_task_write(task.get(), gen_out.c_str()), "--out");
      return kExitOk;
    }

    if (*eval) {
      auto cfg = eval_settings.build();
      ttrv_policy* p = nullptr;
      check(ttrv_policy_load(eval_policy.c_str(), &p), "--policy");
      PolicyPtr policy(p);
      ttrv_dataset* d = nullptr;
      check(ttrv_dataset_load(eval_dataset.c_str(), &d), "--dataset");
      DatasetPtr dataset(d);
      ttrv_eval_result r{};
      check(ttrv_evaluate(policy.get(), dataset.get(), cfg.get(), &r), "eval");
      std::printf("accuracy %.6f\nmean_rollout_entropy %.6f\n", r.accuracy,
                  r.mean_rollout_entropy);
      if (r.has_policy_entropy) std::printf("mean_policy_entropy %.6f\n", r.mean_policy_entropy);
      return kExitOk;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.exit_code;
  }
  return kExitConfig;
}

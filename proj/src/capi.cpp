#include "ttrv/ttrv.h"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "ttrv/collect.hpp"
#include "ttrv/engine.hpp"
#include "ttrv/error.hpp"
#include "ttrv/io.hpp"
#include "ttrv/tasks.hpp"

struct ttrv_config {
  ttrv::AdaptConfig adapt;
  bool scheme_set = false;
  bool alphabet_set = false;
  bool record_wall_time = false;
  ttrv::CollectConfig collect;
  std::string describe_cache;
};

struct ttrv_policy {
  ttrv::Policy policy;
};

struct ttrv_dataset {
  ttrv::Dataset dataset;
  ttrv::CanonOptions canon;
};

struct ttrv_task {
  ttrv::TaskSpec spec;
  ttrv::TaskInstance instance;
};

struct ttrv_trajectory {
  ttrv::Trajectory trajectory;
};

namespace {

thread_local std::string g_last_error;

ttrv_status to_status(ttrv::Errc code) {
  switch (code) {
    case ttrv::Errc::invalid_argument: return TTRV_ERR_INVALID_ARGUMENT;
    case ttrv::Errc::parse: return TTRV_ERR_PARSE;
    case ttrv::Errc::io: return TTRV_ERR_IO;
    case ttrv::Errc::divergence: return TTRV_ERR_DIVERGENCE;
    case ttrv::Errc::network: return TTRV_ERR_NETWORK;
  }
  return TTRV_ERR_INTERNAL;
}

ttrv_status set_error(ttrv_status status, const std::string& what) {
  g_last_error = what;
  return status;
}

template <typename Fn>
ttrv_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ttrv::Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(TTRV_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(TTRV_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(TTRV_ERR_INTERNAL, "unknown error");
  }
}

#define TTRV_REQUIRE(cond)                                                  \
  do {                                                                      \
    if (!(cond)) return set_error(TTRV_ERR_INVALID_ARGUMENT,                \
                                  "null or invalid argument: " #cond);      \
  } while (0)

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    ttrv::fail(ttrv::Errc::invalid_argument,
               "bad integer '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !std::isfinite(out)) {
    ttrv::fail(ttrv::Errc::invalid_argument,
               "bad number '" + s + "' for " + std::string(key));
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  ttrv::fail(ttrv::Errc::invalid_argument,
             "bad boolean '" + std::string(v) + "' for " + std::string(key));
}

void apply_setting(ttrv_config& c, std::string_view key, std::string_view v) {
  auto& a = c.adapt;
  if (key == "n_rollouts") a.n_rollouts = to_u64(key, v);
  else if (key == "alpha") a.reward.alpha = to_double(key, v);
  else if (key == "temperature") a.temperature = to_double(key, v);
  else if (key == "lr") a.lr = to_double(key, v);
  else if (key == "kl_beta") a.kl_beta = to_double(key, v);
  else if (key == "clip_eps") a.clip_eps = to_double(key, v);
  else if (key == "inner_epochs") a.inner_epochs = to_u64(key, v);
  else if (key == "advantage_scope") a.advantage_scope = ttrv::parse_advantage_scope(v);
  else if (key == "objective") a.objective = ttrv::parse_objective(v);
  else if (key == "std_guard") a.std_guard = to_double(key, v);
  else if (key == "steps") a.steps = to_u64(key, v);
  else if (key == "batch_prompts") a.batch_prompts = to_u64(key, v);
  else if (key == "eval_interval") a.eval_interval = to_u64(key, v);
  else if (key == "seed") a.seed = to_u64(key, v);
  else if (key == "reward_mode") a.reward.mode = ttrv::parse_reward_mode(v);
  else if (key == "reward_seed") a.reward.random_seed = to_u64(key, v);
  else if (key == "scheme") {
    a.canon.scheme = ttrv::parse_scheme(v);
    c.scheme_set = true;
  } else if (key == "alphabet") {
    if (v.empty()) ttrv::fail(ttrv::Errc::invalid_argument, "alphabet must not be empty");
    a.canon.alphabet = std::string(v);
    c.alphabet_set = true;
  } else if (key == "record_wall_time") c.record_wall_time = to_bool(key, v);
  else if (key == "endpoint") c.collect.base_url = std::string(v);
  else if (key == "path") c.collect.path = std::string(v);
  else if (key == "model") c.collect.model = std::string(v);
  else if (key == "api_key") c.collect.api_key = std::string(v);
  else if (key == "max_tokens") c.collect.max_tokens = static_cast<int>(to_u64(key, v));
  else if (key == "single_requests") c.collect.single_requests = to_bool(key, v);
  else if (key == "attempts") c.collect.attempts = static_cast<int>(to_u64(key, v));
  else if (key == "backoff_ms") c.collect.backoff_base = std::chrono::milliseconds(to_u64(key, v));
  else if (key == "timeout_s") c.collect.timeout = std::chrono::seconds(to_u64(key, v));
  else ttrv::fail(ttrv::Errc::invalid_argument, "unknown config key '" + std::string(key) + "'");
}

// Canonicalization implied by a dataset: the header scheme, with the option
// letters as alphabet when every option is a single character.
ttrv::CanonOptions canon_for(const ttrv::Dataset& ds) {
  ttrv::CanonOptions c;
  c.scheme = ds.header.scheme;
  for (const auto& p : ds.prompts) {
    if (p.input.kind != ttrv::PromptKind::choice) continue;
    std::string alpha;
    for (const auto& o : p.input.options) {
      if (o.size() != 1) return c;
      alpha += o;
    }
    c.alphabet = alpha;
    break;
  }
  return c;
}

ttrv::CanonOptions effective_canon(const ttrv_config& c,
                                   const ttrv::CanonOptions& dataset_canon) {
  ttrv::CanonOptions out = dataset_canon;
  if (c.scheme_set) out.scheme = c.adapt.canon.scheme;
  if (c.alphabet_set) out.alphabet = c.adapt.canon.alphabet;
  return out;
}

ttrv_dataset* make_dataset(std::vector<ttrv::Prompt> prompts,
                           const ttrv::CanonOptions& canon) {
  auto* d = new ttrv_dataset;
  d->dataset.header = ttrv::header_for(prompts, canon.scheme);
  d->dataset.prompts = std::move(prompts);
  d->canon = canon;
  return d;
}

std::vector<std::string_view> split_csv(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  while (b <= s.size()) {
    const auto e = s.find(',', b);
    const auto part = s.substr(b, e == std::string_view::npos ? s.size() - b : e - b);
    if (!part.empty()) out.push_back(part);
    if (e == std::string_view::npos) break;
    b = e + 1;
  }
  return out;
}

}  // namespace

extern "C" {

const char* ttrv_version(void) { return "1.0.0"; }

const char* ttrv_last_error(void) { return g_last_error.c_str(); }

const char* ttrv_status_name(ttrv_status status) {
  switch (status) {
    case TTRV_OK: return "ok";
    case TTRV_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TTRV_ERR_PARSE: return "parse error";
    case TTRV_ERR_IO: return "i/o error";
    case TTRV_ERR_DIVERGENCE: return "divergence";
    case TTRV_ERR_NETWORK: return "network error";
    case TTRV_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

ttrv_status ttrv_config_create(ttrv_config** out) {
  TTRV_REQUIRE(out);
  return guarded([&] {
    *out = new ttrv_config;
    return TTRV_OK;
  });
}

void ttrv_config_destroy(ttrv_config* config) { delete config; }

ttrv_status ttrv_config_set(ttrv_config* config, const char* key,
                            const char* value) {
  TTRV_REQUIRE(config && key && value);
  return guarded([&] {
    ttrv_config next = *config;
    apply_setting(next, key, value);
    *config = std::move(next);
    return TTRV_OK;
  });
}

const char* ttrv_config_describe(ttrv_config* config) {
  if (config == nullptr) return "";
  config->describe_cache = ttrv::to_string(config->adapt);
  return config->describe_cache.c_str();
}

ttrv_status ttrv_policy_load(const char* path, ttrv_policy** out) {
  TTRV_REQUIRE(path && out);
  return guarded([&] {
    *out = new ttrv_policy{ttrv::load_policy(path)};
    return TTRV_OK;
  });
}

ttrv_status ttrv_policy_save(const ttrv_policy* policy, const char* path) {
  TTRV_REQUIRE(policy && path);
  return guarded([&] {
    ttrv::save_policy(path, policy->policy);
    return TTRV_OK;
  });
}

void ttrv_policy_destroy(ttrv_policy* policy) { delete policy; }

size_t ttrv_policy_param_count(const ttrv_policy* policy) {
  return policy ? policy->policy.params().size() : 0;
}

ttrv_status ttrv_policy_params(const ttrv_policy* policy, double* out,
                               size_t len) {
  TTRV_REQUIRE(policy && (out || len == 0));
  const auto p = policy->policy.params();
  const size_t n = std::min(len, p.size());
  std::copy(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n), out);
  return TTRV_OK;
}

ttrv_status ttrv_dataset_load(const char* path, ttrv_dataset** out) {
  TTRV_REQUIRE(path && out);
  return guarded([&] {
    auto ds = ttrv::load_dataset(path);
    const auto canon = canon_for(ds);
    *out = new ttrv_dataset{std::move(ds), canon};
    return TTRV_OK;
  });
}

ttrv_status ttrv_dataset_save(const ttrv_dataset* dataset, const char* path) {
  TTRV_REQUIRE(dataset && path);
  return guarded([&] {
    ttrv::save_dataset(path, dataset->dataset);
    return TTRV_OK;
  });
}

void ttrv_dataset_destroy(ttrv_dataset* dataset) { delete dataset; }

size_t ttrv_dataset_size(const ttrv_dataset* dataset) {
  return dataset ? dataset->dataset.prompts.size() : 0;
}

ttrv_status ttrv_task_create(const char* spec, size_t adapt_size,
                             ttrv_task** out) {
  TTRV_REQUIRE(spec && out);
  return guarded([&] {
    auto s = ttrv::parse_task_spec(spec);
    auto inst = ttrv::make_instance(s, adapt_size);
    *out = new ttrv_task{std::move(s), std::move(inst)};
    return TTRV_OK;
  });
}

void ttrv_task_destroy(ttrv_task* task) { delete task; }

ttrv_status ttrv_task_adapt_set(const ttrv_task* task, ttrv_dataset** out) {
  TTRV_REQUIRE(task && out);
  return guarded([&] {
    *out = make_dataset(task->instance.adapt_set, task->instance.canon);
    return TTRV_OK;
  });
}

ttrv_status ttrv_task_eval_set(const ttrv_task* task, ttrv_dataset** out) {
  TTRV_REQUIRE(task && out);
  return guarded([&] {
    *out = make_dataset(task->instance.eval_set, task->instance.canon);
    return TTRV_OK;
  });
}

ttrv_status ttrv_task_base_policy(const ttrv_task* task, ttrv_policy** out) {
  TTRV_REQUIRE(task && out);
  return guarded([&] {
    *out = new ttrv_policy{task->instance.base_policy};
    return TTRV_OK;
  });
}

ttrv_status ttrv_task_write(const ttrv_task* task, const char* dir) {
  TTRV_REQUIRE(task && dir);
  return guarded([&] {
    const std::filesystem::path root(dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) ttrv::fail(ttrv::Errc::io, "cannot create '" + root.string() + "'");
    const auto gen = ttrv::generate(task->spec);
    const auto scheme = task->instance.canon.scheme;
    ttrv::save_dataset(root / "dataset.jsonl",
                       {ttrv::header_for(gen.dataset, scheme), gen.dataset});
    if (!gen.dataset_b.empty()) {
      ttrv::save_dataset(root / "dataset_b.jsonl",
                         {ttrv::header_for(gen.dataset_b, scheme), gen.dataset_b});
    }
    ttrv::save_policy(root / "policy.txt", gen.base_policy);
    if (gen.oracle_policy) ttrv::save_policy(root / "oracle_policy.txt", *gen.oracle_policy);
    return TTRV_OK;
  });
}

ttrv_status ttrv_adapt(const ttrv_policy* policy, const ttrv_dataset* adapt_set,
                       const ttrv_dataset* eval_set, const ttrv_config* config,
                       ttrv_trajectory** out) {
  TTRV_REQUIRE(policy && adapt_set && config && out);
  *out = nullptr;
  return guarded([&] {
    ttrv::AdaptConfig cfg = config->adapt;
    cfg.canon = effective_canon(*config, adapt_set->canon);
    const auto inputs = ttrv::strip_labels(adapt_set->dataset.prompts);
    std::span<const ttrv::Prompt> eval;
    if (eval_set) eval = eval_set->dataset.prompts;
    auto traj = ttrv::adapt(policy->policy, inputs, cfg, eval,
                            {config->record_wall_time});
    const bool diverged = traj.status == ttrv::RunStatus::diverged;
    const std::string error = traj.error;
    *out = new ttrv_trajectory{std::move(traj)};
    if (diverged) return set_error(TTRV_ERR_DIVERGENCE, error);
    return TTRV_OK;
  });
}

void ttrv_trajectory_destroy(ttrv_trajectory* trajectory) { delete trajectory; }

size_t ttrv_trajectory_rows(const ttrv_trajectory* trajectory) {
  return trajectory ? trajectory->trajectory.steps.size() : 0;
}

ttrv_status ttrv_trajectory_row(const ttrv_trajectory* trajectory, size_t index,
                                ttrv_step_row* out) {
  TTRV_REQUIRE(trajectory && out);
  const auto& steps = trajectory->trajectory.steps;
  if (index >= steps.size()) {
    return set_error(TTRV_ERR_INVALID_ARGUMENT, "row index out of range");
  }
  const auto& r = steps[index];
  *out = ttrv_step_row{r.step,
                       r.mean_reward,
                       r.mean_group_entropy,
                       r.kl_to_ref,
                       r.grad_norm,
                       r.eval_accuracy ? 1 : 0,
                       r.eval_accuracy.value_or(0.0),
                       r.degenerate_groups,
                       r.wall_ms};
  return TTRV_OK;
}

ttrv_status ttrv_trajectory_final_policy(const ttrv_trajectory* trajectory,
                                         ttrv_policy** out) {
  TTRV_REQUIRE(trajectory && out);
  return guarded([&] {
    *out = new ttrv_policy{trajectory->trajectory.final_policy};
    return TTRV_OK;
  });
}

ttrv_status ttrv_trajectory_write(const ttrv_trajectory* trajectory,
                                  const char* dir, const char* note) {
  TTRV_REQUIRE(trajectory && dir);
  return guarded([&] {
    const std::filesystem::path root(dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) ttrv::fail(ttrv::Errc::io, "cannot create '" + root.string() + "'");
    const auto& t = trajectory->trajectory;
    {
      std::ofstream csv(root / "trajectory.csv", std::ios::binary | std::ios::trunc);
      if (!csv) ttrv::fail(ttrv::Errc::io, "cannot write trajectory.csv");
      ttrv::write_trajectory_csv(csv, t);
    }
    {
      std::ofstream summary(root / "summary.json", std::ios::binary | std::ios::trunc);
      if (!summary) ttrv::fail(ttrv::Errc::io, "cannot write summary.json");
      std::map<std::string, std::string> extra;
      if (note) extra["task"] = note;
      ttrv::write_summary(summary, t, extra);
    }
    ttrv::save_policy(root / "policy.txt", t.final_policy);
    return TTRV_OK;
  });
}

ttrv_status ttrv_evaluate(const ttrv_policy* policy, const ttrv_dataset* dataset,
                          const ttrv_config* config, ttrv_eval_result* out) {
  TTRV_REQUIRE(policy && dataset && config && out);
  return guarded([&] {
    const auto canon = effective_canon(*config, dataset->canon);
    const auto r = ttrv::evaluate(policy->policy, dataset->dataset.prompts,
                                  config->adapt.n_rollouts, config->adapt.seed, canon);
    *out = ttrv_eval_result{r.accuracy, r.mean_rollout_entropy,
                            r.mean_policy_entropy ? 1 : 0,
                            r.mean_policy_entropy.value_or(0.0)};
    return TTRV_OK;
  });
}

ttrv_status ttrv_label_file(const char* in_path, const char* out_path,
                            const ttrv_config* config, size_t* labeled,
                            size_t* skipped) {
  TTRV_REQUIRE(in_path && out_path && config);
  return guarded([&] {
    ttrv::LabelSpec spec;
    spec.reward = config->adapt.reward;
    spec.scope = config->adapt.advantage_scope;
    spec.std_guard = config->adapt.std_guard;
    spec.canon = config->adapt.canon;
    const auto report = ttrv::label_rollouts_file(in_path, out_path, spec);
    if (labeled) *labeled = report.labeled;
    if (skipped) *skipped = report.skipped;
    return TTRV_OK;
  });
}

ttrv_status ttrv_collect_file(const char* prompts_path, const char* out_path,
                              const ttrv_config* config, size_t* prompts,
                              size_t* failed) {
  TTRV_REQUIRE(prompts_path && out_path && config);
  return guarded([&] {
    ttrv::CollectConfig cc = config->collect;
    cc.n = config->adapt.n_rollouts;
    cc.temperature = config->adapt.temperature;
    if (prompts) *prompts = 0;
    if (failed) *failed = 0;
    std::ifstream in(prompts_path, std::ios::binary);
    if (!in) ttrv::fail(ttrv::Errc::io, std::string("cannot open '") + prompts_path + "'");
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) ttrv::fail(ttrv::Errc::io, std::string("cannot write '") + out_path + "'");
    const auto report = ttrv::collect_rollouts(in, out, cc);
    if (prompts) *prompts = report.prompts;
    if (failed) *failed = report.failed;
    if (report.prompts > 0 && report.failed == report.prompts) {
      return set_error(TTRV_ERR_NETWORK, "all prompts failed");
    }
    return TTRV_OK;
  });
}

ttrv_status ttrv_ablate(const char* task_spec, size_t adapt_size,
                        const char* modes, const uint64_t* seeds, size_t n_seeds,
                        const ttrv_config* config, const char* out_csv) {
  TTRV_REQUIRE(task_spec && modes && (seeds || n_seeds == 0) && config && out_csv);
  return guarded([&] {
    const auto spec = ttrv::parse_task_spec(task_spec);
    std::vector<ttrv::RewardSpec> rewards;
    for (auto m : split_csv(modes)) {
      ttrv::RewardSpec r = config->adapt.reward;
      r.mode = ttrv::parse_reward_mode(m);
      rewards.push_back(r);
    }
    if (rewards.empty()) ttrv::fail(ttrv::Errc::invalid_argument, "no reward modes given");
    const std::vector<std::uint64_t> seed_list(seeds, seeds + n_seeds);
    const auto rows =
        ttrv::run_ablation_suite(spec, adapt_size, rewards, config->adapt, seed_list);
    std::ofstream out(out_csv, std::ios::binary | std::ios::trunc);
    if (!out) ttrv::fail(ttrv::Errc::io, std::string("cannot write '") + out_csv + "'");
    ttrv::write_ablation_csv(out, rows);
    return TTRV_OK;
  });
}

}  // extern "C"

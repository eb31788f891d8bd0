/*
 * C interface to the ttrv test-time adaptation engine.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions return a ttrv_status; on failure ttrv_last_error() describes the
 * problem. The message is thread-local and stays valid until the next failing
 * call on the same thread.
 */
#ifndef TTRV_H_
#define TTRV_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(TTRV_BUILDING_LIBRARY)
#define TTRV_API __declspec(dllexport)
#else
#define TTRV_API __declspec(dllimport)
#endif
#else
#define TTRV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ttrv_status {
  TTRV_OK = 0,
  TTRV_ERR_INVALID_ARGUMENT = 1,
  TTRV_ERR_PARSE = 2,
  TTRV_ERR_IO = 3,
  TTRV_ERR_DIVERGENCE = 4,
  TTRV_ERR_NETWORK = 5,
  TTRV_ERR_INTERNAL = 6
} ttrv_status;

typedef struct ttrv_config ttrv_config;
typedef struct ttrv_policy ttrv_policy;
typedef struct ttrv_dataset ttrv_dataset;
typedef struct ttrv_task ttrv_task;
typedef struct ttrv_trajectory ttrv_trajectory;

TTRV_API const char* ttrv_version(void);
TTRV_API const char* ttrv_last_error(void);
TTRV_API const char* ttrv_status_name(ttrv_status status);

/* ---- configuration ------------------------------------------------------
 * A string-keyed bag of settings shared by every entry point. Keys:
 *   adaptation  n_rollouts alpha temperature lr kl_beta clip_eps
 *               inner_epochs advantage_scope objective std_guard steps
 *               batch_prompts eval_interval seed reward_mode reward_seed
 *               scheme alphabet record_wall_time
 *   collection  endpoint path model api_key max_tokens single_requests
 *               attempts backoff_ms timeout_s
 * Unknown keys and unparsable values yield TTRV_ERR_INVALID_ARGUMENT.
 */
TTRV_API ttrv_status ttrv_config_create(ttrv_config** out);
TTRV_API void ttrv_config_destroy(ttrv_config* config);
TTRV_API ttrv_status ttrv_config_set(ttrv_config* config, const char* key,
                                     const char* value);
/* JSON echo of the adaptation settings. Owned by the config handle; valid
 * until the next call on it. */
TTRV_API const char* ttrv_config_describe(ttrv_config* config);

/* ---- policies ----------------------------------------------------------- */
TTRV_API ttrv_status ttrv_policy_load(const char* path, ttrv_policy** out);
TTRV_API ttrv_status ttrv_policy_save(const ttrv_policy* policy,
                                      const char* path);
TTRV_API void ttrv_policy_destroy(ttrv_policy* policy);
TTRV_API size_t ttrv_policy_param_count(const ttrv_policy* policy);
/* Copies min(len, param_count) parameters into out. */
TTRV_API ttrv_status ttrv_policy_params(const ttrv_policy* policy, double* out,
                                        size_t len);

/* ---- datasets ----------------------------------------------------------- */
TTRV_API ttrv_status ttrv_dataset_load(const char* path, ttrv_dataset** out);
TTRV_API ttrv_status ttrv_dataset_save(const ttrv_dataset* dataset,
                                       const char* path);
TTRV_API void ttrv_dataset_destroy(ttrv_dataset* dataset);
TTRV_API size_t ttrv_dataset_size(const ttrv_dataset* dataset);

/* ---- synthetic tasks ----------------------------------------------------
 * spec: "generator:key=value,..." e.g.
 *   "latent_knowledge:seed=0,n=200,d=16,K=4,tau=0.35,sigma=0.8"
 * adapt_size selects how many prompts form the adaptation split.
 */
TTRV_API ttrv_status ttrv_task_create(const char* spec, size_t adapt_size,
                                      ttrv_task** out);
TTRV_API void ttrv_task_destroy(ttrv_task* task);
TTRV_API ttrv_status ttrv_task_adapt_set(const ttrv_task* task,
                                         ttrv_dataset** out);
TTRV_API ttrv_status ttrv_task_eval_set(const ttrv_task* task,
                                        ttrv_dataset** out);
TTRV_API ttrv_status ttrv_task_base_policy(const ttrv_task* task,
                                           ttrv_policy** out);
/* Writes dataset.jsonl (every prompt), dataset_b.jsonl (cross_distribution),
 * policy.txt (base policy) and, when available, oracle_policy.txt. */
TTRV_API ttrv_status ttrv_task_write(const ttrv_task* task, const char* dir);

/* ---- adaptation --------------------------------------------------------- */
typedef struct ttrv_step_row {
  size_t step;
  double mean_reward;
  double mean_group_entropy;
  double kl_to_ref;
  double grad_norm;
  int has_eval_accuracy;
  double eval_accuracy;
  size_t degenerate_groups;
  int64_t wall_ms;
} ttrv_step_row;

/* Labels in adapt_set are never visible to the reward path. eval_set may be
 * NULL. On divergence the partial trajectory is still returned through out
 * together with TTRV_ERR_DIVERGENCE. */
TTRV_API ttrv_status ttrv_adapt(const ttrv_policy* policy,
                                const ttrv_dataset* adapt_set,
                                const ttrv_dataset* eval_set,
                                const ttrv_config* config,
                                ttrv_trajectory** out);
TTRV_API void ttrv_trajectory_destroy(ttrv_trajectory* trajectory);
TTRV_API size_t ttrv_trajectory_rows(const ttrv_trajectory* trajectory);
TTRV_API ttrv_status ttrv_trajectory_row(const ttrv_trajectory* trajectory,
                                         size_t index, ttrv_step_row* out);
TTRV_API ttrv_status ttrv_trajectory_final_policy(
    const ttrv_trajectory* trajectory, ttrv_policy** out);
/* Writes trajectory.csv, summary.json and policy.txt into dir. `note` is
 * stored in the summary under "task" (may be NULL). */
TTRV_API ttrv_status ttrv_trajectory_write(const ttrv_trajectory* trajectory,
                                           const char* dir, const char* note);

typedef struct ttrv_eval_result {
  double accuracy;
  double mean_rollout_entropy;
  int has_policy_entropy;
  double mean_policy_entropy;
} ttrv_eval_result;

TTRV_API ttrv_status ttrv_evaluate(const ttrv_policy* policy,
                                   const ttrv_dataset* dataset,
                                   const ttrv_config* config,
                                   ttrv_eval_result* out);

/* ---- rollout pipeline --------------------------------------------------- */
TTRV_API ttrv_status ttrv_label_file(const char* in_path, const char* out_path,
                                     const ttrv_config* config,
                                     size_t* labeled, size_t* skipped);
/* TTRV_ERR_NETWORK only when every prompt failed; the output file is written
 * either way. */
TTRV_API ttrv_status ttrv_collect_file(const char* prompts_path,
                                       const char* out_path,
                                       const ttrv_config* config,
                                       size_t* prompts, size_t* failed);

/* modes: comma-separated reward modes, e.g. "ttrv,majority,freq_only". */
TTRV_API ttrv_status ttrv_ablate(const char* task_spec, size_t adapt_size,
                                 const char* modes, const uint64_t* seeds,
                                 size_t n_seeds, const ttrv_config* config,
                                 const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* TTRV_H_ */

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ttrv/ttrv.h"

namespace {

namespace fs = std::filesystem;

template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* ptr = nullptr;
  ~Handle() { Destroy(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Config = Handle<ttrv_config, ttrv_config_destroy>;
using Policy = Handle<ttrv_policy, ttrv_policy_destroy>;
using Dataset = Handle<ttrv_dataset, ttrv_dataset_destroy>;
using Task = Handle<ttrv_task, ttrv_task_destroy>;
using Trajectory = Handle<ttrv_trajectory, ttrv_trajectory_destroy>;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("ttrv_capi_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void set(ttrv_config* c, const char* key, const char* value) {
  ASSERT_EQ(ttrv_config_set(c, key, value), TTRV_OK) << key << ": " << ttrv_last_error();
}

TEST(CApi, ConfigValidation) {
  Config c;
  ASSERT_EQ(ttrv_config_create(c.out()), TTRV_OK);
  EXPECT_EQ(ttrv_config_set(c.get(), "no_such_key", "1"), TTRV_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(ttrv_last_error()).find("no_such_key"), std::string::npos);
  EXPECT_EQ(ttrv_config_set(c.get(), "n_rollouts", "abc"), TTRV_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ttrv_config_set(c.get(), "reward_mode", "nonsense"), TTRV_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ttrv_config_set(c.get(), "alpha", nullptr), TTRV_ERR_INVALID_ARGUMENT);
  set(c.get(), "alpha", "0.5");
  set(c.get(), "reward_mode", "freq_only");
  const std::string described = ttrv_config_describe(c.get());
  EXPECT_NE(described.find("\"alpha\":0.5"), std::string::npos) << described;
  EXPECT_NE(described.find("freq_only"), std::string::npos) << described;
  EXPECT_STREQ(ttrv_status_name(TTRV_ERR_DIVERGENCE), "divergence");
  EXPECT_STREQ(ttrv_version(), "1.0.0");
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(ttrv_config_create(nullptr), TTRV_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ttrv_policy_load(nullptr, nullptr), TTRV_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ttrv_adapt(nullptr, nullptr, nullptr, nullptr, nullptr), TTRV_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ttrv_policy_param_count(nullptr), 0u);
  EXPECT_EQ(ttrv_trajectory_rows(nullptr), 0u);
  ttrv_config_destroy(nullptr);
  ttrv_policy_destroy(nullptr);
}

TEST(CApi, ErrorCodesFollowFailureKind) {
  Policy p;
  EXPECT_EQ(ttrv_policy_load("/nonexistent/policy.txt", p.out()), TTRV_ERR_IO);
  Task t;
  EXPECT_EQ(ttrv_task_create("latent_knowledge:tau=7", 10, t.out()), TTRV_ERR_INVALID_ARGUMENT);
  TempDir dir("errors");
  std::ofstream(dir.path / "bad.jsonl") << "{not json\n";
  Dataset d;
  EXPECT_EQ(ttrv_dataset_load((dir.path / "bad.jsonl").c_str(), d.out()), TTRV_ERR_PARSE);
}

TEST(CApi, TaskAdaptEvaluateAndWrite) {
  Task task;
  ASSERT_EQ(ttrv_task_create("latent_knowledge:seed=1,n=60", 12, task.out()), TTRV_OK);
  Dataset adapt_set, eval_set;
  Policy base;
  ASSERT_EQ(ttrv_task_adapt_set(task.get(), adapt_set.out()), TTRV_OK);
  ASSERT_EQ(ttrv_task_eval_set(task.get(), eval_set.out()), TTRV_OK);
  ASSERT_EQ(ttrv_task_base_policy(task.get(), base.out()), TTRV_OK);
  EXPECT_EQ(ttrv_dataset_size(adapt_set.get()), 12u);
  EXPECT_EQ(ttrv_dataset_size(eval_set.get()), 48u);
  EXPECT_EQ(ttrv_policy_param_count(base.get()), 4u * 16u + 4u);

  Config cfg;
  ASSERT_EQ(ttrv_config_create(cfg.out()), TTRV_OK);
  set(cfg.get(), "steps", "5");
  set(cfg.get(), "n_rollouts", "8");
  set(cfg.get(), "batch_prompts", "4");
  set(cfg.get(), "eval_interval", "5");

  Trajectory traj;
  ASSERT_EQ(ttrv_adapt(base.get(), adapt_set.get(), eval_set.get(), cfg.get(), traj.out()),
            TTRV_OK)
      << ttrv_last_error();
  ASSERT_EQ(ttrv_trajectory_rows(traj.get()), 6u);
  ttrv_step_row row0{}, row5{};
  ASSERT_EQ(ttrv_trajectory_row(traj.get(), 0, &row0), TTRV_OK);
  ASSERT_EQ(ttrv_trajectory_row(traj.get(), 5, &row5), TTRV_OK);
  EXPECT_EQ(ttrv_trajectory_row(traj.get(), 6, &row5), TTRV_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(row0.step, 0u);
  EXPECT_EQ(row0.has_eval_accuracy, 1);
  EXPECT_EQ(row5.has_eval_accuracy, 1);
  EXPECT_EQ(row0.kl_to_ref, 0.0);
  EXPECT_EQ(row5.wall_ms, 0);

  Policy final_policy;
  ASSERT_EQ(ttrv_trajectory_final_policy(traj.get(), final_policy.out()), TTRV_OK);
  ttrv_eval_result before{}, after{};
  ASSERT_EQ(ttrv_evaluate(base.get(), eval_set.get(), cfg.get(), &before), TTRV_OK);
  ASSERT_EQ(ttrv_evaluate(final_policy.get(), eval_set.get(), cfg.get(), &after), TTRV_OK);
  EXPECT_DOUBLE_EQ(before.accuracy, row0.eval_accuracy);
  EXPECT_DOUBLE_EQ(after.accuracy, row5.eval_accuracy);
  EXPECT_EQ(before.has_policy_entropy, 1);

  TempDir dir("adapt");
  ASSERT_EQ(ttrv_trajectory_write(traj.get(), dir.path.c_str(), "demo"), TTRV_OK);
  EXPECT_TRUE(fs::exists(dir.path / "trajectory.csv"));
  EXPECT_NE(read_file(dir.path / "summary.json").find("demo"), std::string::npos);
  Policy reloaded;
  ASSERT_EQ(ttrv_policy_load((dir.path / "policy.txt").c_str(), reloaded.out()), TTRV_OK);
  std::vector<double> a(ttrv_policy_param_count(final_policy.get()));
  std::vector<double> b(a.size());
  ttrv_policy_params(final_policy.get(), a.data(), a.size());
  ttrv_policy_params(reloaded.get(), b.data(), b.size());
  EXPECT_EQ(a, b);

  // The same run through a second handle is identical.
  Trajectory again;
  ASSERT_EQ(ttrv_adapt(base.get(), adapt_set.get(), eval_set.get(), cfg.get(), again.out()),
            TTRV_OK);
  TempDir dir2("adapt2");
  ASSERT_EQ(ttrv_trajectory_write(again.get(), dir2.path.c_str(), "demo"), TTRV_OK);
  EXPECT_EQ(read_file(dir.path / "trajectory.csv"), read_file(dir2.path / "trajectory.csv"));
}

TEST(CApi, DivergenceStillReturnsTrajectory) {
  Task task;
  ASSERT_EQ(ttrv_task_create("latent_knowledge:seed=1,n=20", 10, task.out()), TTRV_OK);
  Dataset adapt_set;
  Policy base;
  ASSERT_EQ(ttrv_task_adapt_set(task.get(), adapt_set.out()), TTRV_OK);
  ASSERT_EQ(ttrv_task_base_policy(task.get(), base.out()), TTRV_OK);
  Config cfg;
  ASSERT_EQ(ttrv_config_create(cfg.out()), TTRV_OK);
  set(cfg.get(), "lr", "1e308");
  set(cfg.get(), "steps", "5");
  set(cfg.get(), "n_rollouts", "8");
  Trajectory traj;
  EXPECT_EQ(ttrv_adapt(base.get(), adapt_set.get(), nullptr, cfg.get(), traj.out()),
            TTRV_ERR_DIVERGENCE);
  ASSERT_NE(traj.get(), nullptr);
  EXPECT_GE(ttrv_trajectory_rows(traj.get()), 1u);
  Policy final_policy;
  ASSERT_EQ(ttrv_trajectory_final_policy(traj.get(), final_policy.out()), TTRV_OK);
  std::vector<double> theta(ttrv_policy_param_count(final_policy.get()));
  ttrv_policy_params(final_policy.get(), theta.data(), theta.size());
  for (double v : theta) EXPECT_TRUE(std::isfinite(v));
}

TEST(CApi, DatasetAndTaskFilesRoundTrip) {
  Task task;
  ASSERT_EQ(ttrv_task_create("cross_distribution:seed=0,n=30", 10, task.out()), TTRV_OK);
  TempDir dir("task");
  ASSERT_EQ(ttrv_task_write(task.get(), dir.path.c_str()), TTRV_OK);
  for (const char* f : {"dataset.jsonl", "dataset_b.jsonl", "policy.txt", "oracle_policy.txt"}) {
    EXPECT_TRUE(fs::exists(dir.path / f)) << f;
  }
  Dataset d;
  ASSERT_EQ(ttrv_dataset_load((dir.path / "dataset.jsonl").c_str(), d.out()), TTRV_OK);
  EXPECT_EQ(ttrv_dataset_size(d.get()), 30u);
  ASSERT_EQ(ttrv_dataset_save(d.get(), (dir.path / "copy.jsonl").c_str()), TTRV_OK);
  EXPECT_EQ(read_file(dir.path / "dataset.jsonl"), read_file(dir.path / "copy.jsonl"));
}

TEST(CApi, LabelFile) {
  TempDir dir("label");
  std::ofstream(dir.path / "in.jsonl")
      << R"({"prompt_id":"q1","responses":["A","A","B","A"]})" "\n"
      << R"({"prompt_id":"q2","responses":[],"error":"HTTP 500"})" "\n";
  Config cfg;
  ASSERT_EQ(ttrv_config_create(cfg.out()), TTRV_OK);
  set(cfg.get(), "advantage_scope", "per_group");
  size_t labeled = 0, skipped = 0;
  ASSERT_EQ(ttrv_label_file((dir.path / "in.jsonl").c_str(), (dir.path / "out.jsonl").c_str(),
                            cfg.get(), &labeled, &skipped),
            TTRV_OK);
  EXPECT_EQ(labeled, 1u);
  EXPECT_EQ(skipped, 1u);
  const auto out = read_file(dir.path / "out.jsonl");
  EXPECT_NE(out.find("\"advantage\":[0.577350269,0.577350269,-1.73205081,0.577350269]"),
            std::string::npos)
      << out;
}

TEST(CApi, AblateWritesPairedRows) {
  Config cfg;
  ASSERT_EQ(ttrv_config_create(cfg.out()), TTRV_OK);
  set(cfg.get(), "steps", "3");
  set(cfg.get(), "n_rollouts", "8");
  TempDir dir("ablate");
  const uint64_t seeds[] = {0, 1};
  const auto csv = dir.path / "ablation.csv";
  ASSERT_EQ(ttrv_ablate("latent_knowledge:n=40", 10, "ttrv,majority", seeds, 2, cfg.get(),
                        csv.c_str()),
            TTRV_OK)
      << ttrv_last_error();
  std::istringstream lines(read_file(csv));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  EXPECT_GE(n, 3u);
  EXPECT_EQ(ttrv_ablate("latent_knowledge:n=40", 10, "", seeds, 2, cfg.get(), csv.c_str()),
            TTRV_ERR_INVALID_ARGUMENT);
}

}  // namespace

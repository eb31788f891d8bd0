#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ttrv/error.hpp"
#include "ttrv/io.hpp"
#include "ttrv/tasks.hpp"

namespace {

using nlohmann::json;

std::string label(const std::string& input, const ttrv::LabelSpec& spec) {
  std::istringstream in(input);
  std::ostringstream out;
  ttrv::label_rollouts(in, out, spec);
  return out.str();
}

ttrv::LabelSpec per_group_spec() {
  ttrv::LabelSpec spec;
  spec.scope = ttrv::AdvantageScope::per_group;
  spec.canon.scheme = ttrv::Scheme::trim_casefold;
  return spec;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ttrv_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

TEST(FormatReal9, ShortestWithinNineDigits) {
  EXPECT_EQ(ttrv::format_real9(0.75), "0.75");
  EXPECT_EQ(ttrv::format_real9(0.0), "0");
  EXPECT_EQ(ttrv::format_real9(-0.0), "0");
  EXPECT_EQ(ttrv::format_real9(1.0), "1");
  EXPECT_EQ(ttrv::format_real9(-std::sqrt(3.0)), "-1.73205081");
  EXPECT_EQ(ttrv::format_real9(1.0 / std::sqrt(3.0)), "0.577350269");
  EXPECT_EQ(ttrv::format_real9(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(ttrv::format_real9(0.1 + 0.2), "0.3");
  EXPECT_EQ(ttrv::format_real9(1e-10), "1e-10");
  EXPECT_EQ(ttrv::format_real9(123456789012.0), "1.23456789e+11");
  EXPECT_THROW(ttrv::format_real9(NAN), ttrv::Error);
}

TEST(Dataset, RoundTripIsExact) {
  for (const char* text : {"latent_knowledge:seed=3,n=30", "adversarial_majority:seed=1"}) {
    const auto spec = ttrv::parse_task_spec(text);
    const auto t = ttrv::generate(spec);
    ttrv::Dataset d{ttrv::header_for(t.dataset, ttrv::Scheme::mcq_letter), t.dataset};
    std::stringstream buf;
    ttrv::write_dataset(buf, d);
    const auto back = ttrv::read_dataset(buf);
    EXPECT_EQ(back.prompts, t.dataset) << text;
    EXPECT_EQ(back.header.k, spec.k);
    EXPECT_EQ(back.header.scheme, ttrv::Scheme::mcq_letter);
  }
}

TEST(Dataset, SequencePromptsRoundTrip) {
  ttrv::Prompt p;
  p.input.id = "s0";
  p.input.kind = ttrv::PromptKind::sequence;
  p.input.context = {1, 2, 3};
  p.label = "2 1";
  ttrv::Dataset d{ttrv::header_for(std::vector<ttrv::Prompt>{p}, ttrv::Scheme::verbatim), {p}};
  std::stringstream buf;
  ttrv::write_dataset(buf, d);
  EXPECT_EQ(ttrv::read_dataset(buf).prompts, d.prompts);
}

TEST(Dataset, RejectsInvalidRecords) {
  const std::string header = R"({"d":2,"K":2,"V":0,"scheme":"mcq-letter"})";
  const std::string good =
      R"({"prompt_id":"a","kind":"choice","features":[1,2],"options":["A","B"],"label":"A"})";
  for (const std::string& bad :
       {std::string(R"({"prompt_id":"a","kind":"choice","features":[1],"options":["A","B"]})"),
        std::string(R"({"prompt_id":"a","kind":"choice","features":[1,2],"options":["A"]})"),
        std::string(R"({"prompt_id":"a","kind":"choice","features":[1,2],"options":["A","B"],"label":"C"})"),
        std::string(R"({"prompt_id":"a","kind":"weird"})"), std::string("not json"), good}) {
    std::istringstream in(header + "\n" + good + "\n" + bad + "\n");
    EXPECT_THROW(ttrv::read_dataset(in), ttrv::Error) << bad;
  }
  std::istringstream ok(header + "\n" + good + "\n");
  EXPECT_EQ(ttrv::read_dataset(ok).prompts.size(), 1u);
}

TEST(PolicyFile, RoundTripIsLossless) {
  ttrv::Rng rng(4);
  for (const char* text : {"latent_knowledge:seed=3,n=10", "adversarial_majority:seed=1"}) {
    const auto t = ttrv::generate(ttrv::parse_task_spec(text));
    auto policy = t.base_policy;
    for (double& v : policy.params()) v += rng.normal() * 1e-7;
    std::stringstream buf;
    ttrv::write_policy(buf, policy);
    EXPECT_EQ(ttrv::read_policy(buf), policy) << text;
  }
  ttrv::PolicyShape s;
  s.kind = ttrv::PolicyKind::ngram_seq;
  s.vocab = 3;
  s.order = 2;
  s.max_len = 4;
  auto ngram = ttrv::Policy::zeros(s);
  for (double& v : ngram.params()) v = rng.normal();
  std::stringstream buf;
  ttrv::write_policy(buf, ngram);
  EXPECT_EQ(ttrv::read_policy(buf), ngram);
}

TEST(PolicyFile, RejectsTruncatedInput) {
  const auto t = ttrv::generate(ttrv::parse_task_spec("latent_knowledge:seed=3,n=10"));
  std::stringstream buf;
  ttrv::write_policy(buf, t.base_policy);
  std::string text = buf.str();
  text.resize(text.size() / 2);
  std::istringstream in(text);
  EXPECT_THROW(ttrv::read_policy(in), ttrv::Error);
  std::istringstream junk("not a policy\n");
  EXPECT_THROW(ttrv::read_policy(junk), ttrv::Error);
}

TEST(Label, WorkedExample) {
  const auto out = label(R"({"prompt_id":"q1","responses":["A","A","B","A"]})" "\n",
                         per_group_spec());
  const auto j = json::parse(out);
  EXPECT_EQ(j["r1"], json::parse("[0.75,0.75,0.25,0.75]"));
  EXPECT_EQ(j["entropy"].get<double>(), 0.562335145);
  EXPECT_EQ(j["advantage"], json::parse("[0.577350269,0.577350269,-1.73205081,0.577350269]"));
  EXPECT_EQ(j["reward"], json::parse("[0.328248642,0.328248642,-0.171751358,0.328248642]"));
  EXPECT_EQ(j["N"], 4);
  EXPECT_EQ(j["M"], 2);
  EXPECT_EQ(j["degenerate"], false);
  EXPECT_EQ(j["keys"], json::parse(R"(["a","a","b","a"])"));
  EXPECT_EQ(j["mode"], "ttrv");
  EXPECT_EQ(j["scope"], "per_group");
  EXPECT_EQ(j["alpha"], 0.75);
}

TEST(Label, UnanimousRecordIsDegenerate) {
  const auto j = json::parse(label(R"({"prompt_id":"u","responses":["x","x","x"]})" "\n",
                                   per_group_spec()));
  EXPECT_EQ(j["degenerate"], true);
  EXPECT_EQ(j["advantage"], json::parse("[0,0,0]"));
  EXPECT_EQ(j["entropy"], 0);
}

TEST(Label, PerBatchTreatsFileAsOneBatch) {
  const std::string input =
      R"({"prompt_id":"a","responses":["A","B"]})" "\n"
      R"({"prompt_id":"b","responses":["C","C"]})" "\n";
  auto spec = per_group_spec();
  spec.reward.mode = ttrv::RewardMode::freq_only;
  spec.scope = ttrv::AdvantageScope::per_batch;
  std::istringstream lines(label(input, spec));
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  // Rewards 0.5,0.5,1,1: batch mean 0.75, std 0.25.
  EXPECT_EQ(json::parse(first)["advantage"], json::parse("[-1,-1]"));
  EXPECT_EQ(json::parse(second)["advantage"], json::parse("[1,1]"));
  EXPECT_EQ(json::parse(second)["degenerate"], false);
}

TEST(Label, RelabelingIsIdempotent) {
  const std::string input =
      R"({"prompt_id":"a","responses":[" Yes","no","YES"],"metadata":{"model":"m","n":3}})" "\n"
      R"({"prompt_id":"b","responses":["1","2","3","1"]})" "\n";
  const auto spec = per_group_spec();
  const auto once = label(input, spec);
  EXPECT_EQ(label(once, spec), once);
  EXPECT_EQ(label(input, spec), once);
}

TEST(Label, ErrorsNameTheLine) {
  const auto spec = per_group_spec();
  auto message = [&](const std::string& input) {
    try {
      label(input, spec);
    } catch (const ttrv::Error& e) {
      EXPECT_EQ(e.code(), ttrv::Errc::parse);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(R"({"prompt_id":"a","responses":["A"]})" "\n{oops\n").find("line 2"),
            std::string::npos);
  EXPECT_NE(message(R"({"prompt_id":"a","responses":[]})" "\n").find("empty responses"),
            std::string::npos);
  EXPECT_NE(message(R"({"responses":["A"]})" "\n").find("line 1"), std::string::npos);
  EXPECT_NE(message(R"({"prompt_id":"a","responses":[1]})" "\n").find("line 1"),
            std::string::npos);
}

TEST(Label, SkipsCollectionFailures) {
  std::istringstream in(R"({"prompt_id":"a","responses":[],"error":"timeout"})" "\n"
                        R"({"prompt_id":"b","responses":["A","B"]})" "\n");
  std::ostringstream out;
  const auto report = ttrv::label_rollouts(in, out, per_group_spec());
  EXPECT_EQ(report.labeled, 1u);
  EXPECT_EQ(report.skipped, 1u);
  EXPECT_EQ(json::parse(out.str())["prompt_id"], "b");
}

TEST(Label, FileVariantLeavesNoPartialOutput) {
  TempDir dir;
  const auto in = dir.path / "in.jsonl";
  const auto out = dir.path / "out.jsonl";
  std::ofstream(in) << R"({"prompt_id":"a","responses":["A"]})" "\n" << "broken\n";
  EXPECT_THROW(ttrv::label_rollouts_file(in, out, per_group_spec()), ttrv::Error);
  EXPECT_FALSE(std::filesystem::exists(out));
  EXPECT_THROW(ttrv::label_rollouts_file(dir.path / "missing.jsonl", out, per_group_spec()),
               ttrv::Error);
}

TEST(Artifacts, TrajectoryCsvLayout) {
  ttrv::Trajectory t{ttrv::AdaptConfig{}, {}, ttrv::Policy::zeros([] {
                       ttrv::PolicyShape s;
                       s.num_options = 2;
                       s.feature_dim = 1;
                       return s;
                     }()),
                     ttrv::RunStatus::ok, {}};
  ttrv::StepLog a;
  a.mean_reward = 0.5;
  a.mean_group_entropy = std::log(2.0);
  a.eval_accuracy = 0.25;
  ttrv::StepLog b;
  b.step = 1;
  b.grad_norm = 1.0 / 3.0;
  b.degenerate_groups = 2;
  t.steps = {a, b};
  std::ostringstream out;
  ttrv::write_trajectory_csv(out, t);
  EXPECT_EQ(out.str(),
            "step,mean_reward,mean_group_entropy,kl_to_ref,grad_norm,eval_accuracy,"
            "degenerate_groups,wall_ms\n"
            "0,0.5,0.693147181,0,0,0.25,0,0\n"
            "1,0,0,0,0.333333333,,2,0\n");

  std::ostringstream summary;
  ttrv::write_summary(summary, t, {{"task", "demo"}});
  const auto j = json::parse(summary.str());
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["config"]["n_rollouts"], 32);
}

}  // namespace

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ttrv/error.hpp"
#include "ttrv/reward.hpp"

namespace {

using ttrv::CanonicalAnswer;
using ttrv::RewardMode;
using ttrv::RewardSpec;
using ttrv::Scheme;

// -(3/4 ln 3/4 + 1/4 ln 1/4), evaluated to 30 digits with an arbitrary
// precision calculator.
constexpr double kH_3_1 = 0.562335144618808350288;

std::vector<CanonicalAnswer> answers(std::string_view keys) {
  std::vector<CanonicalAnswer> out;
  for (char c : keys) out.push_back({std::string(1, c), Scheme::mcq_letter});
  return out;
}

TEST(FrequencyReward, OwnAnswerProbability) {
  auto d = ttrv::build_distribution(answers("AABA"));
  EXPECT_DOUBLE_EQ(ttrv::frequency_reward(d, {"A", Scheme::mcq_letter}), 0.75);
  d = ttrv::build_distribution(answers("AAAA"));
  EXPECT_DOUBLE_EQ(ttrv::frequency_reward(d, {"A", Scheme::mcq_letter}), 1.0);
  d = ttrv::build_distribution(answers("CABACC"));
  EXPECT_DOUBLE_EQ(ttrv::frequency_reward(d, {"B", Scheme::mcq_letter}), 1.0 / 6.0);
}

TEST(FrequencyReward, AbsentKeyIsAnError) {
  const auto d = ttrv::build_distribution(answers("AB"));
  try {
    ttrv::frequency_reward(d, {"C", Scheme::mcq_letter});
    FAIL();
  } catch (const ttrv::Error& e) {
    EXPECT_EQ(std::string(e.what()), "answer not in distribution");
  }
}

TEST(Entropy, Examples) {
  EXPECT_EQ(ttrv::entropy(ttrv::build_distribution(answers("AAAA"))), 0.0);
  EXPECT_NEAR(ttrv::entropy(ttrv::build_distribution(answers("AB"))), std::log(2.0), 1e-15);
  EXPECT_NEAR(ttrv::entropy(ttrv::build_distribution(answers("AABA"))), kH_3_1, 1e-15);
}

TEST(CombinedRewards, TtrvWorkedExample) {
  const auto r = ttrv::combined_rewards("q", answers("AABA"), RewardSpec{RewardMode::ttrv, 0.75, 0});
  const double hi = 0.75 - 0.75 * kH_3_1;  // 0.328248641535893737...
  const double lo = 0.25 - 0.75 * kH_3_1;  // -0.171751358464106262...
  ASSERT_EQ(r.values.size(), 4u);
  EXPECT_NEAR(r.values[0], hi, 1e-15);
  EXPECT_NEAR(r.values[1], hi, 1e-15);
  EXPECT_NEAR(r.values[2], lo, 1e-15);
  EXPECT_NEAR(r.values[3], hi, 1e-15);
  EXPECT_NEAR(r.values[0], 0.328249, 5e-7);
  EXPECT_NEAR(r.values[2], -0.171751, 5e-7);
  EXPECT_NEAR(r.entropy, kH_3_1, 1e-15);
  EXPECT_EQ(r.mode, RewardMode::ttrv);
}

TEST(CombinedRewards, FreqOnlyIsR1) {
  const auto r = ttrv::combined_rewards("q", answers("AABA"), RewardSpec{RewardMode::freq_only, 0.75, 0});
  EXPECT_EQ(r.values, (std::vector<double>{0.75, 0.75, 0.25, 0.75}));
  EXPECT_NEAR(r.entropy, kH_3_1, 1e-15);
}

TEST(CombinedRewards, EntropyOnly) {
  auto r = ttrv::combined_rewards("q", answers("AAA"), RewardSpec{RewardMode::entropy_only, 0.75, 0});
  for (double v : r.values) EXPECT_EQ(v, 0.0);
  r = ttrv::combined_rewards("q", answers("AABA"), RewardSpec{RewardMode::entropy_only, 0.75, 0});
  for (double v : r.values) EXPECT_NEAR(v, -kH_3_1, 1e-15);
}

TEST(CombinedRewards, MajorityTieGoesToSmallestKey) {
  auto r = ttrv::combined_rewards("q", answers("AB"), RewardSpec{RewardMode::majority, 0.75, 0});
  EXPECT_EQ(r.values, (std::vector<double>{1.0, 0.0}));
  r = ttrv::combined_rewards("q", answers("CBCB"), RewardSpec{RewardMode::majority, 0.75, 0});
  EXPECT_EQ(r.values, (std::vector<double>{0.0, 1.0, 0.0, 1.0}));
}

TEST(CombinedRewards, MajoritySumsToModalCount) {
  for (std::string_view keys : {"AABAC", "DCBA", "BBBB", "CADDCAD"}) {
    const auto group = answers(keys);
    const auto d = ttrv::build_distribution(group);
    const auto r = ttrv::combined_rewards("q", group, RewardSpec{RewardMode::majority, 0.75, 0});
    double sum = 0.0;
    for (double v : r.values) sum += v;
    EXPECT_EQ(sum, static_cast<double>(d.entries.front().count)) << keys;
  }
}

TEST(CombinedRewards, RandomIsReproducibleAndIndependent) {
  const auto group = answers("AAAAAAAAAAAAAAAA");
  const RewardSpec spec{RewardMode::random, 0.75, 42};
  const auto a = ttrv::combined_rewards("q1", group, spec);
  const auto b = ttrv::combined_rewards("q1", group, spec);
  EXPECT_EQ(a.values, b.values);
  for (double v : a.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  // Unanimous answers do not make the values equal: each index has its own draw.
  std::set<double> distinct(a.values.begin(), a.values.end());
  EXPECT_EQ(distinct.size(), a.values.size());
  EXPECT_NE(ttrv::combined_rewards("q2", group, spec).values, a.values);
  EXPECT_NE(ttrv::combined_rewards("q1", group, RewardSpec{RewardMode::random, 0.75, 43}).values,
            a.values);
  // Prefix stability: index j's draw does not depend on the group size.
  const auto shorter = ttrv::combined_rewards("q1", answers("AAAA"), spec);
  for (std::size_t j = 0; j < shorter.values.size(); ++j) {
    EXPECT_EQ(shorter.values[j], a.values[j]);
  }
}

TEST(CombinedRewards, EntropyTermCancelsWithinGroup) {
  const auto group = answers("ABCABBDAB");
  const auto d = ttrv::build_distribution(group);
  for (double alpha : {0.0, 0.3, 0.75, 2.0}) {
    const auto r = ttrv::combined_rewards("q", group, RewardSpec{RewardMode::ttrv, alpha, 0});
    for (std::size_t j = 0; j < group.size(); ++j) {
      for (std::size_t k = 0; k < group.size(); ++k) {
        const double dp = d.find(group[j].key)->p - d.find(group[k].key)->p;
        EXPECT_NEAR(r.values[j] - r.values[k], dp, 1e-14);
        if (group[j].key == group[k].key) {
          EXPECT_EQ(r.values[j], r.values[k]);
        }
      }
    }
  }
}

TEST(RewardSpec, Validation) {
  EXPECT_NO_THROW((RewardSpec{RewardMode::ttrv, 0.0, 0}.validate()));
  EXPECT_THROW((RewardSpec{RewardMode::ttrv, -0.1, 0}.validate()), ttrv::Error);
  EXPECT_THROW((RewardSpec{RewardMode::ttrv, NAN, 0}.validate()), ttrv::Error);
  EXPECT_THROW((RewardSpec{RewardMode::ttrv, INFINITY, 0}.validate()), ttrv::Error);
  for (auto m : {RewardMode::ttrv, RewardMode::freq_only, RewardMode::entropy_only,
                 RewardMode::majority, RewardMode::random}) {
    EXPECT_EQ(ttrv::parse_reward_mode(ttrv::to_string(m)), m);
  }
  EXPECT_THROW(ttrv::parse_reward_mode("soft"), ttrv::Error);
}

}  // namespace

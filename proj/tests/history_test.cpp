// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "preact/history.hpp"
#include "support.hpp"

using namespace preact;

namespace {

std::vector<Step> two_steps() {
  Step s1{1, "t1", "a1", {{"p1 cat.", "p1 measure"}}, "o1"};
  Step s2{2, "t2", "a2", {{"p2 cat.", "p2 measure"}}, "o2"};
  return {s1, s2};
}

// Compact label per message: o0, t1, a1, p1, o1, ref.
std::vector<std::string> labels(const std::vector<HistoryMessage>& h) {
  std::vector<std::string> out;
  for (const auto& m : h) {
    switch (m.part) {
      case Part::Observation: out.push_back("o" + std::to_string(m.step)); break;
      case Part::Thought: out.push_back("t" + std::to_string(m.step)); break;
      case Part::Action: out.push_back("a" + std::to_string(m.step)); break;
      case Part::Prediction: out.push_back("p" + std::to_string(m.step)); break;
      case Part::Reflection: out.push_back("ref"); break;
    }
  }
  return out;
}

using L = std::vector<std::string>;

}  // namespace

TEST(BuildHistory, EmptyPrefix) {
  for (auto pol : {HistoryPolicy::react(), HistoryPolicy::permanent(), HistoryPolicy::immediate()})
    EXPECT_EQ(labels(build_history("o", {}, {}, pol)), L{"o0"});
}

TEST(BuildHistory, PermanentKeepsEveryPrediction) {
  auto s = two_steps();
  EXPECT_EQ(labels(build_history("o", s, {}, HistoryPolicy::permanent())),
            (L{"o0", "t1", "a1", "p1", "o1", "t2", "a2", "p2", "o2"}));
}

TEST(BuildHistory, ImmediateKeepsLastPrediction) {
  auto s = two_steps();
  EXPECT_EQ(labels(build_history("o", s, {}, HistoryPolicy::immediate())),
            (L{"o0", "t1", "a1", "o1", "t2", "a2", "p2", "o2"}));
}

TEST(BuildHistory, ReactDropsPredictions) {
  auto s = two_steps();
  EXPECT_EQ(labels(build_history("o", s, {}, HistoryPolicy::react())),
            (L{"o0", "t1", "a1", "o1", "t2", "a2", "o2"}));
}

TEST(BuildHistory, ReflectionsLeadWhenIncluded) {
  auto s = two_steps();
  std::vector<std::string> refs{"I should check the side table."};
  EXPECT_EQ(labels(build_history("o", s, refs, HistoryPolicy::reflexion())),
            (L{"ref", "o0", "t1", "a1", "p1", "o1", "t2", "a2", "p2", "o2"}));
  EXPECT_EQ(labels(build_history("o", s, refs, HistoryPolicy::permanent()))[0], "o0");
}

TEST(BuildHistory, PendingStepKeepsItsPrediction) {
  auto s = two_steps();
  s[1].observation.reset();
  EXPECT_EQ(labels(build_history("o", s, {}, HistoryPolicy::immediate())),
            (L{"o0", "t1", "a1", "o1", "t2", "a2", "p2"}));
}

TEST(BuildHistory, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  const HistoryPolicy policies[] = {HistoryPolicy::react(), HistoryPolicy::permanent(), HistoryPolicy::immediate(),
                                    HistoryPolicy::reflexion(), {Retention::Last, true}, {Retention::None, true}};
  for (int i = 0; i < 300; ++i) {
    auto p = oracle::random_prefix(rng);
    for (const auto& pol : policies) {
      auto got = build_history(p.o0, p.steps, p.reflections, pol);
      ASSERT_TRUE(oracle::same(oracle::history(p.o0, p.steps, p.reflections, pol), got)) << "prefix " << i;
    }
  }
}

TEST(BuildHistory, RetentionOrderingAndGrowth) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    auto p = oracle::random_prefix(rng);
    for (auto& s : p.steps)
      if (!s.observation) s.observation = "late";
    const auto none = build_history(p.o0, p.steps, {}, HistoryPolicy::react());
    const auto last = build_history(p.o0, p.steps, {}, HistoryPolicy::immediate());
    const auto all = build_history(p.o0, p.steps, {}, HistoryPolicy::permanent());
    EXPECT_LE(none.size(), last.size());
    EXPECT_LE(last.size(), all.size());
    if (p.steps.empty()) continue;
    std::span<const Step> shorter(p.steps.data(), p.steps.size() - 1);
    for (auto pol : {HistoryPolicy::react(), HistoryPolicy::permanent()}) {
      auto a = build_history(p.o0, shorter, {}, pol);
      auto b = build_history(p.o0, p.steps, {}, pol);
      ASSERT_LE(a.size(), b.size());
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    }
  }
}

TEST(Truncation, LimitAndMarker) {
  std::string big(10000, 'a');
  auto t = truncate_observation(big);
  EXPECT_EQ(t.size(), kObservationLimit);
  EXPECT_TRUE(t.ends_with(kTruncationMarker));
  EXPECT_EQ(truncate_observation(t), t);
  EXPECT_EQ(truncate_observation("short"), "short");
  EXPECT_EQ(truncate_observation(std::string(kObservationLimit, 'b')).size(), kObservationLimit);
}

TEST(Truncation, KeepsUtf8Whole) {
  std::string s;
  while (s.size() < 6000) s += "\xC3\xA9";  // é
  for (std::size_t shift = 0; shift < 2; ++shift) {
    auto t = truncate_observation(std::string(shift, 'x') + s);
    auto body = t.substr(0, t.size() - kTruncationMarker.size());
    std::size_t tail = body.size();
    // Last byte of the kept body must complete a sequence.
    EXPECT_NE(static_cast<unsigned char>(body[tail - 1]), 0xC3);
  }
}

TEST(RenderMessages, SingleObservation) {
  const auto& tmpl = preact::testing::catalog().get(EnvFamily::HH, Framework::PreAct);
  auto turns = render_messages(build_history("o0 text", {}, {}, HistoryPolicy::permanent()), tmpl);
  ASSERT_EQ(turns.size(), 1u);
  EXPECT_EQ(turns[0].role, Role::User);
  EXPECT_EQ(turns[0].content, "o0 text");
}

TEST(RenderMessages, StepBecomesOneAssistantTurn) {
  const auto& tmpl = preact::testing::catalog().get(EnvFamily::HH, Framework::PreAct);
  std::vector<Step> s{{1, "t1", "a1", {{"p1 cat.", "p1 measure"}}, "o1"}};
  auto turns = render_messages(build_history("o0", s, {}, HistoryPolicy::permanent()), tmpl);
  ASSERT_EQ(turns.size(), 3u);
  EXPECT_EQ(turns[1].role, Role::Assistant);
  EXPECT_EQ(turns[1].content, format_assistant_turn(tmpl, "t1", "a1", s[0].prediction));
  auto t = turns[1].content.find("t1"), a = turns[1].content.find("a1"), p = turns[1].content.find("p1 cat.");
  EXPECT_LT(t, a);
  EXPECT_LT(a, p);
  EXPECT_EQ(turns[2].content, "o1");
}

TEST(RenderMessages, ReflectionOpensFirstUserTurn) {
  const auto& tmpl = preact::testing::catalog().get(EnvFamily::HH, Framework::PreAct);
  std::vector<std::string> refs{"Check the side table first."};
  auto turns = render_messages(build_history("o0", {}, refs, HistoryPolicy::reflexion()), tmpl);
  ASSERT_EQ(turns.size(), 1u);
  EXPECT_EQ(turns[0].content.rfind("Check the side table first.", 0), 0u);
}

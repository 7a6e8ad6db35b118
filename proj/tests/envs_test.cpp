// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "preact/history.hpp"
#include "support.hpp"

using namespace preact;
using preact::testing::registry;

namespace {

std::vector<std::string> task_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, _] : registry().all()) ids.push_back(id);
  return ids;
}

class OracleTest : public ::testing::TestWithParam<std::string> {};

TEST_P(OracleTest, OracleSolvesTask) {
  const auto& spec = registry().get(GetParam());
  auto t = oracle_trajectory(spec, 7);
  EXPECT_EQ(t.outcome, Outcome::Success) << spec.id;
  EXPECT_DOUBLE_EQ(t.score, 1.0);
  EXPECT_EQ(t.framework, Framework::ActOnly);
  EXPECT_EQ(t.steps.size(), spec.oracle.size());
  EXPECT_NO_THROW(validate(t));
}

TEST_P(OracleTest, ResetIsRepeatable) {
  const auto& spec = registry().get(GetParam());
  auto a = reset(spec, 1);
  auto b = reset(spec, 1);
  EXPECT_EQ(a->initial_observation(), b->initial_observation());
  EXPECT_FALSE(a->initial_observation().empty());
  EXPECT_FALSE(a->done());
}

INSTANTIATE_TEST_SUITE_P(Shipped, OracleTest, ::testing::ValuesIn(task_ids()),
                         [](const auto& info) {
                           std::string n = info.param;
                           for (auto& c : n)
                             if (c == '-') c = '_';
                           return n;
                         });

}  // namespace

TEST(Registry, FivePerFamilyTwoTraps) {
  for (auto fam : {EnvFamily::HH, EnvFamily::DB, EnvFamily::LTP, EnvFamily::OS}) {
    auto specs = registry().by_family(fam);
    EXPECT_EQ(specs.size(), 5u) << to_string(fam);
    int traps = 0;
    for (const auto* s : specs) traps += s->trap;
    EXPECT_EQ(traps, 2) << to_string(fam);
  }
  EXPECT_TRUE(registry().by_family(EnvFamily::QA).empty());
  EXPECT_EQ(registry().find("nope"), nullptr);
}

TEST(TaskSpec, QaHasNoSimulator) {
  EXPECT_THROW(parse_task_spec(R"({"id":"qa-1","family":"QA","world":{},"oracle":[]})"), UnknownFamily);
}

TEST(TaskSpec, RejectsBrokenSpecs) {
  EXPECT_THROW(parse_task_spec("not json"), TaskSpecError);
  EXPECT_THROW(parse_task_spec(R"({"family":"HH"})"), TaskSpecError);
}

TEST(Household, LettuceIsNotInTheFridge) {
  auto env = reset(registry().get("hh-trap-lettuce"), 0);
  EXPECT_NE(env->initial_observation().find("put some lettuce on countertop"), std::string::npos);
  auto o = env->step("go to fridge 1");
  EXPECT_EQ(o.observation, "You arrive at fridge 1. The fridge 1 is closed.");
  o = env->step("open fridge 1");
  EXPECT_EQ(o.observation, "You open the fridge 1. In it, you see a bowl 1.");
  o = env->step("take lettuce 1 from fridge 1");
  EXPECT_EQ(o.observation, kNothingHappened);
  EXPECT_FALSE(o.done);
  o = env->step("dance wildly");
  EXPECT_EQ(o.observation, kNothingHappened);
  EXPECT_EQ(env->score(), 0.0);
}

TEST(Household, AdmissibleActionsFollowState) {
  auto env = reset(registry().get("hh-trap-lettuce"), 0);
  auto acts = env->admissible_actions();
  EXPECT_NE(std::find(acts.begin(), acts.end(), "go to side table 1"), acts.end());
  env->step("go to side table 1");
  acts = env->admissible_actions();
  EXPECT_NE(std::find(acts.begin(), acts.end(), "take lettuce 1 from side table 1"), acts.end());
}

TEST(Household, StepAfterDoneIsInert) {
  const auto& spec = registry().get("hh-apple-table");
  auto env = reset(spec, 0);
  EnvOutcome last;
  for (const auto& a : spec.oracle) last = env->step(a);
  EXPECT_TRUE(last.done);
  auto again = env->step("look");
  EXPECT_TRUE(again.done);
  EXPECT_EQ(again.observation, kNothingHappened);
}

TEST(TableQuery, DisplayHeaderIsNotAColumn) {
  const auto& spec = registry().get("db-trap-shop-name");
  auto env = reset(spec, 0);
  auto& db = dynamic_cast<TableQueryEnv&>(*env);
  EXPECT_NE(env->initial_observation().find("Shop Name"), std::string::npos);
  EXPECT_EQ(db.execute("SELECT `Shop Name` FROM shops WHERE City = 'Lisbon'"), "ERROR: Unknown column 'Shop Name'");
  EXPECT_NE(db.execute("DESCRIBE shops").find("('shop_name', 'text')"), std::string::npos);
  EXPECT_EQ(db.execute("SELECT shop_name FROM shops WHERE city = 'Lisbon'"), "[('Blue Anchor',), ('Tagus Books',)]");
  EXPECT_EQ(db.execute("SELECT * FROM nowhere"), "ERROR: Table 'nowhere' doesn't exist");
  EXPECT_EQ(db.execute("SELEC shop_name"), "ERROR: You have an error in your SQL syntax");
}

TEST(TableQuery, AnswerIsOrderInsensitive) {
  const auto& spec = registry().get("db-trap-shop-name");
  auto env = reset(spec, 0);
  auto o = env->step(R"(Answer: ["Tagus Books", "Blue Anchor"])");
  EXPECT_TRUE(o.done);
  EXPECT_EQ(o.observation, "Your answer has been submitted.");
  EXPECT_EQ(env->score(), 1.0);

  auto wrong = reset(spec, 0);
  EXPECT_TRUE(wrong->step(R"(Answer: ["Blue Anchor"])").done);
  EXPECT_EQ(wrong->score(), 0.0);
}

TEST(TableQuery, UpdateChangesState) {
  auto env = reset(registry().get("db-update-stock"), 0);
  auto& db = dynamic_cast<TableQueryEnv&>(*env);
  db.execute("UPDATE inventory SET stock = 0 WHERE item = 'lamp'");
  EXPECT_EQ(db.execute("SELECT stock FROM inventory WHERE item = 'lamp'"), "[(0,)]");
}

TEST(TableQuery, Aggregates) {
  auto env = reset(registry().get("db-count-sales"), 0);
  auto& db = dynamic_cast<TableQueryEnv&>(*env);
  EXPECT_EQ(db.execute("SELECT COUNT(*) FROM employees WHERE dept = 'Sales'"), "[(3,)]");
}

TEST(Puzzle, HostAnswers) {
  const auto& spec = registry().get("ltp-trap-snowman");
  auto env = reset(spec, 0);
  auto& p = dynamic_cast<PuzzleEnv&>(*env);
  EXPECT_EQ(env->step("Did someone spill water?").observation, "No");
  EXPECT_EQ(env->step("Is the weather nice?").observation, "Irrelevant");
  EXPECT_EQ(env->step("Was it made of snow?").observation, "Yes");
  EXPECT_DOUBLE_EQ(env->score(), 0.5);
  EXPECT_EQ(env->step("Was it a snowman?").observation, "Redundant");
  EXPECT_EQ(p.guessed(), 1u);
  auto last = env->step("Did it melt?");
  EXPECT_TRUE(last.done);
  EXPECT_EQ(last.observation.rfind("Yes\nYou have guessed the truth: ", 0), 0u);
  EXPECT_DOUBLE_EQ(env->score(), 1.0);
}

TEST(FileSystem, ShellBasics) {
  auto env = reset(registry().get("os-trap-nested-logs"), 0);
  auto& fs = dynamic_cast<FileSystemEnv&>(*env);
  EXPECT_EQ(fs.run("ls /var/app"), "a.log\nb.log\nold\nreadme.md");
  EXPECT_EQ(fs.run("find /var/app -name '*.log' | wc -l"), "3");
  EXPECT_EQ(fs.run("cat /missing"), "cat: /missing: No such file or directory\n");
  EXPECT_EQ(fs.run("rm -rf /"), "bash: rm: command not found");
  EXPECT_EQ(fs.run("echo hi there"), "hi there");
}

TEST(FileSystem, LongOutputIsTruncated) {
  auto env = reset(registry().get("os-trap-long-log"), 0);
  auto o = env->step("cat /srv/log/app.log");
  EXPECT_LE(o.observation.size(), kObservationLimit);
  EXPECT_TRUE(o.observation.ends_with(kTruncationMarker));
  auto& fs = dynamic_cast<FileSystemEnv&>(*env);
  EXPECT_EQ(fs.run("grep ERROR /srv/log/app.log | wc -l"), "43");
}

TEST(FileSystem, AnswerAndFinish) {
  const auto& spec = registry().get("os-count-accounts");
  auto env = reset(spec, 0);
  EXPECT_EQ(env->step("wc -l /etc/accounts.txt").observation, "6 /etc/accounts.txt");
  auto o = env->step("answer(\"6\")");
  EXPECT_TRUE(o.done);
  EXPECT_EQ(env->score(), 1.0);

  auto other = reset(spec, 0);
  auto f = other->step("finish");
  EXPECT_TRUE(f.done);
  EXPECT_EQ(other->score(), 0.0);
}

TEST(Environments, DefaultTurnLimits) {
  for (auto fam : {EnvFamily::HH, EnvFamily::DB, EnvFamily::LTP, EnvFamily::OS}) EXPECT_GT(default_max_turns(fam), 0);
}

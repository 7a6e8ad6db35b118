// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "preact/runner.hpp"
#include "support.hpp"

using namespace preact;
using preact::testing::catalog;
using preact::testing::registry;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig trap_config(const fs::path& out) {
  auto cfg = parse_config(nlohmann::json{{"instances", {"hh-trap-lettuce", "db-trap-shop-name"}},
                                         {"backend", {{"kind", "scripted"},
                                                      {"script", preact::testing::trap_script().string()}}},
                                         {"output_dir", out.string()}}
                              .dump());
  return cfg;
}

std::vector<fs::path> cell_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (parse_cell_file_name(e.path().filename().string())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Config, Defaults) {
  auto cfg = parse_config("{}");
  EXPECT_EQ(cfg.frameworks, (std::vector<Framework>{Framework::ReAct, Framework::PreAct}));
  EXPECT_EQ(cfg.modes, std::vector<std::string>{"permanent"});
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
  EXPECT_EQ(cfg.workers, 1);
  EXPECT_EQ(cfg.refusal_limit, 3);
  EXPECT_TRUE(cfg.inject_disparity_hint);
}

TEST(Config, RejectsUnknownKeysAndBadJson) {
  EXPECT_THROW(parse_config(R"({"seedz": [1]})"), ConfigError);
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config(R"({"frameworks": ["Tot"]})"), ConfigError);
}

TEST(Config, RelativePathsFollowConfigFile) {
  auto dir = preact::testing::scratch_dir("cfg");
  std::ofstream(dir / "c.json") << R"({"backend": {"kind": "scripted", "script": "s.json"}, "tot": {"bank": "b.jsonl"}})";
  auto cfg = load_config(dir / "c.json");
  EXPECT_EQ(cfg.backend.script, dir / "s.json");
  EXPECT_EQ(cfg.tot.bank, dir / "b.jsonl");
}

TEST(Config, HashIgnoresOutputAndWorkers) {
  auto a = parse_config(R"({"output_dir": "x", "workers": 1})");
  auto b = parse_config(R"({"output_dir": "y", "workers": 8})");
  auto c = parse_config(R"({"seeds": [1]})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Config, Validation) {
  auto cfg = parse_config(R"({"instances": ["nope"]})");
  EXPECT_THROW(validate_config(cfg, registry()), ConfigError);
  cfg = parse_config(R"({"modes": ["sideways"]})");
  EXPECT_THROW(validate_config(cfg, registry()), ConfigError);
  cfg = parse_config(R"({"modes": ["tot"], "tot": {"h": 0.5}})");
  EXPECT_THROW(validate_config(cfg, registry()), ConfigError);
  cfg = parse_config(R"({"instances": ["*"], "modes": ["reflexion"], "reflexion_trials": 2})");
  EXPECT_THROW(validate_config(cfg, registry()), ConfigError);
  cfg.backend.script = preact::testing::trap_script();
  EXPECT_NO_THROW(validate_config(cfg, registry()));
}

TEST(Instances, Selectors) {
  auto cfg = parse_config(R"({"instances": ["HH:*", "db-max-score", "hh-apple-table"]})");
  auto ids = resolve_instances(cfg, registry());
  EXPECT_EQ(ids.size(), 6u);
  cfg = parse_config(R"({"instances": ["*"]})");
  EXPECT_EQ(resolve_instances(cfg, registry()).size(), 20u);
}

TEST(Cells, FileNamesRoundTrip) {
  Cell c{"db-trap-shop-name", Framework::PreAct, "retention-all", 12};
  EXPECT_EQ(c.file_name(), "db-trap-shop-name__PreAct__retention-all__s12.jsonl");
  auto back = parse_cell_file_name(c.file_name());
  ASSERT_TRUE(back);
  EXPECT_EQ(back->task_id, c.task_id);
  EXPECT_EQ(back->framework, c.framework);
  EXPECT_EQ(back->mode, c.mode);
  EXPECT_EQ(back->seed, c.seed);
  EXPECT_FALSE(parse_cell_file_name("report.jsonl"));
  EXPECT_FALSE(parse_cell_file_name("a__PreAct__permanent__sX.jsonl"));
}

TEST(Cells, CrossProduct) {
  auto cfg = parse_config(R"({"instances": ["HH:*"], "modes": ["permanent", "immediate"], "seeds": [0, 1]})");
  EXPECT_EQ(expand_cells(cfg, registry()).size(), 5u * 2 * 2 * 2);
}

TEST(Policy, ForModes) {
  EXPECT_EQ(policy_for(Framework::PreAct, "permanent"), HistoryPolicy::permanent());
  EXPECT_EQ(policy_for(Framework::PreAct, "immediate"), HistoryPolicy::immediate());
  EXPECT_EQ(policy_for(Framework::PreAct, "retention-0"), HistoryPolicy::react());
  EXPECT_EQ(policy_for(Framework::PreAct, "reflexion"), HistoryPolicy::reflexion());
  EXPECT_EQ(policy_for(Framework::ReAct, "permanent"), HistoryPolicy::react());
}

TEST(Backend, LiveNeedsOptInAndCredential) {
  BackendSpec live;
  live.kind = "live";
  live.base_url = "http://127.0.0.1:1/v1";
  live.api_key_env = "PREACT_TEST_UNSET_KEY";
  unsetenv("PREACT_TEST_UNSET_KEY");
  EXPECT_THROW(make_backend(live, false), ConfigError);
  EXPECT_THROW(make_backend(live, true), ConfigError);
  setenv("PREACT_TEST_UNSET_KEY", "x", 1);
  EXPECT_NO_THROW(make_backend(live, true));
  unsetenv("PREACT_TEST_UNSET_KEY");
  BackendSpec odd;
  odd.kind = "magic";
  EXPECT_THROW(make_backend(odd, true), ConfigError);
}

TEST(Run, WritesCellsAndManifest) {
  auto out = preact::testing::scratch_dir("run");
  auto cfg = trap_config(out);
  auto be = make_backend(cfg.backend, false);
  auto r = cmd_run(cfg, {registry(), catalog(), *be});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(cell_files(out).size(), 4u);
  auto manifest = nlohmann::json::parse(slurp(r.manifest));
  EXPECT_EQ(manifest["config_hash"], config_hash(cfg));
  EXPECT_EQ(manifest["templates"].size(), 13u);
  EXPECT_EQ(manifest["cells"].size(), 4u);
  for (const auto& c : manifest["cells"]) EXPECT_EQ(c["status"], "ok");
}

TEST(Run, WorkersDoNotChangeOutput) {
  auto one = preact::testing::scratch_dir("w1");
  auto four = preact::testing::scratch_dir("w4");
  auto cfg = trap_config(one);
  cfg.modes = {"permanent", "immediate"};
  cfg.seeds = {0, 1};
  auto be = make_backend(cfg.backend, false);
  cmd_run(cfg, {registry(), catalog(), *be});
  cfg.output_dir = four;
  cfg.workers = 4;
  cmd_run(cfg, {registry(), catalog(), *be});
  auto a = cell_files(one), b = cell_files(four);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(slurp(a[i]), slurp(b[i])) << a[i];
  EXPECT_EQ(slurp(one / "manifest.json"), slurp(four / "manifest.json"));
}

TEST(Run, BudgetSkipsRemainingCells) {
  auto out = preact::testing::scratch_dir("budget");
  auto cfg = trap_config(out);
  cfg.budget = 3;
  auto be = make_backend(cfg.backend, false);
  auto r = cmd_run(cfg, {registry(), catalog(), *be});
  EXPECT_EQ(r.exit_code, 2);
  int skipped = 0;
  for (const auto& c : r.cells) skipped += c.status == CellStatus::Skipped;
  EXPECT_GE(skipped, 1);
  EXPECT_EQ(cell_files(out).size(), static_cast<std::size_t>(4 - skipped));
}

TEST(Eval, RecordsAndReport) {
  auto out = preact::testing::scratch_dir("eval");
  auto cfg = trap_config(out);
  auto be = make_backend(cfg.backend, false);
  cmd_run(cfg, {registry(), catalog(), *be});
  EvalOptions opts;
  opts.registry = &registry();
  opts.catalog = &catalog();
  auto records = cmd_eval(cell_files(out), opts);
  ASSERT_EQ(records.size(), 4u);
  auto first = nlohmann::json::parse(records[0]);
  EXPECT_EQ(first["env"], "DB");
  EXPECT_EQ(first["framework"], "PreAct");
  EXPECT_EQ(first["sr"], 100.0);
  EXPECT_EQ(nlohmann::json::parse(records[1])["sr"], 0.0);
  write_report(out, records);
  EXPECT_EQ(slurp(out / "report.txt"), render_report(records));
  EXPECT_THROW(cmd_eval({}, opts), EmptyInput);
  opts.metrics = {"bogus"};
  EXPECT_THROW(cmd_eval(cell_files(out), opts), ConfigError);
  opts.metrics = {"strategy"};
  EXPECT_THROW(cmd_eval(cell_files(out), opts), ConfigError);
}

TEST(Eval, JudgeMetrics) {
  auto out = preact::testing::scratch_dir("judge");
  auto cfg = trap_config(out);
  auto be = make_backend(cfg.backend, false);
  cmd_run(cfg, {registry(), catalog(), *be});
  ScriptedBackend judge(script::parse(R"({"rules": [
      {"when": {"request": ["Last Round Replan Score"]}, "respond": "Thought: ok\nLast Round Replan Score: 1"}],
      "default": "Thought: same\nScore 1: 50\nScore 2: 50"})"));
  EvalOptions opts;
  opts.metrics = {"sr", "strategy", "diversity"};
  opts.judge = &judge;
  opts.registry = &registry();
  opts.catalog = &catalog();
  auto records = cmd_eval(cell_files(out), opts);
  auto db_pre = nlohmann::json::parse(records[0]);
  EXPECT_EQ(db_pre["strategy"], 1.0);
  EXPECT_EQ(db_pre["diversity_vs_react"]["ties"], 1.0);
  EXPECT_EQ(db_pre["diversity_vs_react"]["pairs"], 1);
}

TEST(Eval, LtpRefusalWarning) {
  auto out = preact::testing::scratch_dir("ltp");
  auto dir = preact::testing::scratch_dir("ltp-script");
  std::ofstream(dir / "s.json") << R"({"default": "I'm sorry, I cannot assist with that."})";
  auto cfg = parse_config(nlohmann::json{{"instances", {"ltp-trap-snowman"}},
                                         {"frameworks", {"PreAct"}},
                                         {"backend", {{"kind", "scripted"}, {"script", (dir / "s.json").string()}}},
                                         {"output_dir", out.string()}}
                              .dump());
  auto be = make_backend(cfg.backend, false);
  cmd_run(cfg, {registry(), catalog(), *be});
  EvalOptions opts;
  auto records = cmd_eval(cell_files(out), opts);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_TRUE(nlohmann::json::parse(records[0])["ngp"].is_null());
  EXPECT_TRUE(nlohmann::json::parse(records[1]).contains("warning"));
}

TEST(Ablation, MonotoneOnTraps) {
  auto out = preact::testing::scratch_dir("ablate");
  auto cfg = trap_config(out);
  auto be = make_backend(cfg.backend, false);
  auto r = cmd_ablate_retention(cfg, {registry(), catalog(), *be});
  ASSERT_FALSE(r.rows.empty());
  const auto& all = r.rows.back();
  EXPECT_EQ(all.family, "ALL");
  EXPECT_DOUBLE_EQ(all.sr[0], 0.0);
  EXPECT_DOUBLE_EQ(all.sr[1], 0.5);
  EXPECT_DOUBLE_EQ(all.sr[2], 1.0);
  EXPECT_TRUE(fs::exists(out / "ablation.jsonl"));
  EXPECT_TRUE(fs::exists(out / "ablation.txt"));
}

TEST(Harvest, BankFeedsInjectionRun) {
  auto out = preact::testing::scratch_dir("harvest");
  auto cfg = trap_config(out);
  cfg.instances = {"hh-trap-lettuce", "hh-trap-mug", "db-trap-shop-name", "db-trap-unit-price"};
  auto be = make_backend(cfg.backend, false);
  auto bank = cmd_harvest_bank(cfg, {registry(), catalog(), *be}, out / "bank.jsonl");
  EXPECT_GT(bank.size(), 0u);
  EXPECT_EQ(PredictionBank::load(out / "bank.jsonl").entries(), bank.entries());

  auto tot = cfg;
  tot.output_dir = out / "tot";
  tot.instances = {"hh-trap-lettuce", "db-trap-shop-name"};
  tot.frameworks = {Framework::PreAct};
  tot.modes = {"tot"};
  tot.tot.h = 1.0;
  tot.tot.bank = out / "bank.jsonl";
  auto r = cmd_run(tot, {registry(), catalog(), *be});
  EXPECT_EQ(r.exit_code, 0) << (r.cells.empty() ? "" : r.cells[0].error);
}

// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL/SKIP line per check; exits 1 on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "preact/agent.hpp"
#include "preact/eval.hpp"
#include "preact/hash.hpp"
#include "preact/runner.hpp"
#include "preact/strategies.hpp"
#include "support.hpp"

using namespace preact;
using preact::testing::catalog;
using preact::testing::registry;
using preact::testing::scratch_dir;
using preact::testing::trap_script;

namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Result {
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

Result pass(std::string d) { return {Verdict::Pass, std::move(d)}; }
Result fail(std::string d) { return {Verdict::Fail, std::move(d)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(prec);
  ss << v;
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

std::vector<fs::path> cell_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (parse_cell_file_name(e.path().filename().string())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

ExperimentConfig trap_config(const fs::path& out) {
  return parse_config(nlohmann::json{{"instances", {"hh-trap-lettuce", "db-trap-shop-name"}},
                                     {"backend", {{"kind", "scripted"}, {"script", trap_script().string()}}},
                                     {"output_dir", out.string()}}
                          .dump());
}

double sr_of(const RunResult& r, Framework fw) {
  std::vector<Trajectory> ts;
  for (const auto& c : r.cells)
    if (c.cell.framework == fw)
      for (const auto& t : c.trajectories) ts.push_back(t);
  return success_rate(ts);
}

bool is_subsequence(const std::vector<HistoryMessage>& small, const std::vector<HistoryMessage>& big) {
  std::size_t j = 0;
  for (const auto& m : big)
    if (j < small.size() && small[j] == m) ++j;
  return j == small.size();
}

// ---------------------------------------------------------------------------

Result history_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240611);
  const HistoryPolicy policies[] = {HistoryPolicy::react(), HistoryPolicy::immediate(), HistoryPolicy::permanent(),
                                    HistoryPolicy::reflexion()};
  for (int i = 0; i < 1000; ++i) {
    auto p = oracle::random_prefix(rng);
    for (const auto& pol : policies) {
      auto got = build_history(p.o0, p.steps, p.reflections, pol);
      if (!oracle::same(oracle::history(p.o0, p.steps, p.reflections, pol), got))
        return fail("prefix " + std::to_string(i) + " differs for retention " + std::string(to_string(pol.retention)));
    }
    for (bool refl : {false, true}) {
      auto none = build_history(p.o0, p.steps, p.reflections, {Retention::None, refl});
      auto last = build_history(p.o0, p.steps, p.reflections, {Retention::Last, refl});
      auto all = build_history(p.o0, p.steps, p.reflections, {Retention::All, refl});
      if (!is_subsequence(none, last) || !is_subsequence(last, all))
        return fail("retention ordering broken on prefix " + std::to_string(i));
    }
  }
  double s = seconds_since(t0);
  if (s >= 5.0) return fail("took " + fmt(s) + " s");
  return pass("1000 prefixes x 4 policies, " + fmt(s) + " s");
}

Result template_fidelity() {
  static const std::map<std::string, std::string> pinned{
      {"db_preact", "30062c1d073074bbc8d221592bcb8a38bcb8d2277736b27829c50e1ac3efdbab"},
      {"db_react", "45614f394d4df7936126b311a9518129385022d34c9f3b03410548d403df0c56"},
      {"hh_preact", "d7f7bd992fac59e5a79c045593a8408eec9b60062878f64f1c128bbc8e21b788"},
      {"hh_react", "b93b967a832c33ce38d347cd40834317f143c3c7d50aa38bb8a9ed1a33e36dc1"},
      {"judge_diversity", "3173fc19c64e24d44b983347f8569741681f81298ff8337a46d8435636bd9de9"},
      {"judge_strategy", "d61ddbdd709ca8b53170e004b9039df9f8ecea4e6028ddcb968bfc48af821267"},
      {"ltp_preact", "efa9e86c8745e31d27ab4283fffea0637df30d7d2e434a789649348408be770d"},
      {"ltp_react", "42988690eaccb242fb2528356c15768125960fa49811636389390b5f69a27881"},
      {"os_preact", "b870e809726d884116110fb2b8c4ae83411957d785e046cb3e35132a0763cc10"},
      {"os_react", "e82a9578646038f7397524a07854d603b2cb96fe7a9de42e4d5f837c8fe78b6a"},
      {"qa_preact", "dbb5f930c2347dd4c688603bce205223757c8623a6b5409367479d66654162ca"},
      {"qa_react", "87e8ea7257aafc665571c94388c0f15b6e589ab642abf14c4c833c0454056509"},
      {"reflexion", "1208b38ccdf3fa0960fe9d239e3b2b406eb108250b17454a564bd04d7cfa00ea"},
  };
  const auto dir = default_data_dir() / "templates";
  for (const auto& [stem, hash] : pinned) {
    auto bytes = slurp(dir / (stem + ".txt"));
    if (sha256_hex(bytes) != hash) return fail(stem + ".txt hash mismatch");
  }
  if (catalog().hashes() != pinned) return fail("catalog hashes differ from pinned set");

  const std::vector<PredictedOutcome> preds{{"No lettuce in fridge.", "Search the side table 1."},
                                            {"Lettuce found.", "Take it to the countertop 1."}};
  struct Case {
    EnvFamily fam;
    std::string thought, action;
  };
  const Case cases[] = {
      {EnvFamily::HH, "The lettuce may be in the fridge.", "go to fridge 1"},
      {EnvFamily::OS, "Count the files.", "ls /etc | wc -l"},
      {EnvFamily::DB, "Check the column names.", "SELECT shop_name FROM shop WHERE score > 3"},
      {EnvFamily::LTP, "", "Did the man die of cold?"},
      {EnvFamily::QA, "Look up the city.", "Search[Lisbon]"},
  };
  for (const auto& c : cases) {
    const auto& t = catalog().get(c.fam, Framework::PreAct);
    auto parsed = parse_turn(format_assistant_turn(t, c.thought, c.action, preds), t);
    if (!(parsed == ParsedTurn{c.thought, c.action, preds})) return fail(t.name + " does not round-trip");
  }
  return pass("13 hashes pinned, 5 PreAct families round-trip");
}

Result parser_totality() {
  static const char* fragments[] = {
      "Thought:", "THOUGHT:", "Action:", "ACTION:", "Predicted Feedback:", "Prediction:", "Question:",
      "Act:", "Think:", "1.", "2)", "3. ", " ", "\n", "\n\n", "```bash\n", "```sql\n", "```", "Score 1:",
      "Score 2:", "Last Round Replan Score:", "Score:", "[", "]", "-1", "3", "4", "101", "50", "1.5", "abc",
      "go to fridge 1", "finish", "Act: answer(6)", "Action: Operation", "Final Answer:", "I'm sorry",
      "\r\n", "\t", "\xc3\xa9", "\xff", "\x00", "Finish[x]", "SELECT *", "Yes.", "nan", "1e400"};
  constexpr std::size_t nfrag = sizeof fragments / sizeof fragments[0];
  std::mt19937_64 rng(77);
  auto tmpls = catalog().templates();
  long parsed = 0, typed = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string s;
    const int parts = static_cast<int>(rng() % 12);
    for (int k = 0; k < parts; ++k) {
      if (rng() % 5 == 0) {
        s.push_back(static_cast<char>(rng() % 256));
      } else {
        const char* f = fragments[rng() % nfrag];
        s += f[0] == '\0' ? std::string(1, '\0') : std::string(f);
      }
    }
    const auto& t = tmpls[static_cast<std::size_t>(i) % tmpls.size()];
    try {
      auto p = parse_turn(s, t);
      if (p.action.empty()) return fail("empty action accepted for input #" + std::to_string(i));
      ++parsed;
    } catch (const ParseError&) {
      ++typed;
    } catch (const std::exception& e) {
      return fail("parse_turn untyped error on input #" + std::to_string(i) + ": " + e.what());
    }
    for (auto* judge : {&parse_diversity_verdict, &parse_strategy_verdict}) {
      try {
        auto v = (*judge)(s);
        if (v.scores.empty()) return fail("verdict without scores for input #" + std::to_string(i));
        ++parsed;
      } catch (const JudgeParseFailure&) {
        ++typed;
      } catch (const JudgeRangeError&) {
        ++typed;
      } catch (const std::exception& e) {
        return fail("judge parser untyped error on input #" + std::to_string(i) + ": " + e.what());
      }
    }
  }
  return pass("100000 inputs, " + std::to_string(parsed) + " parsed, " + std::to_string(typed) + " typed errors");
}

std::map<std::string, std::string> full_pipeline(const fs::path& out, const fs::path& bank_path) {
  auto cfg = parse_config(nlohmann::json{{"instances", {"*"}},
                                         {"modes", {"permanent", "immediate", "reflexion", "tot"}},
                                         {"reflexion_trials", 2},
                                         {"tot", {{"n", 2}, {"h", 0.5}, {"bank", bank_path.string()}}},
                                         {"seeds", {0, 1}},
                                         {"workers", 4},
                                         {"backend", {{"kind", "scripted"}, {"script", trap_script().string()}}},
                                         {"output_dir", out.string()}}
                              .dump());
  auto be = make_backend(cfg.backend, false);
  cmd_harvest_bank(cfg, {registry(), catalog(), *be}, bank_path);
  auto contents = dir_contents(out);
  fs::remove_all(out);
  auto r = cmd_run(cfg, {registry(), catalog(), *be});
  if (r.exit_code != 0) throw Error("run exited with " + std::to_string(r.exit_code));

  ScriptedBackend judge(script::parse(R"({"rules": [
      {"when": {"request": ["Last Round Replan Score"]}, "respond": {"choice": [
        "Thought: fine\nLast Round Replan Score: 2", "Thought: meh\nLast Round Replan Score: 0"]}}],
      "default": "Thought: compare\nScore 1: 60\nScore 2: 40"})"));
  EvalOptions opts;
  opts.metrics = {"sr", "ngp", "proxy", "strategy", "diversity"};
  opts.judge = &judge;
  opts.registry = &registry();
  opts.catalog = &catalog();
  write_report(out, cmd_eval(cell_files(out), opts));

  for (auto& [name, bytes] : dir_contents(out)) contents[name] = std::move(bytes);
  contents["bank.jsonl"] = slurp(bank_path);
  return contents;
}

Result determinism() {
  auto root = scratch_dir("accept-determinism");
  auto a = full_pipeline(root / "run", root / "bank.jsonl");
  auto b = full_pipeline(root / "run", root / "bank.jsonl");
  if (!a.count("report.jsonl") || !a.count("report.txt") || !a.count("manifest.json"))
    return fail("pipeline did not write report and manifest");
  if (a.size() != b.size()) return fail("file sets differ");
  for (const auto& [name, bytes] : a) {
    auto it = b.find(name);
    if (it == b.end()) return fail(name + " missing in second run");
    if (it->second != bytes) return fail(name + " differs between runs");
  }
  return pass(std::to_string(a.size()) + " files byte-identical across two runs");
}

Result trap_differential() {
  auto out = scratch_dir("accept-trap");
  auto t0 = std::chrono::steady_clock::now();
  auto cfg = trap_config(out);
  auto be = make_backend(cfg.backend, false);
  auto r = cmd_run(cfg, {registry(), catalog(), *be});
  double s = seconds_since(t0);
  const double pre = sr_of(r, Framework::PreAct), re = sr_of(r, Framework::ReAct);
  std::string d = "PreAct SR " + fmt(pre, 1) + ", ReAct SR " + fmt(re, 1) + ", " + fmt(s) + " s";
  if (r.exit_code != 0 || pre != 1.0 || re != 0.0 || s >= 1.0) return fail(d);
  return pass(d);
}

Result retention_monotone() {
  auto out = scratch_dir("accept-ablation");
  auto cfg = trap_config(out);
  auto be = make_backend(cfg.backend, false);
  auto r = cmd_ablate_retention(cfg, {registry(), catalog(), *be});
  if (r.rows.empty() || r.rows.back().family != "ALL") return fail("no ALL row");
  std::string d;
  for (const auto& row : r.rows) {
    d += row.family + " " + fmt(row.sr[0], 2) + "/" + fmt(row.sr[1], 2) + "/" + fmt(row.sr[2], 2) + " ";
    if (!(row.sr[2] >= row.sr[1] && row.sr[1] >= row.sr[0])) return fail("not monotone: " + d);
  }
  const auto& all = r.rows.back();
  if (!(all.sr[2] > all.sr[0])) return fail("ends not strict: " + d);
  return pass("SR(0)/SR(1)/SR(all): " + d);
}

Result strategy_numerics() {
  double a = strategy_metric_from_scores({{3, 2, 1}, {0, -1}});
  if (std::abs(a - 0.75) > 1e-9) return fail("mixed fixture gave " + fmt(a, 12));
  double b = strategy_metric_from_scores({{3, 3, 3}, {3}, {3, 3}});
  if (b != 3.0) return fail("constant fixture gave " + fmt(b, 12));
  for (double bad : {4.0, -2.0, 3.5}) {
    try {
      strategy_metric_from_scores({{1, bad}});
      return fail("score " + fmt(bad, 1) + " accepted");
    } catch (const JudgeRangeError&) {
    }
  }
  for (const char* raw : {"Last Round Replan Score: 4", "Last Round Replan Score: -2"}) {
    try {
      parse_strategy_verdict(raw);
      return fail(std::string("verdict accepted: ") + raw);
    } catch (const JudgeRangeError&) {
    }
  }
  return pass("0.75 and 3.0 fixtures exact, out-of-range scores rejected");
}

Result injection_stats() {
  auto root = scratch_dir("accept-injection");
  auto hcfg = trap_config(root / "harvest");
  hcfg.instances = {"hh-trap-lettuce", "hh-trap-mug", "db-trap-shop-name", "db-trap-unit-price"};
  auto be = make_backend(hcfg.backend, false);
  auto bank = cmd_harvest_bank(hcfg, {registry(), catalog(), *be}, root / "bank.jsonl");
  if (bank.empty()) return fail("empty bank");

  const auto& spec = registry().get("hh-trap-lettuce");
  const auto& tmpl = catalog().get(EnvFamily::HH, Framework::PreAct);
  auto episode = [&](const std::function<ParsedTurn(ParsedTurn, int)>& transform) {
    ScriptedBackend sb(script::load(trap_script()));
    auto hooks = tot_hooks(1, tmpl, sb);
    hooks.transform = transform;
    auto env = reset(spec, 7);
    return serialize_trajectory(run_episode(*env, tmpl, HistoryPolicy::permanent(), sb, {}, hooks));
  };
  auto baseline = episode({});
  if (episode(injection_transform(bank, 0.0, 7, spec.id)) != baseline) return fail("h=0 differs from baseline");

  InjectionCounter full;
  episode(injection_transform(bank, 1.0, 7, spec.id, &full));
  if (full.blocks == 0 || full.replaced != full.blocks)
    return fail("h=1 replaced " + std::to_string(full.replaced) + "/" + std::to_string(full.blocks));

  InjectionCounter half;
  auto tr = injection_transform(bank, 0.5, 12345, spec.id, &half);
  for (int i = 0; i < 10000; ++i) tr(ParsedTurn{"t", "look", {{"Own.", ""}}}, 1 + i % 2);
  const double sigma = std::sqrt(10000 * 0.25);
  const double dev = std::abs(half.replaced - 5000.0);
  std::string d = "h=1 " + std::to_string(full.replaced) + "/" + std::to_string(full.blocks) + ", h=0.5 " +
                  std::to_string(half.replaced) + "/10000 (|dev| " + fmt(dev, 0) + " <= " + fmt(3 * sigma, 0) + ")";
  if (half.blocks != 10000 || dev > 3 * sigma) return fail(d);
  return pass("h=0 identical to baseline, " + d);
}

Result tot_degenerate() {
  int compared = 0;
  for (const auto& [id, s] : registry().all()) {
    const auto* spec = &s;
    for (auto fw : {Framework::PreAct, Framework::ReAct}) {
      const auto& tmpl = catalog().get(spec->family, fw);
      const auto pol = fw == Framework::PreAct ? HistoryPolicy::permanent() : HistoryPolicy::react();
      ScriptedBackend a(script::load(trap_script()));
      ScriptedBackend b(script::load(trap_script()));
      auto e1 = reset(*spec, 5);
      auto plain = run_episode(*e1, tmpl, pol, a);
      auto e2 = reset(*spec, 5);
      auto tot = run_episode(*e2, tmpl, pol, b, {}, tot_hooks(1, tmpl, b));
      if (!(plain == tot) || serialize_trajectory(plain) != serialize_trajectory(tot))
        return fail(spec->id + " " + std::string(to_string(fw)) + " differs");
      if (a.calls() != b.calls()) return fail(spec->id + " call counts differ");
      ++compared;
    }
  }
  return pass(std::to_string(compared) + " trajectory pairs equal field-for-field");
}

// Replays a fixed queue of replies.
class Queue final : public ChatBackend {
 public:
  explicit Queue(std::vector<std::string> replies) : replies_(std::move(replies)) {}

 protected:
  std::vector<std::string> do_complete(const ChatRequest& req) override {
    std::vector<std::string> out;
    for (int i = 0; i < req.n_samples; ++i) out.push_back(replies_[std::min(next_++, replies_.size() - 1)]);
    return out;
  }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

Result ltp_refusal() {
  const auto& spec = registry().get("ltp-trap-snowman");
  const auto& tmpl = catalog().get(EnvFamily::LTP, Framework::PreAct);
  const std::string no = "I'm sorry, I cannot assist with that.";
  const std::vector<PredictedOutcome> yes{{"Yes.", ""}};
  Queue be(std::vector<std::string>{no, no, no, no, format_assistant_turn(tmpl, "", "Was it a snowman?", yes)});
  auto env = reset(spec, 0);
  auto refused = run_episode(*env, tmpl, HistoryPolicy::permanent(), be);
  if (refused.outcome != Outcome::Refusal)
    return fail("outcome " + std::string(to_string(refused.outcome)) + " after scripted refusals");

  Trajectory a = refused, b = refused;
  a.outcome = Outcome::MaxTurnsExceeded;
  a.score = 0.25;
  b.outcome = Outcome::Success;
  b.score = 0.5;
  refused.score = 1.0;  // must not count
  std::vector<Trajectory> ts{a, refused, b};
  const double got = normalized_gp(ts);
  if (got != 0.375) return fail("normalized_gp " + fmt(got, 12) + ", want 0.375");
  try {
    normalized_gp(std::vector<Trajectory>{refused});
    return fail("all-refused input accepted");
  } catch (const AllExcluded&) {
  }
  return pass("Refusal after 4 scripted refusals, NGP (0.25+0.5)/2 = 0.375 exact");
}

Result pearson_oracle() {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> nd;
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x(2 + rng() % 200), y(x.size());
    const double rho = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = nd(rng) * 10 + 3;
      y[i] = rho * x[i] + nd(rng);
    }
    worst = std::max(worst, std::abs(pearson(x, y) - oracle::pearson(x, y)));
  }
  if (worst > 1e-12) return fail("max deviation " + std::to_string(worst));
  std::vector<double> x{1, 2, 3, 4, 5, 6}, up, down;
  for (double v : x) {
    up.push_back(3 * v + 7);
    down.push_back(-0.5 * v + 1);
  }
  if (pearson(x, up) != 1.0 || pearson(x, down) != -1.0) return fail("perfect correlation not exact");
  std::ostringstream ss;
  ss << "100 vectors, max deviation " << worst << ", +-1 exact";
  return pass(ss.str());
}

Result live_smoke() {
  if (!std::getenv("OPENAI_API_KEY")) return {Verdict::Skip, "OPENAI_API_KEY not set"};
  const char* url = std::getenv("PREACT_LIVE_BASE_URL");
  const char* model = std::getenv("PREACT_LIVE_MODEL");
  auto out = scratch_dir("accept-live");
  auto cfg = parse_config(nlohmann::json{{"instances", {"hh-trap-lettuce"}},
                                         {"seeds", {0, 1, 2, 3, 4}},
                                         {"backend",
                                          {{"kind", "live"},
                                           {"base_url", url ? url : "https://api.openai.com/v1"},
                                           {"model", model ? model : "gpt-4o-mini"},
                                           {"api_key_env", "OPENAI_API_KEY"}}},
                                         {"output_dir", out.string()}}
                              .dump());
  auto be = make_backend(cfg.backend, true);
  auto r = cmd_run(cfg, {registry(), catalog(), *be});
  int episodes = 0;
  for (const auto& c : r.cells) {
    if (c.status != CellStatus::Ok) return fail(c.cell.file_name() + ": " + c.error);
    for (const auto& t : c.trajectories) {
      if (t.outcome == Outcome::ParseFailure) return fail(c.cell.file_name() + " ended in a parse failure");
      ++episodes;
    }
  }
  write_report(out, cmd_eval(cell_files(out), EvalOptions{}));
  if (!fs::exists(out / "report.txt")) return fail("no report written");
  return pass(std::to_string(episodes) + " live episodes, report at " + (out / "report.txt").string());
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Result()>> checks[] = {
      {"history oracle equivalence", history_oracle},
      {"template fidelity", template_fidelity},
      {"parser totality", parser_totality},
      {"end-to-end determinism", determinism},
      {"trap recovery differential", trap_differential},
      {"retention monotonicity", retention_monotone},
      {"strategy metric numerics", strategy_numerics},
      {"hallucination injection statistics", injection_stats},
      {"TOT n=1 equivalence", tot_degenerate},
      {"LTP refusal and NGP exclusion", ltp_refusal},
      {"Pearson oracle agreement", pearson_oracle},
      {"live smoke run", live_smoke},
  };
  int failed = 0, n = 0;
  for (const auto& [name, fn] : checks) {
    ++n;
    Result r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = fail(std::string("exception: ") + e.what());
    }
    const char* tag = r.verdict == Verdict::Pass ? "PASS" : r.verdict == Verdict::Skip ? "SKIP" : "FAIL";
    failed += r.verdict == Verdict::Fail;
    std::cout << tag << " " << n << " " << name << ": " << r.detail << std::endl;
  }
  return failed ? 1 : 0;
}

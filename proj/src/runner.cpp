// SPDX-License-Identifier: Apache-2.0
#include "preact/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "preact/agent.hpp"
#include "preact/hash.hpp"
#include "preact/text.hpp"

namespace preact {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::set<std::string, std::less<>> kModes{"permanent",   "immediate",   "reflexion",    "tot",
                                                "retention-0", "retention-1", "retention-all"};

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << data;
}

double round_to(double x, int digits) {
  const double f = std::pow(10.0, digits);
  return std::round(x * f) / f;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string, std::less<>> known{
      "tasks_dir", "templates_dir", "instances",  "frameworks",        "modes",          "reflexion_trials",
      "tot",       "backend",       "seeds",      "output_dir",        "budget",         "workers",
      "max_parse_retries",          "max_turns",  "refusal_limit",     "inject_disparity_hint", "temperature"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  ExperimentConfig cfg;
  try {
    const auto data = default_data_dir();
    cfg.tasks_dir = j.contains("tasks_dir") ? resolve(j["tasks_dir"].get<std::string>(), base_dir) : data / "tasks";
    cfg.templates_dir =
        j.contains("templates_dir") ? resolve(j["templates_dir"].get<std::string>(), base_dir) : data / "templates";
    cfg.instances = j.value("instances", std::vector<std::string>{});
    if (j.contains("frameworks")) {
      cfg.frameworks.clear();
      for (const auto& f : j["frameworks"]) cfg.frameworks.push_back(parse_framework(f.get<std::string>()));
    }
    if (j.contains("modes")) cfg.modes = j["modes"].get<std::vector<std::string>>();
    cfg.reflexion_trials = j.value("reflexion_trials", cfg.reflexion_trials);
    if (j.contains("tot")) {
      const auto& t = j["tot"];
      cfg.tot.n = t.value("n", 1);
      cfg.tot.h = t.value("h", 0.0);
      if (t.contains("bank")) cfg.tot.bank = resolve(t["bank"].get<std::string>(), base_dir);
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      cfg.backend.kind = b.value("kind", std::string("scripted"));
      if (b.contains("script")) cfg.backend.script = resolve(b["script"].get<std::string>(), base_dir);
      cfg.backend.base_url = b.value("base_url", std::string());
      cfg.backend.model = b.value("model", std::string());
      cfg.backend.api_key_env = b.value("api_key_env", cfg.backend.api_key_env);
      cfg.backend.supports_n = b.value("supports_n", true);
    }
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    cfg.budget = j.value("budget", cfg.budget);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.max_parse_retries = j.value("max_parse_retries", cfg.max_parse_retries);
    cfg.max_turns = j.value("max_turns", cfg.max_turns);
    cfg.refusal_limit = j.value("refusal_limit", cfg.refusal_limit);
    cfg.inject_disparity_hint = j.value("inject_disparity_hint", cfg.inject_disparity_hint);
    cfg.temperature = j.value("temperature", cfg.temperature);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_text(path), path.parent_path());
}

std::string config_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["tasks_dir"] = cfg.tasks_dir.string();
  j["templates_dir"] = cfg.templates_dir.string();
  j["instances"] = cfg.instances;
  auto fw = ordered_json::array();
  for (auto f : cfg.frameworks) fw.push_back(std::string(to_string(f)));
  j["frameworks"] = fw;
  j["modes"] = cfg.modes;
  j["reflexion_trials"] = cfg.reflexion_trials;
  j["tot"] = {{"n", cfg.tot.n}, {"h", cfg.tot.h}, {"bank", cfg.tot.bank.string()}};
  j["backend"] = {{"kind", cfg.backend.kind},         {"script", cfg.backend.script.string()},
                  {"base_url", cfg.backend.base_url}, {"model", cfg.backend.model},
                  {"api_key_env", cfg.backend.api_key_env}, {"supports_n", cfg.backend.supports_n}};
  j["seeds"] = cfg.seeds;
  j["budget"] = cfg.budget;
  j["max_parse_retries"] = cfg.max_parse_retries;
  j["max_turns"] = cfg.max_turns;
  j["refusal_limit"] = cfg.refusal_limit;
  j["inject_disparity_hint"] = cfg.inject_disparity_hint;
  j["temperature"] = cfg.temperature;
  return j.dump();
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(config_json(cfg)); }

std::vector<std::string> resolve_instances(const ExperimentConfig& cfg, const TaskRegistry& registry) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& id) {
    if (seen.insert(id).second) out.push_back(id);
  };
  for (const auto& sel : cfg.instances) {
    if (sel == "*") {
      for (const auto& [id, _] : registry.all()) add(id);
    } else if (sel.size() > 2 && sel.ends_with(":*")) {
      EnvFamily fam;
      try {
        fam = parse_family(sel.substr(0, sel.size() - 2));
      } catch (const std::invalid_argument&) {
        throw ConfigError("unknown family in selector '" + sel + "'");
      }
      for (const auto* s : registry.by_family(fam)) add(s->id);
    } else {
      if (!registry.find(sel)) throw ConfigError("unknown task instance '" + sel + "'");
      add(sel);
    }
  }
  return out;
}

void validate_config(const ExperimentConfig& cfg, const TaskRegistry& registry) {
  if (cfg.instances.empty()) throw ConfigError("config lists no instances");
  if (resolve_instances(cfg, registry).empty()) throw ConfigError("instance selectors match no task");
  if (cfg.frameworks.empty()) throw ConfigError("config lists no frameworks");
  for (auto f : cfg.frameworks)
    if (f == Framework::ActOnly) throw ConfigError("ActOnly is not an experiment framework");
  if (cfg.modes.empty()) throw ConfigError("config lists no modes");
  for (const auto& m : cfg.modes) {
    if (!kModes.count(m)) throw ConfigError("unknown mode '" + m + "'");
    for (auto f : cfg.frameworks)
      if (f == Framework::ReAct && (m == "retention-1" || m == "retention-all"))
        throw ConfigError("mode " + m + " keeps predictions; ReAct has none");
  }
  if (cfg.reflexion_trials < 1) throw ConfigError("reflexion_trials must be >= 1");
  if (cfg.tot.n < 1) throw ConfigError("tot.n must be >= 1");
  if (!(cfg.tot.h >= 0.0 && cfg.tot.h <= 1.0)) throw ConfigError("tot.h must lie in [0, 1]");
  if (cfg.tot.h > 0.0 && cfg.tot.bank.empty()) throw ConfigError("tot.h > 0 needs tot.bank");
  if (cfg.seeds.empty()) throw ConfigError("config lists no seeds");
  if (cfg.budget == 0) throw ConfigError("budget must be positive");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.max_parse_retries < 0) throw ConfigError("max_parse_retries must be >= 0");
  if (cfg.max_turns < 0) throw ConfigError("max_turns must be >= 0");
  if (cfg.refusal_limit < 1) throw ConfigError("refusal_limit must be >= 1");
  if (cfg.temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (cfg.backend.kind == "scripted") {
    if (cfg.backend.script.empty()) throw ConfigError("scripted backend needs backend.script");
  } else if (cfg.backend.kind == "live") {
    if (cfg.backend.base_url.empty() || cfg.backend.model.empty())
      throw ConfigError("live backend needs base_url and model");
  } else {
    throw ConfigError("unknown backend kind '" + cfg.backend.kind + "'");
  }
}

HistoryPolicy policy_for(Framework framework, std::string_view mode) {
  if (!kModes.count(mode)) throw ConfigError("unknown mode '" + std::string(mode) + "'");
  if (framework != Framework::PreAct) {
    if (mode == "retention-1" || mode == "retention-all") throw InconsistentPolicy("ReAct has no predictions to keep");
    return mode == "reflexion" ? HistoryPolicy{Retention::None, true} : HistoryPolicy::react();
  }
  if (mode == "immediate" || mode == "retention-1") return HistoryPolicy::immediate();
  if (mode == "reflexion") return HistoryPolicy::reflexion();
  if (mode == "retention-0") return HistoryPolicy{Retention::None, false};
  return HistoryPolicy::permanent();
}

// ---------------------------------------------------------------------------
// Cells

std::string Cell::file_name() const {
  return task_id + "__" + std::string(to_string(framework)) + "__" + mode + "__s" + std::to_string(seed) + ".jsonl";
}

std::optional<Cell> parse_cell_file_name(std::string_view name) {
  if (!name.ends_with(".jsonl")) return std::nullopt;
  name.remove_suffix(6);
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto sep = name.find("__", start);
    parts.emplace_back(name.substr(start, sep == std::string_view::npos ? std::string_view::npos : sep - start));
    if (sep == std::string_view::npos) break;
    start = sep + 2;
  }
  if (parts.size() != 4 || parts[3].size() < 2 || parts[3][0] != 's') return std::nullopt;
  Cell c;
  c.task_id = parts[0];
  try {
    c.framework = parse_framework(parts[1]);
    std::size_t used = 0;
    c.seed = std::stoull(parts[3].substr(1), &used);
    if (used != parts[3].size() - 1) return std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
  c.mode = parts[2];
  return c;
}

std::vector<Cell> expand_cells(const ExperimentConfig& cfg, const TaskRegistry& registry) {
  std::vector<Cell> cells;
  for (const auto& id : resolve_instances(cfg, registry))
    for (auto f : cfg.frameworks)
      for (const auto& m : cfg.modes)
        for (auto s : cfg.seeds) cells.push_back({id, f, m, s});
  return cells;
}

std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Ok: return "ok";
    case CellStatus::Skipped: return "skipped";
    case CellStatus::Failed: return "failed";
  }
  return "failed";
}

std::unique_ptr<ChatBackend> make_backend(const BackendSpec& spec, bool allow_live) {
  if (spec.kind == "scripted") {
    if (spec.script.empty()) throw ConfigError("scripted backend needs a script");
    return std::make_unique<ScriptedBackend>(script::load(spec.script));
  }
  if (spec.kind == "live") {
    if (!allow_live) throw ConfigError("live backend requested without --live");
    if (!spec.api_key_env.empty()) {
      const char* key = std::getenv(spec.api_key_env.c_str());
      if (!key || !*key) throw ConfigError("credential variable " + spec.api_key_env + " is not set");
    }
    HttpBackendConfig hc;
    hc.base_url = spec.base_url;
    hc.model = spec.model;
    hc.api_key_env = spec.api_key_env;
    hc.supports_n = spec.supports_n;
    return std::make_unique<HttpBackend>(hc);
  }
  throw ConfigError("unknown backend kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Run

RunResult cmd_run(const ExperimentConfig& cfg, const RunContext& ctx) {
  validate_config(cfg, ctx.registry);
  const auto cells = expand_cells(cfg, ctx.registry);
  fs::create_directories(cfg.output_dir);

  std::optional<PredictionBank> donor_bank;
  if (cfg.tot.h > 0.0) donor_bank = PredictionBank::load(cfg.tot.bank);

  ctx.backend.set_budget(ctx.backend.calls() + cfg.budget);

  RunResult result;
  result.cells.resize(cells.size());
  std::vector<PredictionBank> harvested(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> exhausted{false};

  auto run_cell = [&](std::size_t i) {
    auto& r = result.cells[i];
    r.cell = cells[i];
    const auto& cell = cells[i];
    if (exhausted.load()) {
      r.status = CellStatus::Skipped;
      r.error = "call budget exhausted";
      return;
    }
    try {
      const auto& spec = ctx.registry.get(cell.task_id);
      const auto& tmpl = ctx.catalog.get(spec.family, cell.framework);
      const auto policy = policy_for(cell.framework, cell.mode);
      EpisodeLimits limits;
      limits.max_turns = cfg.max_turns;
      limits.max_parse_retries = cfg.max_parse_retries;
      limits.refusal_limit = cfg.refusal_limit;
      limits.inject_disparity_hint = cfg.inject_disparity_hint;
      limits.temperature = cfg.temperature;

      EpisodeHooks hooks;
      if (cell.mode == "tot") {
        hooks = tot_hooks(cfg.tot.n, tmpl, ctx.backend);
        if (donor_bank && cell.framework == Framework::PreAct)
          hooks.transform = injection_transform(*donor_bank, cfg.tot.h, cell.seed, cell.task_id);
      }
      if (ctx.harvest && cell.framework == Framework::PreAct)
        hooks.observe = harvest_observer(harvested[i], cell.task_id);

      if (cell.mode == "reflexion") {
        ReflexionOptions opts;
        opts.trials = cfg.reflexion_trials;
        opts.seed = cell.seed;
        opts.limits = limits;
        opts.hooks = hooks;
        opts.reflexion_template = ctx.catalog.text("reflexion");
        r.trajectories = run_with_reflexion(spec, tmpl, policy, ctx.backend, opts);
      } else {
        auto env = reset(spec, cell.seed);
        r.trajectories.push_back(run_episode(*env, tmpl, policy, ctx.backend, limits, hooks));
      }
      write_trajectory_file(cfg.output_dir / cell.file_name(), r.trajectories);
      r.status = CellStatus::Ok;
    } catch (const BudgetExceeded& e) {
      exhausted = true;
      r.status = CellStatus::Skipped;
      r.error = e.what();
      r.trajectories.clear();
      harvested[i] = PredictionBank{};
      std::error_code ec;
      fs::remove(cfg.output_dir / cell.file_name(), ec);
    } catch (const std::exception& e) {
      r.status = CellStatus::Failed;
      r.error = e.what();
      r.trajectories.clear();
      harvested[i] = PredictionBank{};
      std::error_code ec;
      fs::remove(cfg.output_dir / cell.file_name(), ec);
    }
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
  };
  const int n_workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (ctx.harvest)
    for (const auto& b : harvested) ctx.harvest->merge(b);

  ordered_json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["templates"] = ctx.catalog.hashes();
  auto arr = ordered_json::array();
  for (const auto& r : result.cells) {
    ordered_json c;
    c["task_id"] = r.cell.task_id;
    c["framework"] = std::string(to_string(r.cell.framework));
    c["mode"] = r.cell.mode;
    c["seed"] = r.cell.seed;
    c["status"] = std::string(to_string(r.status));
    if (r.status == CellStatus::Ok) {
      c["file"] = r.cell.file_name();
      c["trajectories"] = r.trajectories.size();
    } else {
      c["error"] = r.error;
      result.exit_code = 2;
    }
    arr.push_back(std::move(c));
  }
  manifest["cells"] = std::move(arr);
  result.manifest = cfg.output_dir / "manifest.json";
  write_text(result.manifest, manifest.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// Eval

namespace {

struct Group {
  std::string env, framework, mode;
  std::vector<Trajectory> ts;
};

using GroupKey = std::tuple<std::string, std::string, std::string>;

ordered_json warning(std::string_view msg, const GroupKey& k) {
  ordered_json w;
  w["warning"] = std::string(msg);
  w["env"] = std::get<0>(k);
  w["framework"] = std::get<1>(k);
  w["mode"] = std::get<2>(k);
  return w;
}

bool wants(const EvalOptions& o, std::string_view metric) {
  return std::find(o.metrics.begin(), o.metrics.end(), metric) != o.metrics.end();
}

}  // namespace

std::vector<std::string> cmd_eval(const std::vector<fs::path>& files, const EvalOptions& opts) {
  static const std::set<std::string, std::less<>> known{"sr", "ngp", "proxy", "strategy", "diversity"};
  for (const auto& m : opts.metrics)
    if (!known.count(m)) throw ConfigError("unknown metric '" + m + "'");
  if ((wants(opts, "strategy") || wants(opts, "diversity")) && (!opts.judge || !opts.catalog))
    throw ConfigError("judge metrics need a judge backend");
  if (files.empty()) throw EmptyInput("no trajectory files given");

  std::map<GroupKey, Group> groups;
  for (const auto& f : files) {
    auto ts = read_trajectory_file(f);
    if (ts.empty()) throw EmptyInput("no trajectories in " + f.string());
    auto cell = parse_cell_file_name(f.filename().string());
    const std::string mode = cell ? cell->mode : "unknown";
    // Reflexion files hold every trial; the last one is the result.
    auto t = std::move(ts.back());
    GroupKey key{t.env_name, std::string(to_string(t.framework)), mode};
    auto& g = groups[key];
    g.env = t.env_name;
    g.framework = std::get<1>(key);
    g.mode = mode;
    g.ts.push_back(std::move(t));
  }
  for (auto& [_, g] : groups)
    std::sort(g.ts.begin(), g.ts.end(), [](const Trajectory& a, const Trajectory& b) {
      return std::tie(a.task_id, a.seed) < std::tie(b.task_id, b.seed);
    });

  std::vector<std::string> records;
  std::vector<std::string> warnings;
  for (const auto& [key, g] : groups) {
    ordered_json rec;
    rec["env"] = g.env;
    rec["framework"] = g.framework;
    rec["mode"] = g.mode;
    rec["n"] = g.ts.size();
    std::optional<EnvFamily> family;
    try {
      family = parse_family(g.env);
    } catch (const std::invalid_argument&) {
    }
    if (wants(opts, "sr") && family && is_sr_family(*family)) rec["sr"] = round_to(success_rate(g.ts) * 100.0, 1);
    if (wants(opts, "ngp") && family == EnvFamily::LTP) {
      try {
        rec["ngp"] = round_to(normalized_gp(g.ts), 6);
      } catch (const AllExcluded&) {
        rec["ngp"] = nullptr;
        warnings.push_back(warning("every trajectory ended in refusal", key).dump());
      }
    }
    if (wants(opts, "proxy")) {
      double sum = 0.0;
      int n = 0;
      for (const auto& t : g.ts) {
        if (t.steps.empty()) continue;
        sum += action_diversity_proxy(t);
        ++n;
      }
      if (n > 0) rec["action_diversity"] = round_to(sum / n, 6);
    }
    if (wants(opts, "strategy")) {
      std::vector<Trajectory> judged, truths;
      for (const auto& t : g.ts) {
        const TaskSpec* spec = opts.registry ? opts.registry->find(t.task_id) : nullptr;
        if (!spec) {
          warnings.push_back(warning("no ground truth for task " + t.task_id, key).dump());
          continue;
        }
        if (t.steps.empty()) continue;
        judged.push_back(t);
        truths.push_back(oracle_trajectory(*spec, t.seed));
      }
      if (!judged.empty()) {
        try {
          rec["strategy"] =
              round_to(strategy_metric(judged, truths, opts.catalog->text("judge_strategy"), *opts.judge), 6);
        } catch (const JudgeParseFailure& e) {
          warnings.push_back(warning(std::string("strategy metric omitted: ") + e.what(), key).dump());
        }
      }
    }
    if (wants(opts, "diversity") && g.framework == "PreAct") {
      GroupKey react_key{g.env, "ReAct", g.mode};
      auto it = groups.find(react_key);
      if (it != groups.end()) {
        std::vector<JudgeVerdict> verdicts;
        for (const auto& a : g.ts) {
          for (const auto& b : it->second.ts) {
            if (a.task_id != b.task_id || a.seed != b.seed) continue;
            try {
              auto o = opts.diversity;
              o.seed = splitmix64(opts.diversity.seed ^ a.seed);
              verdicts.push_back(judge_diversity(a, b, opts.catalog->text("judge_diversity"), *opts.judge, o));
            } catch (const JudgeParseFailure& e) {
              warnings.push_back(warning("diversity verdict dropped for " + a.task_id + ": " + e.what(), key).dump());
            }
          }
        }
        if (!verdicts.empty()) {
          auto s = diversity_summary(verdicts);
          rec["diversity_vs_react"] = {{"preact_wins", round_to(s.a_wins, 6)},
                                       {"react_wins", round_to(s.b_wins, 6)},
                                       {"ties", round_to(s.ties, 6)},
                                       {"pairs", s.pairs}};
        }
      }
    }
    records.push_back(rec.dump());
  }
  records.insert(records.end(), warnings.begin(), warnings.end());
  return records;
}

std::string render_report(const std::vector<std::string>& records) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-5s %-7s %-14s %4s %7s %7s %8s %8s %s\n", "env", "frame", "mode", "n", "SR",
                "NGP", "proxy", "M_s", "diversity(PreAct/ReAct/tie)");
  out += line;
  std::vector<std::string> notes;
  for (const auto& r : records) {
    auto j = json::parse(r);
    if (j.contains("warning")) {
      notes.push_back("warning: " + j["warning"].get<std::string>() + " [" + j.value("env", "") + " " +
                      j.value("framework", "") + " " + j.value("mode", "") + "]");
      continue;
    }
    auto num = [&](const char* k, int digits) {
      return j.contains(k) && j[k].is_number() ? fixed(j[k].get<double>(), digits) : std::string("-");
    };
    std::string div = "-";
    if (j.contains("diversity_vs_react")) {
      const auto& d = j["diversity_vs_react"];
      div = fixed(d["preact_wins"].get<double>(), 2) + "/" + fixed(d["react_wins"].get<double>(), 2) + "/" +
            fixed(d["ties"].get<double>(), 2) + " (" + std::to_string(d["pairs"].get<int>()) + ")";
    }
    std::snprintf(line, sizeof line, "%-5s %-7s %-14s %4d %7s %7s %8s %8s %s\n", j["env"].get<std::string>().c_str(),
                  j["framework"].get<std::string>().c_str(), j["mode"].get<std::string>().c_str(), j["n"].get<int>(),
                  num("sr", 1).c_str(), num("ngp", 3).c_str(), num("action_diversity", 3).c_str(),
                  num("strategy", 3).c_str(), div.c_str());
    out += line;
  }
  for (const auto& n : notes) out += n + "\n";
  return out;
}

void write_report(const fs::path& dir, const std::vector<std::string>& records) {
  fs::create_directories(dir);
  std::string jsonl;
  for (const auto& r : records) jsonl += r + "\n";
  write_text(dir / "report.jsonl", jsonl);
  write_text(dir / "report.txt", render_report(records));
}

// ---------------------------------------------------------------------------
// Ablation and harvest

AblationResult cmd_ablate_retention(const ExperimentConfig& base, const RunContext& ctx) {
  auto cfg = base;
  // frameworks and modes of the config are ignored here
  cfg.frameworks = {Framework::PreAct};
  cfg.modes = {"retention-0", "retention-1", "retention-all"};

  AblationResult out;
  out.run = cmd_run(cfg, ctx);

  std::map<std::string, std::array<std::pair<int, int>, 3>> tally;  // family -> (success, total) per column
  for (const auto& r : out.run.cells) {
    if (r.status != CellStatus::Ok) continue;
    const auto& t = r.trajectories.back();
    const int col = r.cell.mode == "retention-0" ? 0 : r.cell.mode == "retention-1" ? 1 : 2;
    for (const auto& fam : {t.env_name, std::string("ALL")}) {
      auto& cell = tally[fam][col];
      cell.first += t.outcome == Outcome::Success;
      cell.second += 1;
    }
  }
  auto add_row = [&](const std::string& fam) {
    AblationRow row;
    row.family = fam;
    const auto& cols = tally[fam];
    for (int c = 0; c < 3; ++c)
      row.sr[c] = cols[c].second ? static_cast<double>(cols[c].first) / cols[c].second : 0.0;
    row.n = cols[2].second;
    out.rows.push_back(row);
  };
  for (const auto& [fam, _] : tally)
    if (fam != "ALL") add_row(fam);
  if (tally.count("ALL")) add_row("ALL");

  std::string jsonl;
  for (const auto& row : out.rows) {
    ordered_json j;
    j["family"] = row.family;
    j["n"] = row.n;
    j["sr_0"] = round_to(row.sr[0] * 100.0, 1);
    j["sr_1"] = round_to(row.sr[1] * 100.0, 1);
    j["sr_all"] = round_to(row.sr[2] * 100.0, 1);
    jsonl += j.dump() + "\n";
  }
  write_text(cfg.output_dir / "ablation.jsonl", jsonl);
  write_text(cfg.output_dir / "ablation.txt", render_ablation(out));
  return out;
}

std::string render_ablation(const AblationResult& r) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-6s %4s %7s %7s %7s\n", "family", "n", "R=0", "R=1", "R=all");
  out += line;
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof line, "%-6s %4d %7s %7s %7s\n", row.family.c_str(), row.n,
                  fixed(row.sr[0] * 100.0, 1).c_str(), fixed(row.sr[1] * 100.0, 1).c_str(),
                  fixed(row.sr[2] * 100.0, 1).c_str());
    out += line;
  }
  return out;
}

PredictionBank cmd_harvest_bank(const ExperimentConfig& base, const RunContext& ctx, const fs::path& bank_path) {
  auto cfg = base;
  cfg.frameworks = {Framework::PreAct};
  cfg.modes = {"permanent"};
  cfg.tot = TotSpec{};
  PredictionBank bank;
  RunContext harvest_ctx{ctx.registry, ctx.catalog, ctx.backend, &bank};
  cmd_run(cfg, harvest_ctx);
  bank.save(bank_path);
  return bank;
}

}  // namespace preact

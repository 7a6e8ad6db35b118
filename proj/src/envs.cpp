// SPDX-License-Identifier: Apache-2.0
#include "preact/envs.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "preact/text.hpp"

namespace preact {

using json = nlohmann::json;

int default_max_turns(EnvFamily family) {
  switch (family) {
    case EnvFamily::HH: return 35;
    case EnvFamily::OS: return 8;
    case EnvFamily::DB: return 5;
    case EnvFamily::LTP: return 50;
    case EnvFamily::QA: return 7;
  }
  return 10;
}

// ---------------------------------------------------------------------------
// TaskSpec parsing

namespace {

std::vector<std::string> strings(const json& j) {
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  return out;
}

Table parse_table(const json& j) {
  Table t;
  t.name = j.at("name").get<std::string>();
  t.columns = strings(j.at("columns"));
  t.display_columns = j.contains("display_columns") ? strings(j.at("display_columns")) : t.columns;
  if (t.display_columns.size() != t.columns.size())
    throw TaskSpecError("table " + t.name + ": display_columns size differs from columns");
  for (const auto& row : j.at("rows")) {
    auto r = strings(row);
    if (r.size() != t.columns.size()) throw TaskSpecError("table " + t.name + ": ragged row");
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::vector<PuzzleFact> parse_facts(const json& j) {
  std::vector<PuzzleFact> out;
  for (const auto& f : j) {
    PuzzleFact fact;
    fact.text = f.value("text", std::string());
    for (const auto& sig : f.at("signatures")) {
      std::vector<std::string> kws;
      for (const auto& kw : sig) kws.push_back(text::to_lower(kw.get<std::string>()));
      if (kws.empty()) throw TaskSpecError("puzzle fact with an empty signature");
      fact.signatures.push_back(std::move(kws));
    }
    out.push_back(std::move(fact));
  }
  return out;
}

World parse_world(EnvFamily family, const json& w, std::string& goal) {
  switch (family) {
    case EnvFamily::HH: {
      HouseholdWorld hw;
      for (const auto& r : w.at("receptacles")) {
        Receptacle rec;
        rec.name = r.at("name").get<std::string>();
        rec.openable = r.value("openable", false);
        rec.open = r.value("open", false);
        if (r.contains("contents")) rec.contents = strings(r.at("contents"));
        hw.receptacles.push_back(std::move(rec));
      }
      const auto& g = w.at("goal");
      hw.goal_object_type = g.at("object_type").get<std::string>();
      hw.goal_target = g.at("target").get<std::string>();
      hw.goal_text = g.at("text").get<std::string>();
      if (goal.empty()) goal = hw.goal_text;
      return hw;
    }
    case EnvFamily::DB: {
      TableWorld tw;
      for (const auto& t : w.at("tables")) tw.tables.push_back(parse_table(t));
      tw.question = w.at("question").get<std::string>();
      tw.answer = strings(w.at("answer"));
      if (w.contains("expected_table")) tw.expected_table = parse_table(w.at("expected_table"));
      if (goal.empty()) goal = tw.question;
      return tw;
    }
    case EnvFamily::LTP: {
      PuzzleWorld pw;
      pw.story = w.at("story").get<std::string>();
      pw.truth = w.value("truth", std::string());
      pw.key_facts = parse_facts(w.at("key_facts"));
      if (w.contains("false_facts")) pw.false_facts = parse_facts(w.at("false_facts"));
      if (pw.key_facts.empty()) throw TaskSpecError("puzzle without key facts");
      if (goal.empty()) goal = pw.story;
      return pw;
    }
    case EnvFamily::OS: {
      FileSystemWorld fw;
      for (const auto& [path, content] : w.at("files").items()) {
        if (path.empty() || path.front() != '/') throw TaskSpecError("file path must be absolute: " + path);
        fw.files[path] = content.get<std::string>();
      }
      fw.question = w.at("question").get<std::string>();
      fw.answer = w.at("answer").get<std::string>();
      if (goal.empty()) goal = fw.question;
      return fw;
    }
    case EnvFamily::QA:
      break;
  }
  throw UnknownFamily("no simulator for family " + std::string(to_string(family)));
}

}  // namespace

TaskSpec parse_task_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw TaskSpecError(std::string("task spec is not JSON: ") + e.what());
  }
  try {
    TaskSpec spec;
    spec.id = j.at("id").get<std::string>();
    auto family = j.at("family").get<std::string>();
    try {
      spec.family = parse_family(family);
    } catch (const std::invalid_argument&) {
      throw UnknownFamily("unknown environment family '" + family + "'");
    }
    spec.title = j.value("title", spec.id);
    spec.trap = j.value("trap", false);
    spec.max_turns = j.value("max_turns", default_max_turns(spec.family));
    spec.goal = j.value("goal", std::string());
    spec.oracle = strings(j.at("oracle"));
    spec.world = parse_world(spec.family, j.at("world"), spec.goal);
    if (spec.max_turns < 1) throw TaskSpecError(spec.id + ": max_turns must be positive");
    return spec;
  } catch (const json::exception& e) {
    throw TaskSpecError(std::string("bad task spec: ") + e.what());
  }
}

TaskSpec load_task_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TaskSpecError("cannot open task spec " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_task_spec(ss.str());
  } catch (const UnknownFamily& e) {
    throw UnknownFamily(path.string() + ": " + e.what());
  } catch (const TaskSpecError& e) {
    throw TaskSpecError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Environment base

std::string Environment::reset(std::uint64_t seed) {
  seed_ = seed;
  done_ = false;
  o0_ = do_reset(seed);
  return o0_;
}

EnvOutcome Environment::step(std::string_view action) {
  if (done_) return {std::string(kNothingHappened), true, score()};
  auto out = do_step(action);
  if (out.observation.empty()) out.observation = "(no output)";
  if (out.done) {
    done_ = true;
    out.success_score = score();
  }
  return out;
}

std::unique_ptr<Environment> make_environment(const TaskSpec& spec) {
  switch (spec.family) {
    case EnvFamily::HH: return std::make_unique<HouseholdEnv>(spec);
    case EnvFamily::DB: return std::make_unique<TableQueryEnv>(spec);
    case EnvFamily::LTP: return std::make_unique<PuzzleEnv>(spec);
    case EnvFamily::OS: return std::make_unique<FileSystemEnv>(spec);
    case EnvFamily::QA: break;
  }
  throw UnknownFamily("no simulator for family " + std::string(to_string(spec.family)));
}

std::unique_ptr<Environment> reset(const TaskSpec& spec, std::uint64_t seed) {
  auto env = make_environment(spec);
  env->reset(seed);
  return env;
}

Trajectory oracle_trajectory(const TaskSpec& spec, std::uint64_t seed) {
  auto env = reset(spec, seed);
  Trajectory t;
  t.task_id = spec.id;
  t.env_name = std::string(to_string(spec.family));
  t.framework = Framework::ActOnly;
  t.initial_observation = env->initial_observation();
  t.seed = seed;
  t.outcome = Outcome::MaxTurnsExceeded;
  int index = 0;
  for (const auto& action : spec.oracle) {
    auto out = env->step(action);
    Step s;
    s.index = ++index;
    s.action = action;
    s.observation = out.observation;
    t.steps.push_back(std::move(s));
    if (out.done) {
      t.outcome = out.success_score >= 1.0 ? Outcome::Success : Outcome::Failure;
      break;
    }
  }
  t.score = env->score();
  return t;
}

// ---------------------------------------------------------------------------
// Registry

TaskRegistry TaskRegistry::load(const std::filesystem::path& tasks_dir) {
  if (!std::filesystem::is_directory(tasks_dir))
    throw TaskSpecError("task directory not found: " + tasks_dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(tasks_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  TaskRegistry reg;
  for (const auto& f : files) reg.add(load_task_spec(f));
  return reg;
}

void TaskRegistry::add(TaskSpec spec) {
  auto id = spec.id;
  if (!specs_.emplace(id, std::move(spec)).second) throw TaskSpecError("duplicate task id " + id);
}

const TaskSpec* TaskRegistry::find(std::string_view id) const {
  auto it = specs_.find(id);
  return it == specs_.end() ? nullptr : &it->second;
}

const TaskSpec& TaskRegistry::get(std::string_view id) const {
  if (auto* s = find(id)) return *s;
  throw TaskSpecError("unknown task instance '" + std::string(id) + "'");
}

std::vector<const TaskSpec*> TaskRegistry::by_family(EnvFamily family) const {
  std::vector<const TaskSpec*> out;
  for (const auto& [id, spec] : specs_)
    if (spec.family == family) out.push_back(&spec);
  return out;
}

}  // namespace preact

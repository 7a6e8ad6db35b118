// SPDX-License-Identifier: Apache-2.0
#include "preact/core.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "preact/text.hpp"

namespace preact {

using ojson = nlohmann::ordered_json;

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  auto needle = text::trim(s);
  for (const auto& [name, value] : table)
    if (text::iequals(name, needle)) return value;
  throw std::invalid_argument("unknown " + std::string(what) + ": '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, Framework>, 3> kFrameworks{{
    {"ReAct", Framework::ReAct},
    {"PreAct", Framework::PreAct},
    {"ActOnly", Framework::ActOnly},
}};

constexpr std::array<std::pair<std::string_view, Outcome>, 5> kOutcomes{{
    {"Success", Outcome::Success},
    {"Failure", Outcome::Failure},
    {"MaxTurnsExceeded", Outcome::MaxTurnsExceeded},
    {"Refusal", Outcome::Refusal},
    {"ParseFailure", Outcome::ParseFailure},
}};

constexpr std::array<std::pair<std::string_view, Retention>, 6> kRetentions{{
    {"None", Retention::None},
    {"Last", Retention::Last},
    {"All", Retention::All},
    {"0", Retention::None},
    {"1", Retention::Last},
    {"all", Retention::All},
}};

constexpr std::array<std::pair<std::string_view, EnvFamily>, 5> kFamilies{{
    {"HH", EnvFamily::HH},
    {"OS", EnvFamily::OS},
    {"DB", EnvFamily::DB},
    {"LTP", EnvFamily::LTP},
    {"QA", EnvFamily::QA},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table)
    if (value == v) return name;
  return "?";
}

ojson to_json(const Step& s) {
  ojson j;
  j["index"] = s.index;
  j["thought"] = s.thought;
  j["action"] = s.action;
  auto preds = ojson::array();
  for (const auto& p : s.prediction) {
    ojson pj;
    pj["category"] = p.category;
    pj["measure"] = p.measure;
    preds.push_back(std::move(pj));
  }
  j["prediction"] = std::move(preds);
  if (s.observation) j["observation"] = *s.observation;
  return j;
}

const ojson& field(const ojson& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw MalformedRecord(std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const ojson& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw MalformedRecord(std::string("field '") + name + "' is not a string");
  return v.get<std::string>();
}

const ojson& array_field(const ojson& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_array()) throw MalformedRecord(std::string("field '") + name + "' is not an array");
  return v;
}

Step step_from_json(const ojson& j) {
  if (!j.is_object()) throw MalformedRecord("step is not an object");
  Step s;
  const auto& idx = field(j, "index");
  if (!idx.is_number_integer()) throw MalformedRecord("step index is not an integer");
  s.index = idx.get<int>();
  s.thought = string_field(j, "thought");
  s.action = string_field(j, "action");
  for (const auto& pj : array_field(j, "prediction")) {
    if (!pj.is_object()) throw MalformedRecord("prediction entry is not an object");
    s.prediction.push_back({string_field(pj, "category"), string_field(pj, "measure")});
  }
  if (auto it = j.find("observation"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw MalformedRecord("observation is not a string");
    s.observation = it->get<std::string>();
  }
  return s;
}

template <typename Enum, std::size_t N>
Enum enum_field(const ojson& j, const char* name,
                const std::array<std::pair<std::string_view, Enum>, N>& table) {
  auto value = string_field(j, name);
  for (const auto& [n, v] : table)
    if (n == value) return v;
  throw MalformedRecord(std::string("field '") + name + "' has unknown value '" + value + "'");
}

}  // namespace

std::string_view to_string(Framework f) { return name_of(f, kFrameworks); }
std::string_view to_string(Outcome o) { return name_of(o, kOutcomes); }
std::string_view to_string(Retention r) {
  switch (r) {
    case Retention::None: return "0";
    case Retention::Last: return "1";
    case Retention::All: return "all";
  }
  return "?";
}
std::string_view to_string(EnvFamily f) { return name_of(f, kFamilies); }

Framework parse_framework(std::string_view s) { return parse_enum(s, kFrameworks, "framework"); }
Outcome parse_outcome(std::string_view s) { return parse_enum(s, kOutcomes, "outcome"); }
Retention parse_retention(std::string_view s) { return parse_enum(s, kRetentions, "retention"); }
EnvFamily parse_family(std::string_view s) { return parse_enum(s, kFamilies, "env family"); }

bool is_sr_family(EnvFamily f) { return f != EnvFamily::LTP; }

void validate(const Trajectory& t) {
  if (t.task_id.empty()) throw InvariantViolation("empty task_id");
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    if (s.index != static_cast<int>(i) + 1)
      throw InvariantViolation("step indices are not contiguous from 1 (position " +
                               std::to_string(i + 1) + " has index " + std::to_string(s.index) + ")");
    if (text::trim(s.action).empty())
      throw InvariantViolation("step " + std::to_string(s.index) + " has an empty action");
    if (!s.observation && i + 1 != t.steps.size())
      throw InvariantViolation("step " + std::to_string(s.index) + " lacks an observation");
    if (t.framework == Framework::ReAct && !s.prediction.empty())
      throw InvariantViolation("ReAct step " + std::to_string(s.index) + " carries predictions");
    for (const auto& p : s.prediction)
      if (text::trim(p.category).empty())
        throw InvariantViolation("step " + std::to_string(s.index) + " has an empty prediction category");
  }
  if (!(t.score >= 0.0 && t.score <= 1.0)) throw InvariantViolation("score outside [0,1]");
  if (t.outcome == Outcome::Success) {
    bool sr = true;
    try {
      sr = is_sr_family(parse_family(t.env_name));
    } catch (const std::invalid_argument&) {
    }
    if (sr && t.score != 1.0) throw InvariantViolation("successful SR trajectory must score 1");
  }
}

std::string serialize_trajectory(const Trajectory& t) {
  ojson j;
  j["task_id"] = t.task_id;
  j["env"] = t.env_name;
  j["framework"] = std::string(to_string(t.framework));
  j["o0"] = t.initial_observation;
  auto steps = ojson::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  j["steps"] = std::move(steps);
  j["reflections"] = t.reflections;
  j["outcome"] = std::string(to_string(t.outcome));
  j["score"] = t.score;
  j["seed"] = t.seed;
  return j.dump(-1, ' ', false, ojson::error_handler_t::replace);
}

Trajectory deserialize_trajectory(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw MalformedRecord(std::string("not a JSON record: ") + e.what());
  }
  if (!j.is_object()) throw MalformedRecord("record is not a JSON object");

  Trajectory t;
  t.task_id = string_field(j, "task_id");
  t.env_name = string_field(j, "env");
  t.framework = enum_field(j, "framework", kFrameworks);
  t.initial_observation = string_field(j, "o0");
  for (const auto& sj : array_field(j, "steps")) t.steps.push_back(step_from_json(sj));
  for (const auto& rj : array_field(j, "reflections")) {
    if (!rj.is_string()) throw MalformedRecord("reflection is not a string");
    t.reflections.push_back(rj.get<std::string>());
  }
  t.outcome = enum_field(j, "outcome", kOutcomes);
  const auto& score = field(j, "score");
  if (!score.is_number()) throw MalformedRecord("score is not a number");
  t.score = score.get<double>();
  const auto& seed = field(j, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
    throw MalformedRecord("seed is not a non-negative integer");
  t.seed = seed.get<std::uint64_t>();

  validate(t);
  return t;
}

std::vector<Trajectory> read_trajectory_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trajectory file " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(deserialize_trajectory(line));
    } catch (const MalformedRecord& e) {
      throw MalformedRecord(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InvariantViolation& e) {
      throw InvariantViolation(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_trajectory_file(const std::filesystem::path& path, const std::vector<Trajectory>& ts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write trajectory file " + path.string());
  for (const auto& t : ts) out << serialize_trajectory(t) << '\n';
}

}  // namespace preact

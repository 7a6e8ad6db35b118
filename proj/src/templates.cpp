// SPDX-License-Identifier: Apache-2.0
#include "preact/templates.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "preact/hash.hpp"
#include "preact/text.hpp"

#ifndef PREACT_SOURCE_DATA_DIR
#define PREACT_SOURCE_DATA_DIR "data"
#endif

namespace preact {

namespace {

constexpr std::array<std::string_view, 10> kAgentTemplates{
    "hh_react", "hh_preact", "os_react", "os_preact", "db_react",
    "db_preact", "ltp_react", "ltp_preact", "qa_react", "qa_preact",
};

constexpr std::array<std::string_view, 3> kAuxTemplates{"reflexion", "judge_diversity",
                                                        "judge_strategy"};

AssistantFormat format_for(EnvFamily family, Framework framework) {
  const bool pre = framework == Framework::PreAct;
  AssistantFormat f;
  switch (family) {
    case EnvFamily::HH:
      f.thought_label = "THOUGHT:";
      f.action_label = "ACTION:";
      if (pre) f.prediction_label = "PREDICTED FEEDBACK:";
      break;
    case EnvFamily::OS:
      f.thought_label = "Think:";
      f.action_label = "Act:";
      if (pre) f.prediction_label = "Predict OS output:";
      f.syntax = ActionSyntax::OsCommand;
      break;
    case EnvFamily::DB:
      f.thought_label = "Thought:";
      f.action_label = "Action:";
      if (pre) f.prediction_label = "Predict MySql Output:";
      f.final_answer_label = "Final Answer:";
      f.syntax = ActionSyntax::SqlBlock;
      break;
    case EnvFamily::LTP:
      f.action_label = "Question:";
      if (pre) f.prediction_label = "Predicted Feedback:";
      f.syntax = ActionSyntax::Question;
      f.action_label_optional = !pre;
      break;
    case EnvFamily::QA:
      f.thought_label = "Thought:";
      f.action_label = "Action:";
      if (pre) f.prediction_label = "Predicted Feedback:";
      f.single_line = true;
      break;
  }
  return f;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read template " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Catalog files end with exactly one newline, which is not part of the text.
std::string strip_final_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

std::string PromptTemplate::render_system(std::string_view problem) const {
  return text::substitute(system_text, {{"example", ""},
                                        {"examples", ""},
                                        {"problem", std::string(problem)},
                                        {"story", std::string(problem)}});
}

bool is_terminal_action(const PromptTemplate& t, std::string_view action) {
  switch (t.assistant_format.syntax) {
    case ActionSyntax::OsCommand:
      return text::iequals(text::trim(action), "finish") || text::istarts_with(action, "answer(");
    case ActionSyntax::SqlBlock:
      return text::istarts_with(action, "Answer:");
    default:
      return false;
  }
}

std::string format_predictions(std::span<const PredictedOutcome> predictions, bool single_line) {
  std::string out;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (i) out += single_line ? " " : "\n";
    out += std::to_string(i + 1) + ". " + predictions[i].category;
    if (!predictions[i].measure.empty()) out += " " + predictions[i].measure;
  }
  return out;
}

std::string format_assistant_turn(const PromptTemplate& t, std::string_view thought,
                                  std::string_view action,
                                  std::span<const PredictedOutcome> predictions) {
  const auto& f = t.assistant_format;
  std::string out;
  const bool has_thought = !f.thought_label.empty() && !thought.empty();
  const bool has_pred = !f.prediction_label.empty() && !predictions.empty();
  switch (f.syntax) {
    case ActionSyntax::Line:
      if (has_thought) out += f.thought_label + " " + std::string(thought) + "\n";
      out += f.action_label + " " + std::string(action);
      break;
    case ActionSyntax::OsCommand:
      if (has_thought) out += f.thought_label + " " + std::string(thought) + "\n\n";
      if (is_terminal_action(t, action)) {
        out += f.action_label + " " + std::string(action);
      } else {
        out += f.action_label + " bash\n\n```bash\n" + std::string(action) + "\n```";
      }
      if (has_pred) out += "\n";
      break;
    case ActionSyntax::SqlBlock:
      if (has_thought) out += f.thought_label + " " + std::string(thought) + "\n";
      if (is_terminal_action(t, action)) {
        out += f.action_label + " Answer\n" + f.final_answer_label + " " +
               std::string(text::trim(action.substr(std::string_view("Answer:").size())));
      } else {
        out += f.action_label + " Operation\n```sql\n" + std::string(action) + "\n```";
      }
      break;
    case ActionSyntax::Question:
      out += f.action_label + " " + std::string(action);
      break;
  }
  if (has_pred) {
    if (f.single_line) {
      out += "\n" + f.prediction_label + " " + format_predictions(predictions, true);
    } else {
      out += "\n" + f.prediction_label + "\n" + format_predictions(predictions);
    }
  }
  return out;
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path& dir) {
  TemplateCatalog cat;
  auto load_one = [&](std::string_view stem) {
    auto raw = read_file(dir / (std::string(stem) + ".txt"));
    cat.hashes_[std::string(stem)] = sha256_hex(raw);
    cat.texts_[std::string(stem)] = strip_final_newline(std::move(raw));
  };
  for (auto stem : kAgentTemplates) load_one(stem);
  for (auto stem : kAuxTemplates) load_one(stem);

  // Sentence per PreAct template asking for a second look after a mismatch.
  std::map<std::string, std::string> hints;
  if (auto hp = dir / "disparity_hints.json"; std::filesystem::exists(hp)) {
    try {
      hints = nlohmann::json::parse(read_file(hp)).get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error("bad " + hp.string() + ": " + e.what());
    }
  }

  for (auto stem : kAgentTemplates) {
    auto underscore = stem.find('_');
    PromptTemplate t;
    t.env_family = parse_family(stem.substr(0, underscore));
    t.framework = parse_framework(stem.substr(underscore + 1));
    t.name = std::string(stem);
    t.system_text = cat.texts_.find(stem)->second;
    t.assistant_format = format_for(t.env_family, t.framework);
    if (auto h = hints.find(std::string(stem)); h != hints.end()) {
      if (t.system_text.find(h->second) == std::string::npos)
        throw Error("disparity hint for " + std::string(stem) + " is not in the template text");
      t.disparity_hint = h->second;
    }
    cat.templates_.push_back(std::move(t));
  }
  return cat;
}

const PromptTemplate& TemplateCatalog::get(EnvFamily family, Framework framework) const {
  // Act-only runs reuse the ReAct prompt, which already permits bare actions.
  auto wanted = framework == Framework::ActOnly ? Framework::ReAct : framework;
  for (const auto& t : templates_)
    if (t.env_family == family && t.framework == wanted) return t;
  throw Error("no template for " + std::string(to_string(family)) + "/" +
              std::string(to_string(framework)));
}

const std::string& TemplateCatalog::text(std::string_view name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw Error("no catalog text named " + std::string(name));
  return it->second;
}

std::span<const std::string_view> agent_template_names() { return kAgentTemplates; }

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("PREACT_DATA_DIR"); env && *env) return env;
  return PREACT_SOURCE_DATA_DIR;
}

}  // namespace preact

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preact/core.hpp"

namespace preact {

/// How the action section of a response is written.
enum class ActionSyntax {
  Line,       // first line after the action label (HH, QA)
  OsCommand,  // "Act: bash" + fenced code, "Act: finish", "Act: answer(...)"
  SqlBlock,   // "Action: Operation" + fenced sql, or "Action: Answer" + "Final Answer:"
  Question,   // "Question: ..." (puzzle family)
};

/// Section labels and their order in one model response.
struct AssistantFormat {
  std::string thought_label;     // empty when the family has no thought section
  std::string action_label;
  std::string prediction_label;  // empty for ReAct templates
  std::string final_answer_label;
  ActionSyntax syntax = ActionSyntax::Line;
  bool single_line = false;       // every section on one line
  bool action_label_optional = false;  // act-only puzzle prompts
};

struct PromptTemplate {
  EnvFamily env_family = EnvFamily::HH;
  Framework framework = Framework::ReAct;
  std::string name;         // catalog key, e.g. "hh_preact"
  std::string system_text;  // raw catalog text with {slot} placeholders
  AssistantFormat assistant_format;
  // Sentence of the system text that asks the model to reflect on a
  // forecast/observation disparity. Empty when the template has none.
  std::string disparity_hint;

  /// system_text with {example}/{examples} emptied and {problem}/{story} set.
  std::string render_system(std::string_view problem) const;
};

/// Terminal actions (answer/finish) may omit the prediction section.
bool is_terminal_action(const PromptTemplate& t, std::string_view action);

/// Writes one model response in the template's own format.
std::string format_assistant_turn(const PromptTemplate& t, std::string_view thought,
                                  std::string_view action,
                                  std::span<const PredictedOutcome> predictions);

/// "1. category measure" lines (or one line for single-line formats).
std::string format_predictions(std::span<const PredictedOutcome> predictions, bool single_line = false);

/// Prompt catalog loaded from a directory of text files.
class TemplateCatalog {
 public:
  static TemplateCatalog load(const std::filesystem::path& dir);

  const PromptTemplate& get(EnvFamily family, Framework framework) const;
  /// Raw text of any catalog file by stem ("reflexion", "judge_strategy", ...).
  const std::string& text(std::string_view name) const;
  /// SHA-256 of every loaded file, keyed by stem.
  const std::map<std::string, std::string>& hashes() const { return hashes_; }
  std::span<const PromptTemplate> templates() const { return templates_; }

 private:
  std::vector<PromptTemplate> templates_;
  std::map<std::string, std::string, std::less<>> texts_;
  std::map<std::string, std::string> hashes_;
};

/// Agent templates every catalog must provide, as file stems.
std::span<const std::string_view> agent_template_names();

/// $PREACT_DATA_DIR when set, else the data/ directory of the source tree.
std::filesystem::path default_data_dir();

}  // namespace preact

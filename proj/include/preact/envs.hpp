// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "preact/core.hpp"

namespace preact {

class UnknownFamily : public Error {
 public:
  using Error::Error;
};

class TaskSpecError : public Error {
 public:
  using Error::Error;
};

/// Result of one environment transition.
struct EnvOutcome {
  std::string observation;
  bool done = false;
  double success_score = 0.0;  // meaningful only when done
};

inline constexpr std::string_view kNothingHappened = "Nothing happened";

int default_max_turns(EnvFamily family);

// ---------------------------------------------------------------------------
// Instance payloads

struct Receptacle {
  std::string name;  // "fridge 1"
  bool openable = false;
  bool open = false;
  std::vector<std::string> contents;  // object names, "lettuce 1"
};

struct HouseholdWorld {
  std::vector<Receptacle> receptacles;
  std::string goal_object_type;  // "lettuce"
  std::string goal_target;       // "countertop 1"
  std::string goal_text;         // "put a lettuce in countertop"
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  // Header shown in the task prose; may differ from the real column names.
  std::vector<std::string> display_columns;
  std::vector<std::vector<std::string>> rows;
};

struct TableWorld {
  std::vector<Table> tables;
  std::string question;
  std::vector<std::string> answer;
  // For modification tasks: the table state that counts as success.
  std::optional<Table> expected_table;
};

struct PuzzleFact {
  std::string text;
  // Any signature whose keywords all occur (as word prefixes) matches.
  std::vector<std::vector<std::string>> signatures;
};

struct PuzzleWorld {
  std::string story;
  std::string truth;
  std::vector<PuzzleFact> key_facts;
  std::vector<PuzzleFact> false_facts;
};

struct FileSystemWorld {
  std::map<std::string, std::string> files;  // absolute path -> content
  std::string question;
  std::string answer;
};

using World = std::variant<HouseholdWorld, TableWorld, PuzzleWorld, FileSystemWorld>;

/// One shipped task instance. Immutable once loaded.
struct TaskSpec {
  std::string id;
  EnvFamily family = EnvFamily::HH;
  std::string title;
  bool trap = false;
  int max_turns = 0;
  std::string goal;                 // short task statement (used as the Reflexion question)
  std::vector<std::string> oracle;  // action list that solves the task from reset
  World world;
};

/// Parses one TaskSpec file body. Throws UnknownFamily / TaskSpecError.
TaskSpec parse_task_spec(std::string_view json_text);
TaskSpec load_task_spec(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Environments

class Environment {
 public:
  explicit Environment(const TaskSpec& spec) : spec_(spec) {}
  virtual ~Environment() = default;

  /// Restores the initial state and returns o_0 (description + goal).
  std::string reset(std::uint64_t seed);
  EnvOutcome step(std::string_view action);

  /// Available actions for the current turn; empty for free-form families.
  virtual std::vector<std::string> admissible_actions() const { return {}; }
  /// Progress score in [0,1]; SR families report 0 until solved.
  virtual double score() const = 0;

  const TaskSpec& spec() const { return spec_; }
  const std::string& initial_observation() const { return o0_; }
  std::uint64_t seed() const { return seed_; }
  bool done() const { return done_; }

 protected:
  virtual std::string do_reset(std::uint64_t seed) = 0;
  virtual EnvOutcome do_step(std::string_view action) = 0;

 private:
  const TaskSpec& spec_;
  std::string o0_;
  std::uint64_t seed_ = 0;
  bool done_ = false;
};

/// Text household: go to / open / close / take / put / examine.
class HouseholdEnv final : public Environment {
 public:
  explicit HouseholdEnv(const TaskSpec& spec);
  std::vector<std::string> admissible_actions() const override;
  double score() const override { return solved_ ? 1.0 : 0.0; }

 protected:
  std::string do_reset(std::uint64_t seed) override;
  EnvOutcome do_step(std::string_view action) override;

 private:
  Receptacle* find(std::string_view name);
  const Receptacle* here() const;
  std::string describe_contents(const Receptacle& r) const;

  const HouseholdWorld& world_;
  std::vector<Receptacle> state_;
  std::string location_;
  std::optional<std::string> holding_;
  bool solved_ = false;
};

/// In-memory tables behind a one-line SQL subset.
class TableQueryEnv final : public Environment {
 public:
  explicit TableQueryEnv(const TaskSpec& spec);
  double score() const override { return solved_ ? 1.0 : 0.0; }
  const std::vector<Table>& tables() const { return tables_; }

  /// Executes one statement; errors come back as "ERROR: ..." text.
  std::string execute(std::string_view sql);

 protected:
  std::string do_reset(std::uint64_t seed) override;
  EnvOutcome do_step(std::string_view action) override;

 private:
  const TableWorld& world_;
  std::vector<Table> tables_;
  bool solved_ = false;
};

/// Yes/No/Irrelevant/Redundant puzzle host over keyword-signed key facts.
class PuzzleEnv final : public Environment {
 public:
  explicit PuzzleEnv(const TaskSpec& spec);
  double score() const override;
  std::size_t guessed() const;

 protected:
  std::string do_reset(std::uint64_t seed) override;
  EnvOutcome do_step(std::string_view action) override;

 private:
  const PuzzleWorld& world_;
  std::vector<bool> confirmed_;
};

/// Read-only virtual shell: ls, cat, wc -l, find, echo, answer(x), finish.
class FileSystemEnv final : public Environment {
 public:
  explicit FileSystemEnv(const TaskSpec& spec);
  double score() const override { return solved_ ? 1.0 : 0.0; }

  std::string run(std::string_view command) const;

 protected:
  std::string do_reset(std::uint64_t seed) override;
  EnvOutcome do_step(std::string_view action) override;

 private:
  const FileSystemWorld& world_;
  bool solved_ = false;
};

/// Builds the environment for a spec. The spec must outlive it.
std::unique_ptr<Environment> make_environment(const TaskSpec& spec);

/// Creates and resets an environment; o_0 is available via initial_observation().
std::unique_ptr<Environment> reset(const TaskSpec& spec, std::uint64_t seed);

/// Replays the oracle action list; thoughts empty, framework ActOnly.
Trajectory oracle_trajectory(const TaskSpec& spec, std::uint64_t seed = 0);

/// All shipped task specs, keyed by instance id.
class TaskRegistry {
 public:
  static TaskRegistry load(const std::filesystem::path& tasks_dir);

  const TaskSpec& get(std::string_view id) const;
  const TaskSpec* find(std::string_view id) const;
  std::vector<const TaskSpec*> by_family(EnvFamily family) const;
  const std::map<std::string, TaskSpec, std::less<>>& all() const { return specs_; }

  void add(TaskSpec spec);

 private:
  std::map<std::string, TaskSpec, std::less<>> specs_;
};

}  // namespace preact

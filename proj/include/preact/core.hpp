// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace preact {

/// Root of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trajectory record that is not well-formed JSON or lacks a field.
class MalformedRecord : public Error {
 public:
  using Error::Error;
};

/// A well-formed record whose content breaks a Trajectory invariant.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

enum class Framework { ReAct, PreAct, ActOnly };
enum class Outcome { Success, Failure, MaxTurnsExceeded, Refusal, ParseFailure };
enum class Retention { None, Last, All };
enum class EnvFamily { HH, OS, DB, LTP, QA };

std::string_view to_string(Framework f);
std::string_view to_string(Outcome o);
std::string_view to_string(Retention r);
std::string_view to_string(EnvFamily f);

// Parsers accept the to_string spelling case-insensitively. Retention also
// accepts "0", "1" and "all". They throw std::invalid_argument.
Framework parse_framework(std::string_view s);
Outcome parse_outcome(std::string_view s);
Retention parse_retention(std::string_view s);
EnvFamily parse_family(std::string_view s);

/// Families scored by success rate (everything except the puzzle family).
bool is_sr_family(EnvFamily f);

/// One forecast branch: an expected-feedback class plus the plan for it.
struct PredictedOutcome {
  std::string category;
  std::string measure;

  bool operator==(const PredictedOutcome&) const = default;
};

struct Step {
  int index = 1;
  std::string thought;
  std::string action;
  std::vector<PredictedOutcome> prediction;
  // Absent only on a trajectory's final in-flight step.
  std::optional<std::string> observation;

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  std::string task_id;
  std::string env_name;
  Framework framework = Framework::ReAct;
  std::string initial_observation;
  std::vector<Step> steps;
  std::vector<std::string> reflections;
  Outcome outcome = Outcome::Failure;
  double score = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const Trajectory&) const = default;
};

/// How much of the prediction history is replayed to the policy.
///
///   {All, true}   Reflexion mode: ref, o0, t1, a1, p1, o1, ...
///   {All, false}  permanent mode
///   {Last, false} immediate mode (only the newest prediction survives)
///   {None, false} plain ReAct history
struct HistoryPolicy {
  Retention retention = Retention::All;
  bool include_reflections = false;

  static constexpr HistoryPolicy react() { return {Retention::None, false}; }
  static constexpr HistoryPolicy permanent() { return {Retention::All, false}; }
  static constexpr HistoryPolicy immediate() { return {Retention::Last, false}; }
  static constexpr HistoryPolicy reflexion() { return {Retention::All, true}; }

  bool operator==(const HistoryPolicy&) const = default;
};

/// Throws InvariantViolation describing the first broken invariant.
void validate(const Trajectory& t);

/// One JSON line, fixed field order, no trailing newline.
std::string serialize_trajectory(const Trajectory& t);
Trajectory deserialize_trajectory(std::string_view line);

std::vector<Trajectory> read_trajectory_file(const std::filesystem::path& path);
void write_trajectory_file(const std::filesystem::path& path, const std::vector<Trajectory>& ts);

}  // namespace preact

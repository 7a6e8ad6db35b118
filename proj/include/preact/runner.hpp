// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "preact/core.hpp"
#include "preact/envs.hpp"
#include "preact/eval.hpp"
#include "preact/llm.hpp"
#include "preact/strategies.hpp"
#include "preact/templates.hpp"

namespace preact {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct BackendSpec {
  std::string kind = "scripted";  // "scripted" | "live"
  std::filesystem::path script;
  std::string base_url;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  bool supports_n = true;
};

struct TotSpec {
  int n = 1;
  double h = 0.0;
  std::filesystem::path bank;
};

/// Modes: "permanent", "immediate", "reflexion", "tot", and the ablation
/// modes "retention-0", "retention-1", "retention-all".
struct ExperimentConfig {
  std::filesystem::path tasks_dir;
  std::filesystem::path templates_dir;
  // Task ids; "FAMILY:*" selects a family, "*" everything.
  std::vector<std::string> instances;
  std::vector<Framework> frameworks{Framework::ReAct, Framework::PreAct};
  std::vector<std::string> modes{"permanent"};
  int reflexion_trials = 1;
  TotSpec tot;
  BackendSpec backend;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "out";
  std::uint64_t budget = 100000;
  int workers = 1;
  int max_parse_retries = 1;
  int max_turns = 0;  // 0: per-task limit
  int refusal_limit = 3;
  bool inject_disparity_hint = true;
  double temperature = 0.0;
  bool allow_live = false;
};

/// Parses the JSON config; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON of the config (paths as given), used for hashing.
std::string config_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

/// Checks the config against the registry; throws ConfigError.
void validate_config(const ExperimentConfig& cfg, const TaskRegistry& registry);

/// Task ids selected by cfg.instances, in registry order, deduplicated.
std::vector<std::string> resolve_instances(const ExperimentConfig& cfg, const TaskRegistry& registry);

HistoryPolicy policy_for(Framework framework, std::string_view mode);

struct Cell {
  std::string task_id;
  Framework framework = Framework::PreAct;
  std::string mode;
  std::uint64_t seed = 0;

  /// "{task}__{framework}__{mode}__s{seed}.jsonl"
  std::string file_name() const;
};

/// Inverse of Cell::file_name; nullopt for other names.
std::optional<Cell> parse_cell_file_name(std::string_view name);

std::vector<Cell> expand_cells(const ExperimentConfig& cfg, const TaskRegistry& registry);

enum class CellStatus { Ok, Skipped, Failed };
std::string_view to_string(CellStatus s);

struct CellResult {
  Cell cell;
  CellStatus status = CellStatus::Ok;
  std::string error;
  std::vector<Trajectory> trajectories;
};

struct RunResult {
  std::vector<CellResult> cells;
  std::filesystem::path manifest;
  int exit_code = 0;  // 0 ok, 2 partial failure
};

/// Backend named by the spec. Live backends need cfg.allow_live and the
/// credential variable.
std::unique_ptr<ChatBackend> make_backend(const BackendSpec& spec, bool allow_live);

struct RunContext {
  const TaskRegistry& registry;
  const TemplateCatalog& catalog;
  ChatBackend& backend;
  // Archive every PreAct prediction block here (harvest runs).
  PredictionBank* harvest = nullptr;
};

/// Runs every cell, writes one trajectory file per completed cell plus
/// manifest.json into cfg.output_dir.
RunResult cmd_run(const ExperimentConfig& cfg, const RunContext& ctx);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  // Any of "sr", "ngp", "proxy", "strategy", "diversity".
  std::vector<std::string> metrics{"sr", "ngp", "proxy"};
  ChatBackend* judge = nullptr;
  const TaskRegistry* registry = nullptr;
  const TemplateCatalog* catalog = nullptr;
  DiversityOptions diversity;
};

/// One JSON record per (env, framework, mode) plus warning records, in a
/// fixed order. Throws EmptyInput for an empty file.
std::vector<std::string> cmd_eval(const std::vector<std::filesystem::path>& files, const EvalOptions& opts);

/// Human-readable table for cmd_eval records.
std::string render_report(const std::vector<std::string>& records);

/// Writes report.jsonl and report.txt into `dir`.
void write_report(const std::filesystem::path& dir, const std::vector<std::string>& records);

// ---------------------------------------------------------------------------
// Retention ablation

struct AblationRow {
  std::string family;
  double sr[3] = {0, 0, 0};  // retention 0, 1, all
  int n = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // per family, then "ALL"
  RunResult run;
};

/// Runs PreAct with retention 0, 1 and all on the configured instances and
/// writes ablation.txt / ablation.jsonl into cfg.output_dir.
AblationResult cmd_ablate_retention(const ExperimentConfig& cfg, const RunContext& ctx);
std::string render_ablation(const AblationResult& r);

/// PreAct permanent runs archiving every prediction block to `bank_path`.
PredictionBank cmd_harvest_bank(const ExperimentConfig& cfg, const RunContext& ctx,
                                const std::filesystem::path& bank_path);

}  // namespace preact

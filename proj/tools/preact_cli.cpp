// SPDX-License-Identifier: Apache-2.0
// Command-line entry point: run, eval, ablate-retention, harvest-bank, report.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "preact/runner.hpp"

namespace fs = std::filesystem;
using namespace preact;

namespace {

struct RunFlags {
  std::string config;
  std::string output_dir;
  std::vector<std::uint64_t> seeds;
  int workers = 0;
  std::uint64_t budget = 0;
  bool live = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("-c,--config", f.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--output-dir", f.output_dir, "Overrides output_dir");
  cmd->add_option("--seeds", f.seeds, "Overrides seeds")->delimiter(',');
  cmd->add_option("--workers", f.workers, "Overrides workers");
  cmd->add_option("--budget", f.budget, "Overrides the call budget");
  cmd->add_flag("--live", f.live, "Allow a live backend (needs the credential variable)");
}

ExperimentConfig load_with_flags(const RunFlags& f) {
  auto cfg = load_config(f.config);
  if (!f.output_dir.empty()) cfg.output_dir = f.output_dir;
  if (!f.seeds.empty()) cfg.seeds = f.seeds;
  if (f.workers > 0) cfg.workers = f.workers;
  if (f.budget > 0) cfg.budget = f.budget;
  cfg.allow_live = f.live;
  return cfg;
}

struct Loaded {
  TaskRegistry registry;
  TemplateCatalog catalog;
  std::unique_ptr<ChatBackend> backend;
};

Loaded load_all(const ExperimentConfig& cfg) {
  Loaded l{TaskRegistry::load(cfg.tasks_dir), TemplateCatalog::load(cfg.templates_dir), nullptr};
  validate_config(cfg, l.registry);
  l.backend = make_backend(cfg.backend, cfg.allow_live);
  return l;
}

std::vector<fs::path> trajectory_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && parse_cell_file_name(e.path().filename().string())) found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

int summarize(const RunResult& r) {
  std::size_t ok = 0, skipped = 0, failed = 0;
  for (const auto& c : r.cells) {
    ok += c.status == CellStatus::Ok;
    skipped += c.status == CellStatus::Skipped;
    failed += c.status == CellStatus::Failed;
    if (c.status == CellStatus::Failed) std::cerr << "failed: " << c.cell.file_name() << ": " << c.error << "\n";
  }
  std::cout << "cells: " << r.cells.size() << " ok: " << ok << " skipped: " << skipped << " failed: " << failed
            << "\nmanifest: " << r.manifest.string() << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PreAct experiment runner"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run the configured experiment matrix");
  add_run_flags(run, run_flags);

  RunFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate-retention", "PreAct with prediction retention 0, 1 and all");
  add_run_flags(ablate, ablate_flags);

  RunFlags harvest_flags;
  std::string bank_out;
  auto* harvest = app.add_subcommand("harvest-bank", "Archive PreAct prediction blocks for injection runs");
  add_run_flags(harvest, harvest_flags);
  harvest->add_option("--bank", bank_out, "Output bank file (default: tot.bank of the config)");

  std::vector<std::string> eval_inputs;
  std::vector<std::string> metrics{"sr", "ngp", "proxy"};
  std::string judge_script, judge_url, judge_model, judge_key_env = "OPENAI_API_KEY";
  std::string eval_out = ".";
  std::string tasks_dir, templates_dir;
  bool judge_live = false, strict_order = false;
  std::uint64_t judge_seed = 0;
  auto* eval = app.add_subcommand("eval", "Compute metrics over trajectory files");
  eval->add_option("inputs", eval_inputs, "Trajectory files or directories")->required();
  eval->add_option("-m,--metrics", metrics, "sr,ngp,proxy,strategy,diversity")->delimiter(',');
  eval->add_option("--judge-script", judge_script, "Scripted judge");
  eval->add_option("--judge-url", judge_url, "Live judge base URL");
  eval->add_option("--judge-model", judge_model, "Live judge model");
  eval->add_option("--judge-key-env", judge_key_env, "Credential variable of the live judge");
  eval->add_flag("--live", judge_live, "Allow a live judge");
  eval->add_flag("--strict-order", strict_order, "Keep the judge's presentation order fixed");
  eval->add_option("--seed", judge_seed, "Seed of the presentation order");
  eval->add_option("-o,--out", eval_out, "Directory for report.jsonl and report.txt");
  eval->add_option("--tasks-dir", tasks_dir, "Task specs (ground truth for the strategy metric)");
  eval->add_option("--templates-dir", templates_dir, "Prompt catalog");

  std::string report_dir = ".";
  auto* report = app.add_subcommand("report", "Print the table of an existing report.jsonl");
  report->add_option("dir", report_dir, "Directory holding report.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      auto cfg = load_with_flags(run_flags);
      auto l = load_all(cfg);
      return summarize(cmd_run(cfg, {l.registry, l.catalog, *l.backend}));
    }
    if (*ablate) {
      auto cfg = load_with_flags(ablate_flags);
      auto l = load_all(cfg);
      auto r = cmd_ablate_retention(cfg, {l.registry, l.catalog, *l.backend});
      std::cout << render_ablation(r);
      return r.run.exit_code;
    }
    if (*harvest) {
      auto cfg = load_with_flags(harvest_flags);
      auto l = load_all(cfg);
      fs::path out = bank_out.empty() ? cfg.tot.bank : fs::path(bank_out);
      if (out.empty()) throw ConfigError("harvest-bank needs --bank or tot.bank");
      auto bank = cmd_harvest_bank(cfg, {l.registry, l.catalog, *l.backend}, out);
      std::cout << "blocks: " << bank.size() << "\nbank: " << out.string() << "\n";
      return 0;
    }
    if (*eval) {
      const auto data = default_data_dir();
      auto registry = TaskRegistry::load(tasks_dir.empty() ? data / "tasks" : fs::path(tasks_dir));
      auto catalog = TemplateCatalog::load(templates_dir.empty() ? data / "templates" : fs::path(templates_dir));
      std::unique_ptr<ChatBackend> judge;
      if (!judge_script.empty()) {
        judge = make_backend({.kind = "scripted", .script = judge_script}, false);
      } else if (!judge_url.empty()) {
        BackendSpec spec;
        spec.kind = "live";
        spec.base_url = judge_url;
        spec.model = judge_model;
        spec.api_key_env = judge_key_env;
        judge = make_backend(spec, judge_live);
      }
      EvalOptions opts;
      opts.metrics = metrics;
      opts.judge = judge.get();
      opts.registry = &registry;
      opts.catalog = &catalog;
      opts.diversity.randomize_order = !strict_order;
      opts.diversity.seed = judge_seed;
      auto records = cmd_eval(trajectory_files(eval_inputs), opts);
      write_report(eval_out, records);
      std::cout << render_report(records);
      return 0;
    }
    if (*report) {
      std::ifstream in(fs::path(report_dir) / "report.jsonl");
      if (!in) throw ConfigError("no report.jsonl in " + report_dir);
      std::vector<std::string> records;
      for (std::string line; std::getline(in, line);)
        if (!line.empty()) records.push_back(line);
      std::cout << render_report(records);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const TaskSpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const EmptyInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "preact/envs.hpp"
#include "preact/llm.hpp"
#include "preact/templates.hpp"

namespace preact::testing {

inline const TaskRegistry& registry() {
  static const TaskRegistry r = TaskRegistry::load(default_data_dir() / "tasks");
  return r;
}

inline const TemplateCatalog& catalog() {
  static const TemplateCatalog c = TemplateCatalog::load(default_data_dir() / "templates");
  return c;
}

inline std::filesystem::path trap_script() { return default_data_dir() / "scripts" / "trap_recovery.json"; }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("preact-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace preact::testing

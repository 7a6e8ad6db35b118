// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace preact {

enum class Role { User, Assistant };

std::string_view to_string(Role r);

struct ChatTurn {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatTurn&) const = default;
};

struct ChatRequest {
  std::string system;
  std::vector<ChatTurn> turns;
  double temperature = 0.0;
  int n_samples = 1;
  // Only the scripted backend honors the seed.
  std::uint64_t seed = 0;

  bool operator==(const ChatRequest&) const = default;
};

/// Canonical flat rendering used by scripted matchers and hashing.
std::string render_request(const ChatRequest& req);

}  // namespace preact

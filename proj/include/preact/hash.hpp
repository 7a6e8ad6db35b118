// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace preact {

std::string sha256_hex(std::string_view data);

// 64-bit FNV-1a; used for seeding, never for integrity.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace preact

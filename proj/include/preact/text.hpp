// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules. ASCII-only case folding.
namespace preact::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);
std::vector<std::string_view> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Case-fold and collapse every whitespace run to one space; trims both ends.
std::string normalize_ws(std::string_view s);

// Lower-cased alphanumeric runs.
std::vector<std::string> words(std::string_view s);

// Replaces every "{name}" slot; unknown slots are left untouched.
std::string substitute(std::string_view templ,
                       const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace preact::text
